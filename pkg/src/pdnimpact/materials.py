"""Bulk constitutive models.

Voigt order throughout is 11, 22, 33, 23, 13, 12 with engineering shear
strains. Units are mm, N, MPa, tonne, s.
"""

import weakref
from dataclasses import dataclass, fields, replace

import numpy as np

from . import kernels
from .errors import InvertedElementError, MaterialError, SnapbackError
from .kernels._numpy import (neohookean_pk2, tensor_to_voigt_strain,
                             voigt_to_tensor_stress)

_DMAX = 1.0 - 1e-9


@dataclass(frozen=True)
class TransverseIsotropicProps:
    """Ply properties; the 1 axis is the fiber direction, 2-3 the transverse plane."""

    E11: float
    E22: float
    nu12: float
    nu23: float
    G12: float
    G23: float
    XT: float
    XC: float
    YT: float
    YC: float
    SL: float
    GXT: float
    GXC: float
    GYT: float
    GYC: float
    GSL: float
    rho: float
    fXT: float | None = None
    fGT: float | None = None
    fXC: float | None = None
    fGC: float | None = None
    Sp: float | None = None
    Kp: float | None = None
    alpha0: float | None = None

    def __post_init__(self):
        for name in ("E11", "E22", "G12", "G23", "XT", "XC", "YT", "YC", "SL",
                     "GXT", "GXC", "GYT", "GYC", "GSL", "rho"):
            if not getattr(self, name) > 0:
                raise MaterialError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("fXT", "fGT", "fXC", "fGC"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise MaterialError(f"{name} must lie in (0, 1), got {v}")
        if np.any(np.linalg.eigvalsh(compliance_matrix(self)) <= 0):
            raise MaterialError("compliance matrix is not positive definite")

    @classmethod
    def from_mapping(cls, values: dict) -> "TransverseIsotropicProps":
        """Build from a key/value mapping; unknown keys raise MaterialError."""
        names = {f.name for f in fields(cls)}
        bad = set(values) - names
        if bad:
            raise MaterialError(f"unknown material keys: {sorted(bad)}")
        return cls(**{k: float(v) for k, v in values.items()})

    def with_(self, **changes) -> "TransverseIsotropicProps":
        return replace(self, **changes)


@dataclass(frozen=True)
class CohesiveProps:
    """Interface properties (toughness N/mm, strength MPa, K_coh N/mm^3)."""

    GIc: float
    GIIc: float
    tauI: float
    tauII: float
    eta: float
    Kcoh: float
    rhobar: float | None = None

    def __post_init__(self):
        for name in ("GIc", "GIIc", "tauI", "tauII", "eta", "Kcoh"):
            if not getattr(self, name) > 0:
                raise MaterialError(f"{name} must be positive, got {getattr(self, name)}")
        if self.rhobar is not None and self.rhobar < 0:
            raise MaterialError("rhobar must be non-negative")
        for t, g, mode in ((self.tauI, self.GIc, "I"), (self.tauII, self.GIIc, "II")):
            if not t / self.Kcoh < 2 * g / t:
                raise MaterialError(f"mode {mode}: onset jump exceeds critical jump")

    @property
    def onset_jumps(self):
        return self.tauI / self.Kcoh, self.tauII / self.Kcoh

    @property
    def critical_jumps(self):
        return 2 * self.GIc / self.tauI, 2 * self.GIIc / self.tauII

    @classmethod
    def from_mapping(cls, values: dict) -> "CohesiveProps":
        names = {f.name for f in fields(cls)}
        bad = set(values) - names
        if bad:
            raise MaterialError(f"unknown interface keys: {sorted(bad)}")
        return cls(**{k: float(v) for k, v in values.items()})


# --------------------------------------------------------------------------
# Elastic tensors

def compliance_matrix(props, d1=0.0, d2=0.0, d6=0.0):
    """Transversely isotropic compliance H with optional damage.

    ``d1``, ``d2``, ``d6`` may be arrays of equal shape; the result then has
    that shape plus ``(6, 6)``.
    """
    d1, d2, d6 = np.broadcast_arrays(*(np.minimum(np.asarray(x, float), _DMAX)
                                       for x in (d1, d2, d6)))
    H = np.zeros(d1.shape + (6, 6))
    p = props
    H[..., 0, 0] = 1.0 / ((1.0 - d1) * p.E11)
    H[..., 1, 1] = 1.0 / ((1.0 - d2) * p.E22)
    H[..., 2, 2] = 1.0 / p.E22
    H[..., 0, 1] = H[..., 1, 0] = -p.nu12 / p.E11
    H[..., 0, 2] = H[..., 2, 0] = -p.nu12 / p.E11
    H[..., 1, 2] = H[..., 2, 1] = -p.nu23 / p.E22
    H[..., 3, 3] = 1.0 / p.G23
    H[..., 4, 4] = 1.0 / ((1.0 - d6) * p.G12)
    H[..., 5, 5] = 1.0 / ((1.0 - d6) * p.G12)
    return H


def damaged_stiffness(props, d1=0.0, d2=0.0, d6=0.0):
    """Inverse of :func:`compliance_matrix`; shear terms are diagonal."""
    H = compliance_matrix(props, d1, d2, d6)
    C = np.zeros_like(H)
    C[..., :3, :3] = np.linalg.inv(H[..., :3, :3])
    for k in (3, 4, 5):
        C[..., k, k] = 1.0 / H[..., k, k]
    return C


def damaged_stress(props, eps, d1=0.0, d2=0.0, d6=0.0):
    """Stress ``damaged_stiffness(props, d1, d2, d6) @ eps`` for points ``eps`` (n, 6).

    The normal block of the compliance is inverted in closed form (symmetric
    3x3 cofactors), which avoids building and inverting a matrix per point.
    """
    p = props
    eps = np.asarray(eps, float)
    d1, d2, d6 = (np.minimum(np.asarray(x, float), _DMAX) for x in (d1, d2, d6))
    a = 1.0 / ((1.0 - d1) * p.E11)
    b = 1.0 / ((1.0 - d2) * p.E22)
    c = 1.0 / p.E22
    h12 = -p.nu12 / p.E11
    h23 = -p.nu23 / p.E22
    c00 = b * c - h23 * h23
    c01 = h12 * h23 - h12 * c
    c02 = h12 * h23 - h12 * b
    c11 = a * c - h12 * h12
    c12 = h12 * h12 - a * h23
    c22 = a * b - h12 * h12
    det = a * c00 + h12 * c01 + h12 * c02
    e0, e1, e2 = eps[:, 0], eps[:, 1], eps[:, 2]
    sig = np.empty_like(eps)
    sig[:, 0] = (c00 * e0 + c01 * e1 + c02 * e2) / det
    sig[:, 1] = (c01 * e0 + c11 * e1 + c12 * e2) / det
    sig[:, 2] = (c02 * e0 + c12 * e1 + c22 * e2) / det
    sig[:, 3] = p.G23 * eps[:, 3]
    g = (1.0 - d6) * p.G12
    sig[:, 4] = g * eps[:, 4]
    sig[:, 5] = g * eps[:, 5]
    return sig


def effective_stiffness(props) -> np.ndarray:
    """Undamaged 6x6 stiffness of a transversely isotropic ply."""
    return damaged_stiffness(props)


def isotropic_stiffness(E, nu) -> np.ndarray:
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[[0, 1, 2], [0, 1, 2]] += 2 * mu
    C[[3, 4, 5], [3, 4, 5]] = mu
    return C


def strain_rotation(frames) -> np.ndarray:
    """Voigt strain transformation T so that eps_local = T @ eps_global.

    ``frames`` has shape (..., 3, 3) with the local axes as rows.
    Engineering shear convention on both sides.
    """
    R = np.asarray(frames, float)
    unit = np.zeros((6, 3, 3))
    for k, (i, j) in enumerate(((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))):
        if i == j:
            unit[k, i, i] = 1.0
        else:
            unit[k, i, j] = unit[k, j, i] = 0.5
    rot = np.einsum("...ik,bkl,...jl->...bij", R, unit, R)
    return np.swapaxes(tensor_to_voigt_strain(rot), -1, -2)


def lame_from(E, nu):
    mu = E / (2 * (1 + nu))
    kappa = E / (3 * (1 - 2 * nu))
    return mu, kappa


def neo_hookean_energy(F, E, nu):
    """W = mu/2 (J^-2/3 tr C - 3) + kappa/2 (J - 1)^2 per unit reference volume."""
    F = np.asarray(F, float)
    J = np.linalg.det(F)
    if np.any(J <= 0):
        raise InvertedElementError("det F <= 0")
    mu, kappa = lame_from(E, nu)
    I1 = np.einsum("...ki,...ki->...", F, F)
    return 0.5 * mu * (J ** (-2.0 / 3.0) * I1 - 3.0) + 0.5 * kappa * (J - 1.0) ** 2


def neo_hookean_stress(F, E, nu):
    """Second Piola-Kirchhoff stress of the compressible Neo-Hookean solid.

    Raises
    ------
    InvertedElementError
        If ``det F <= 0`` anywhere.
    """
    F = np.asarray(F, float)
    mu, kappa = lame_from(E, nu)
    S, J = neohookean_pk2(F, mu, kappa)
    if np.any(J <= 0):
        raise InvertedElementError("det F <= 0")
    return 0.5 * (S + np.swapaxes(S, -1, -2))


AS4_8552 = TransverseIsotropicProps(
    E11=128e3, E22=7630.0, nu12=0.35, nu23=0.45, G12=4358.0, G23=2631.0,
    XT=2300.0, XC=1531.0, YT=74.2, YC=199.8, SL=94.36,
    GXT=81.5, GXC=106.3, GYT=0.28, GYC=1.313, GSL=0.79,
    fXT=0.1, fGT=0.6, fXC=0.1, fGC=0.9, Sp=62.0, Kp=0.1936,
    rho=1.59e-9, alpha0=53.0)

T800S_M21 = TransverseIsotropicProps(
    E11=138.4e3, E22=8540.0, nu12=0.311, nu23=0.45, G12=4290.0, G23=2945.0,
    XT=2854.0, XC=1109.0, YT=56.6, YC=250.0, SL=93.7,
    GXT=340.0, GXC=60.0, GYT=0.308, GYC=1.38, GSL=0.828,
    fXT=0.1, fGT=0.6, fXC=0.1, fGC=0.9, Sp=66.9, Kp=0.09,
    rho=1.59e-9)

AS4_8552_INTERFACE = CohesiveProps(GIc=0.28, GIIc=0.79, tauI=74.2, tauII=94.36,
                                   eta=1.45, Kcoh=2.5e4)
T800S_M21_INTERFACE = CohesiveProps(GIc=0.308, GIIc=0.828, tauI=49.2, tauII=80.7,
                                    eta=1.75, Kcoh=1.1e6)

PLY_PRESETS = {"AS4/8552": AS4_8552, "T800S/M21": T800S_M21}
INTERFACE_PRESETS = {"AS4/8552": AS4_8552_INTERFACE, "T800S/M21": T800S_M21_INTERFACE}



# --------------------------------------------------------------------------
# Crack-band softening

@dataclass
class SofteningLaw:
    """Bilinear (or linear) softening in strain space for one mechanism.

    All fields are arrays over material points. ``eps0`` is the onset
    strain, ``epsk`` the pivot strain with stress ``sk``, ``epsf`` the
    strain at full failure.
    """

    E: float
    X: np.ndarray
    eps0: np.ndarray
    epsk: np.ndarray
    sk: np.ndarray
    epsf: np.ndarray

    def stress(self, eps):
        eps = np.asarray(eps, float)
        X = self.X
        s1 = X + (self.sk - X) * (eps - self.eps0) / np.maximum(self.epsk - self.eps0, 1e-300)
        s2 = self.sk * (self.epsf - eps) / np.maximum(self.epsf - self.epsk, 1e-300)
        s = np.where(eps <= self.eps0, self.E * eps,
                     np.where(eps <= self.epsk, s1, np.maximum(s2, 0.0)))
        return np.where(eps >= self.epsf, 0.0, s)

    def damage(self, r):
        """Damage for threshold ``r >= 1`` (onset at r = 1)."""
        eps = np.asarray(r, float) * self.eps0
        d = 1.0 - self.stress(eps) / (self.E * eps)
        return np.clip(d, 0.0, 1.0)


# mechanism name -> (modulus, strength, toughness, fX, fG)
_MECHANISMS = {
    "1+": ("E11", "XT", "GXT", "fXT", "fGT"),
    "1-": ("E11", "XC", "GXC", "fXC", "fGC"),
    "2+": ("E22", "YT", "GYT", None, None),
    "2-": ("E22", "YC", "GYC", None, None),
    "6": ("G12", "SL", "GSL", None, None),
}
MECHANISMS = tuple(_MECHANISMS)


def snapback_limit(props, mechanism) -> float:
    """Largest element length for which the softening law has no snap-back.

    For the linear law this is ``2 G E / X**2``; with a pivot the first
    branch must also be non-vertical, which tightens it by ``fG``.
    """
    Ek, Xk, Gk, fXk, fGk = _MECHANISMS[mechanism]
    E, X, G = getattr(props, Ek), getattr(props, Xk), getattr(props, Gk)
    fG = getattr(props, fGk) if fGk else None
    return 2.0 * (fG if fG else 1.0) * G * E / X ** 2


def softening_laws(props, lc, on_snapback="raise", margin=0.99):
    """Build the five crack-band laws for element lengths ``lc``.

    Parameters
    ----------
    props : TransverseIsotropicProps
    lc : array_like
        Characteristic element length per material point (mm).
    on_snapback : {"raise", "reduce"}
        ``"raise"`` refuses lengths above the snap-back limit. ``"reduce"``
        lowers the strength of the offending mechanism at those points to
        ``margin`` times the largest admissible value, keeping the toughness.

    Returns
    -------
    dict mapping mechanism name to :class:`SofteningLaw`.
    """
    lc = np.atleast_1d(np.asarray(lc, float))
    if np.any(lc <= 0):
        raise MaterialError("characteristic length must be positive")
    laws = {}
    for name, (Ek, Xk, Gk, fXk, fGk) in _MECHANISMS.items():
        E, X0, G = getattr(props, Ek), getattr(props, Xk), getattr(props, Gk)
        fX = getattr(props, fXk) if fXk else None
        fG = getattr(props, fGk) if fGk else None
        bilinear = fX is not None and fG is not None
        fg = fG if bilinear else 1.0
        limit = 2.0 * fg * G * E / X0 ** 2
        X = np.full_like(lc, X0)
        over = lc > limit
        if over.any():
            if on_snapback == "raise":
                raise SnapbackError(
                    f"mechanism {name}: element length {lc[over].max():.4g} mm exceeds "
                    f"snap-back limit {limit:.4g} mm")
            if on_snapback != "reduce":
                raise ValueError(f"on_snapback must be 'raise' or 'reduce', got {on_snapback!r}")
            X[over] = margin * np.sqrt(2.0 * fg * G * E / lc[over])
        g = G / lc
        eps0 = X / E
        if bilinear:
            ef1 = 2.0 * fG * g / X
            epsk = eps0 + (1.0 - fX) * (ef1 - eps0)
            sk = fX * X
            epsf = ef1 + 2.0 * (1.0 - fG) * g / (fX * X)
        else:
            epsf = 2.0 * g / X
            epsk = epsf.copy()
            sk = np.zeros_like(X)
        laws[name] = SofteningLaw(E, X, eps0, epsk, sk, epsf)
    return laws


# --------------------------------------------------------------------------
# Intralaminar damage

@dataclass
class IntraPointState:
    """History variables at a set of material points.

    ``r`` columns are the thresholds for 1+, 1-, 2+, 2-. ``d`` columns are
    the damage variables 1+, 1-, 2+, 2-, 6. ``gamma_p`` and ``alpha`` are
    the plastic in-plane shear strain and its accumulated magnitude.
    """

    gamma_p: np.ndarray
    alpha: np.ndarray
    r: np.ndarray
    d: np.ndarray
    lc: np.ndarray

    @classmethod
    def virgin(cls, n, lc) -> "IntraPointState":
        return cls(np.zeros(n), np.zeros(n), np.ones((n, 4)), np.zeros((n, 5)),
                   np.broadcast_to(np.asarray(lc, float), (n,)).copy())

    def copy(self) -> "IntraPointState":
        return IntraPointState(*(a.copy() for a in (self.gamma_p, self.alpha, self.r,
                                                     self.d, self.lc)))

    @property
    def D1(self):
        """Fiber damage reported as the larger of tension and compression."""
        return self.d[:, :2].max(axis=1)

    @property
    def D2(self):
        """Matrix damage reported as the larger of the three matrix modes."""
        return self.d[:, 2:].max(axis=1)


def shear_return_map(gamma, gamma_p, alpha, props):
    """Closed-form 1D return mapping for in-plane shear.

    Yield stress ``Sp + H alpha`` with linear hardening ``H = Kp G12``.
    Without ``Sp`` the response is elastic.
    """
    if props.Sp is None:
        return gamma_p, alpha
    G = props.G12
    H = (props.Kp or 0.0) * G
    tau = G * (gamma - gamma_p)
    f = np.abs(tau) - (props.Sp + H * alpha)
    dg = np.where(f > 0, f / (G + H), 0.0)
    return gamma_p + np.sign(tau) * dg, alpha + dg


def _loading(sig_e, eps, props):
    """Loading functions 1+, 1-, 2+, 2- (inactive ones are zero)."""
    s11, s22 = sig_e[:, 0], sig_e[:, 1]
    tau2 = sig_e[:, 4] ** 2 + sig_e[:, 5] ** 2
    shear = tau2 / props.SL ** 2
    phi = np.zeros((len(sig_e), 4))
    phi[:, 0] = np.maximum(props.E11 * eps[:, 0], 0.0) / props.XT
    phi[:, 1] = np.maximum(-s11, 0.0) / props.XC
    tens = s22 >= 0
    phi[:, 2] = np.where(tens, np.sqrt((s22 / props.YT) ** 2 + shear), 0.0)
    phi[:, 3] = np.where(tens, 0.0, np.sqrt((s22 / props.YC) ** 2 + shear))
    return phi


def intralaminar_update(eps, state: IntraPointState, props, laws=None,
                        on_snapback="raise"):
    """Stress update of the intralaminar damage model.

    Parameters
    ----------
    eps : (n, 6) total strain in the material frame.
    state : IntraPointState from the previous step (not modified).
    props : TransverseIsotropicProps
    laws : dict, optional
        Precomputed :func:`softening_laws` for ``state.lc``.

    Returns
    -------
    sigma : (n, 6) nominal stress in the material frame.
    new : IntraPointState
    """
    eps = np.atleast_2d(np.asarray(eps, float))
    if laws is None:
        laws = softening_laws(props, state.lc, on_snapback)
    gp, alpha = shear_return_map(eps[:, 5], state.gamma_p, state.alpha, props)
    eps_e = eps.copy()
    eps_e[:, 5] -= gp
    C0 = effective_stiffness(props)
    sig_e = eps_e @ C0.T
    r = np.maximum(state.r, _loading(sig_e, eps, props))
    d = np.empty_like(state.d)
    for k, name in enumerate(("1+", "1-", "2+", "2-")):
        d[:, k] = laws[name].damage(r[:, k])
    d[:, 4] = laws["6"].damage(np.maximum(r[:, 2], r[:, 3]))
    d = np.maximum(d, state.d)
    d1 = np.where(eps[:, 0] >= 0, d[:, 0], d[:, 1])
    d2 = np.where(sig_e[:, 1] >= 0, d[:, 2], d[:, 3])
    sig = damaged_stress(props, eps_e, d1, d2, d[:, 4])
    return sig, IntraPointState(gp, alpha, r, d, state.lc)


def uniaxial_stress_history(props, strain, component=0, lc=1.0, on_snapback="raise",
                            tol=1e-12, max_iter=200):
    """Drive one strain component while keeping the other stresses at zero.

    Returns the driven stress history and the final state. The lateral
    strains are found by secant fixed-point iteration on the current
    damaged stiffness.
    """
    strain = np.asarray(strain, float)
    state = IntraPointState.virgin(1, lc)
    laws = softening_laws(props, state.lc, on_snapback)
    free = [k for k in range(6) if k != component]
    eps = np.zeros((1, 6))
    out = np.empty(len(strain))
    for i, e in enumerate(strain):
        eps[0, component] = e
        for _ in range(max_iter):
            sig, trial = intralaminar_update(eps, state, props, laws)
            d = trial.d[0]
            d1 = d[0] if eps[0, 0] >= 0 else d[1]
            d2 = d[2] if sig[0, 1] >= 0 else d[3]
            C = damaged_stiffness(props, d1, d2, d[4])
            ep = eps[0].copy()
            ep[5] -= trial.gamma_p[0]
            # solve C_ff (eps_f - p_f) = -C_fc eps_c for the free strains
            rhs = -C[np.ix_(free, [component])][:, 0] * ep[component]
            sol = np.linalg.solve(C[np.ix_(free, free)], rhs)
            new = eps.copy()
            new[0, free] = sol + (eps[0, free] - ep[free])
            if np.max(np.abs(new - eps)) <= tol * max(1.0, abs(e)):
                eps = new
                break
            eps = new
        sig, state = intralaminar_update(eps, state, props, laws)
        out[i] = sig[0, component]
    return out, state


def dissipated_density(strain, stress):
    """Work per unit volume along a strain path (trapezoid rule)."""
    return float(np.trapezoid(stress, strain))


# --------------------------------------------------------------------------
# Materials bound to finite-element groups

class BulkMaterial:
    """Interface used by the element groups.

    ``forces`` returns element force arrays and the trial history;
    ``energy`` returns recoverable strain energy.
    """

    rho: float = 0.0

    def max_stiffness(self) -> float:
        raise NotImplementedError

    def new_state(self, group):
        return None

    def forces(self, group, u, state):
        raise NotImplementedError

    def energy(self, group, u, state) -> float:
        raise NotImplementedError

    def point_fields(self, state):
        return {}


def _green(F, small_strain=False):
    if small_strain:
        H = F - np.eye(3)
        return 0.5 * (H + np.swapaxes(H, -1, -2))
    return 0.5 * (np.einsum("...ki,...kj->...ij", F, F) - np.eye(3))


class LinearElastic(BulkMaterial):
    """Isotropic St Venant-Kirchhoff solid (or small-strain Hooke)."""

    def __init__(self, E, nu, rho, small_strain=False):
        self.E, self.nu, self.rho = float(E), float(nu), float(rho)
        self.small_strain = bool(small_strain)
        self.C = isotropic_stiffness(self.E, self.nu)

    def max_stiffness(self):
        return float(self.C.max())

    def stiffness_for(self, group):
        return self.C[None]

    def forces(self, group, u, state):
        C = self.stiffness_for(group)
        return kernels.elastic_forces(group.dNdX, group.wdetJ, group.conn, u, C,
                                      self.small_strain), state

    def energy(self, group, u, state):
        F = kernels.deformation_gradient(group.dNdX, group.conn, u)
        ev = tensor_to_voigt_strain(_green(F, self.small_strain))
        C = self.stiffness_for(group)
        if C.shape[0] == 1:
            sv = ev @ C[0].T
        else:
            sv = np.einsum("nij,nqj->nqi", C, ev)
        return float(0.5 * np.sum(group.wdetJ * np.sum(sv * ev, axis=-1)))


class TransverselyIsotropicElastic(LinearElastic):
    """Undamaged ply; the material frame is taken per element."""

    def __init__(self, props, small_strain=False):
        self.props = props
        self.rho = props.rho
        self.small_strain = bool(small_strain)
        self.C = effective_stiffness(props)
        self._rotated = weakref.WeakKeyDictionary()

    def stiffness_for(self, group):
        # frames are fixed in the reference configuration, so rotate once per group
        if group not in self._rotated:
            T = strain_rotation(group.frames)
            self._rotated[group] = np.ascontiguousarray(
                np.einsum("nai,ab,nbj->nij", T, self.C, T, optimize=True))
        return self._rotated[group]


class NeoHookean(BulkMaterial):
    def __init__(self, E, nu, rho):
        self.E, self.nu, self.rho = float(E), float(nu), float(rho)
        self.mu, self.kappa = lame_from(self.E, self.nu)

    def max_stiffness(self):
        return self.kappa + 4.0 * self.mu / 3.0

    def forces(self, group, u, state):
        ne = len(group.conn)
        fe, bad = kernels.neohookean_forces(group.dNdX, group.wdetJ, group.conn, u,
                                            np.full(ne, self.mu), np.full(ne, self.kappa))
        if bad >= 0:
            raise InvertedElementError("det F <= 0", element=int(group.element_ids[bad]))
        return fe, state

    def energy(self, group, u, state):
        F = kernels.deformation_gradient(group.dNdX, group.conn, u)
        return float(np.sum(group.wdetJ * neo_hookean_energy(F, self.E, self.nu)))


class IntralaminarDamage(BulkMaterial):
    """Ply with crack-band damage and shear plasticity at every Gauss point."""

    def __init__(self, props, on_snapback="raise", small_strain=False):
        self.props = props
        self.rho = props.rho
        self.on_snapback = on_snapback
        self.small_strain = bool(small_strain)
        self.C = effective_stiffness(props)
        self._laws = weakref.WeakKeyDictionary()
        self._rot = weakref.WeakKeyDictionary()

    def max_stiffness(self):
        return float(self.C.max())

    def laws(self, group):
        if group not in self._laws:
            lc = np.repeat(group.lc, group.wdetJ.shape[1])
            self._laws[group] = softening_laws(self.props, lc, self.on_snapback)
        return self._laws[group]

    def new_state(self, group):
        # building the laws here performs the snap-back check up front
        self.laws(group)
        ng = group.wdetJ.shape[1]
        return IntraPointState.virgin(len(group.conn) * ng, np.repeat(group.lc, ng))

    def _local(self, group, u):
        F = kernels.deformation_gradient(group.dNdX, group.conn, u)
        if group not in self._rot:
            self._rot[group] = np.ascontiguousarray(strain_rotation(group.frames))
        T = self._rot[group]
        ev = tensor_to_voigt_strain(_green(F, self.small_strain))
        eps = np.einsum("nab,nqb->nqa", T, ev)
        return F, T, eps

    def forces(self, group, u, state):
        F, T, eps = self._local(group, u)
        ne, ng = eps.shape[:2]
        sig, new = intralaminar_update(eps.reshape(-1, 6), state, self.props, self.laws(group))
        sig = sig.reshape(ne, ng, 6)
        if not np.all(np.isfinite(sig)):
            bad = np.nonzero(~np.isfinite(sig).all(axis=(1, 2)))[0][0]
            raise MaterialError("non-finite stress", element=int(group.element_ids[bad]))
        S = voigt_to_tensor_stress(np.einsum("nab,nqa->nqb", T, sig))
        P = S if self.small_strain else F @ S
        return kernels.pk1_forces(group.dNdX, group.wdetJ, P), new

    def energy(self, group, u, state):
        _, _, eps = self._local(group, u)
        ne, ng = eps.shape[:2]
        e = eps.reshape(-1, 6).copy()
        e[:, 5] -= state.gamma_p
        d = state.d
        sig_e = e @ self.C.T
        d1 = np.where(e[:, 0] >= 0, d[:, 0], d[:, 1])
        d2 = np.where(sig_e[:, 1] >= 0, d[:, 2], d[:, 3])
        w = 0.5 * np.sum(damaged_stress(self.props, e, d1, d2, d[:, 4]) * e, axis=1)
        return float(np.sum(group.wdetJ.reshape(-1) * w))

    def point_fields(self, state):
        return {"D1": state.D1, "D2": state.D2}
