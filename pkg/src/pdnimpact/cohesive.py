"""Zero-thickness interface elements with a mixed-mode cohesive law.

Local jump components are ordered (shear 1, shear 2, normal). Interface
elements list the bottom facet first (nodes 0-3) and the top facet second
(nodes 4-7); the jump is top minus bottom.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import shapes
from .materials import CohesiveProps


@dataclass
class CohesivePointState:
    """Damage history: threshold ``r`` (largest equivalent jump, mm) and ``D``."""

    r: np.ndarray
    D: np.ndarray

    @classmethod
    def virgin(cls, n) -> "CohesivePointState":
        return cls(np.zeros(n), np.zeros(n))

    def copy(self) -> "CohesivePointState":
        return CohesivePointState(self.r.copy(), self.D.copy())


def mixed_mode_jumps(B, props: CohesiveProps):
    """Onset and critical equivalent jumps for mode mixity ``B`` (B-K law)."""
    oI, oII = props.onset_jumps
    cI, cII = props.critical_jumps
    Bh = np.asarray(B, float) ** props.eta
    lo = np.sqrt(oI ** 2 + (oII ** 2 - oI ** 2) * Bh)
    lc = (oI * cI + (oII * cII - oI * cI) * Bh) / lo
    return lo, lc


def bk_toughness(B, props: CohesiveProps):
    return props.GIc + (props.GIIc - props.GIc) * np.asarray(B, float) ** props.eta


def cohesive_update(delta, state: CohesivePointState, props: CohesiveProps):
    """Tractions and updated history for local jumps ``delta`` (n, 3).

    The returned state is new; ``state`` is left untouched.
    """
    delta = np.atleast_2d(np.asarray(delta, float))
    open_ = np.maximum(delta[:, 2], 0.0)
    sh2 = delta[:, 0] ** 2 + delta[:, 1] ** 2
    lam = np.sqrt(open_ ** 2 + sh2)
    tot = sh2 + open_ ** 2
    B = np.divide(sh2, tot, out=np.zeros_like(tot), where=tot > 0)
    lo, lc = mixed_mode_jumps(B, props)
    r = np.maximum(state.r, lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        Dn = lc * (r - lo) / (r * (lc - lo))
    Dn = np.clip(np.nan_to_num(Dn, nan=0.0), 0.0, 1.0)
    D = np.maximum(state.D, Dn)
    K = props.Kcoh
    tau = np.empty_like(delta)
    tau[:, :2] = ((1.0 - D) * K)[:, None] * delta[:, :2]
    tau[:, 2] = (1.0 - D) * K * open_ + K * np.minimum(delta[:, 2], 0.0)
    return tau, CohesivePointState(r, D)


def recoverable_energy(delta, state: CohesivePointState, props: CohesiveProps):
    """Stored energy per unit area at each point."""
    delta = np.atleast_2d(delta)
    K = props.Kcoh
    open_ = np.maximum(delta[:, 2], 0.0)
    closed = np.minimum(delta[:, 2], 0.0)
    return 0.5 * K * ((1.0 - state.D) * (delta[:, 0] ** 2 + delta[:, 1] ** 2 + open_ ** 2)
                      + closed ** 2)


def cohesive_time_step(rhobar, Kcoh) -> float:
    """Stable increment of the interface, sqrt(rhobar / K)."""
    return float(np.sqrt(rhobar / Kcoh))


def penalty_stiffness_rule(E_T, t_lam) -> float:
    """Smallest penalty stiffness that leaves the laminate compliance unaffected."""
    return 50.0 * E_T / t_lam


def check_penalty(props: CohesiveProps, E_T, t_lam) -> bool:
    """Warn (not fail) when K_coh is below the recommended minimum."""
    kmin = penalty_stiffness_rule(E_T, t_lam)
    if props.Kcoh < kmin:
        warnings.warn(f"K_coh = {props.Kcoh:.4g} N/mm^3 is below the recommended "
                      f"minimum 50 E_T / t_lam = {kmin:.4g} N/mm^3", stacklevel=2)
        return False
    return True


# --------------------------------------------------------------------------
# Element kinematics

def midplane_frames(x, stacking=None):
    """Local frames (rows t1, t2, n) from reference nodes ``x`` (ne, 8, 3).

    The normal follows the facet orientation, flipped to agree with the
    stacking direction when it is given.
    """
    mid = 0.5 * (x[:, :4] + x[:, 4:])
    n = np.cross(mid[:, 2] - mid[:, 0], mid[:, 3] - mid[:, 1])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    if stacking is not None:
        s = np.asarray(stacking, float)
        ok = np.all(np.isfinite(s), axis=1)
        flip = ok & (np.einsum("ni,ni->n", n, np.where(ok[:, None], s, 0.0)) < 0)
        n[flip] *= -1.0
    t1 = (mid[:, 1] + mid[:, 2]) - (mid[:, 0] + mid[:, 3])
    t1 -= np.einsum("ni,ni->n", t1, n)[:, None] * n
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    return np.stack([t1, t2, n], axis=1)


def _facet_quadrature(xm, rule):
    """Shape values (q, 4) and weights (ne, q) on mid-plane quads ``xm``."""
    pts, w = shapes.quad4_gauss()
    N, dN = shapes.quad4_shape(pts)
    a1 = np.einsum("qa,nai->nqi", dN[..., 0], xm)
    a2 = np.einsum("qa,nai->nqi", dN[..., 1], xm)
    dA = np.linalg.norm(np.cross(a1, a2), axis=-1) * w
    if rule == "gauss":
        return N, dA
    if rule == "newton-cotes":
        return np.eye(4), np.einsum("qa,nq->na", N, dA)
    raise ValueError(f"unknown interface integration rule {rule!r}")


class CohesiveGroup:
    """One block of interface elements bound to a cohesive law."""

    def __init__(self, conn, x_ref, props: CohesiveProps, element_ids, stacking=None,
                 rule="newton-cotes", rhobar=None):
        self.conn = np.ascontiguousarray(conn, dtype=np.int64)
        self.element_ids = np.asarray(element_ids)
        self.props = props
        xe = x_ref[self.conn]
        self.frames = midplane_frames(xe, stacking)
        self.N, self.w = _facet_quadrature(0.5 * (xe[:, :4] + xe[:, 4:]), rule)
        self.rule = rule
        self.rhobar = props.rhobar if rhobar is None else rhobar
        self.area = self.w.sum(axis=1)

    @property
    def n_points(self):
        return self.w.size

    def new_state(self):
        return CohesivePointState.virgin(self.n_points)

    def jumps(self, u):
        """Local jumps (ne, q, 3) for nodal displacements ``u`` (nn, 3)."""
        ue = u[self.conn]
        dg = np.einsum("qa,nai->nqi", self.N, ue[:, 4:] - ue[:, :4])
        return np.einsum("nji,nqi->nqj", self.frames, dg)

    def forces(self, u, state):
        """Element nodal forces (ne, 8, 3) and the trial state."""
        delta = self.jumps(u)
        ne, nq = delta.shape[:2]
        tau, new = cohesive_update(delta.reshape(-1, 3), state, self.props)
        t = np.einsum("nji,nqj->nqi", self.frames, tau.reshape(ne, nq, 3))
        fa = np.einsum("qa,nq,nqi->nai", self.N, self.w, t)
        fe = np.concatenate([-fa, fa], axis=1)
        return fe, new

    def energy(self, u, state):
        delta = self.jumps(u).reshape(-1, 3)
        return float(np.sum(self.w.reshape(-1) * recoverable_energy(delta, state, self.props)))

    def nodal_mass(self):
        """Added mass per element node (ne, 8): rhobar times the tributary area, halved per side."""
        if not self.rhobar:
            return np.zeros(self.conn.shape)
        wa = np.einsum("qa,nq->na", self.N, self.w) * self.rhobar * 0.5
        return np.concatenate([wa, wa], axis=1)

    def critical_time_step(self):
        if not self.rhobar:
            return np.inf
        return cohesive_time_step(self.rhobar, self.props.Kcoh)
