"""Pure-numpy element kernels (fallback when the compiled core is unavailable).

Array layout shared with the compiled core:
``dNdX (ne, ng, nen, 3)``, ``wdetJ (ne, ng)``, ``conn (ne, nen)``,
``u (nn, 3)``, ``fe (ne, nen, 3)``. Voigt order is 11, 22, 33, 23, 13, 12
with engineering shear strains.
"""

import numpy as np

VOIGT = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))


def deformation_gradient(dNdX, conn, u, nthreads=1):
    F = np.einsum("nai,nqaj->nqij", u[conn], dNdX)
    F[..., 0, 0] += 1.0
    F[..., 1, 1] += 1.0
    F[..., 2, 2] += 1.0
    return F


def pk1_forces(dNdX, wdetJ, P, nthreads=1):
    return np.einsum("nq,nqij,nqaj->nai", wdetJ, P, dNdX)


def gather(fe, ptr, idx, nnodes, nthreads=1):
    flat = fe.reshape(-1, 3)[idx]
    if not len(flat):
        return np.zeros((nnodes, 3))
    out = np.add.reduceat(flat, np.minimum(ptr[:-1], len(flat) - 1), axis=0)
    empty = ptr[1:] == ptr[:-1]
    if empty.any():
        out[empty] = 0.0
    return out


def tensor_to_voigt_strain(E):
    return np.stack([E[..., 0, 0], E[..., 1, 1], E[..., 2, 2],
                     2 * E[..., 1, 2], 2 * E[..., 0, 2], 2 * E[..., 0, 1]], axis=-1)


def voigt_to_tensor_stress(s):
    S = np.empty(s.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(VOIGT):
        S[..., i, j] = s[..., k]
        S[..., j, i] = s[..., k]
    return S


def elastic_forces(dNdX, wdetJ, conn, u, C, small_strain=False, nthreads=1):
    F = deformation_gradient(dNdX, conn, u)
    if small_strain:
        H = F - np.eye(3)
        E = 0.5 * (H + np.swapaxes(H, -1, -2))
    else:
        E = 0.5 * (np.einsum("...ki,...kj->...ij", F, F) - np.eye(3))
    ev = tensor_to_voigt_strain(E)
    if C.shape[0] == 1:
        sv = ev @ C[0].T
    else:
        sv = np.einsum("nij,nqj->nqi", C, ev)
    S = voigt_to_tensor_stress(sv)
    P = S if small_strain else F @ S
    return pk1_forces(dNdX, wdetJ, P)


def neohookean_pk2(F, mu, kappa):
    """PK2 stress for W = mu/2 (J^-2/3 tr C - 3) + kappa/2 (J - 1)^2.

    Returns ``(S, J)``; callers check ``J > 0``.
    """
    C = np.einsum("...ki,...kj->...ij", F, F)
    J = np.linalg.det(F)
    Ci = np.linalg.inv(C)
    I1 = np.trace(C, axis1=-2, axis2=-1)
    mu = np.asarray(mu)[..., None, None]
    kappa = np.asarray(kappa)[..., None, None]
    Jb = np.abs(J)[..., None, None]
    S = (mu * Jb ** (-2.0 / 3.0) * (np.eye(3) - I1[..., None, None] / 3.0 * Ci)
         + kappa * Jb * (Jb - 1.0) * Ci)
    return S, J


def neohookean_forces(dNdX, wdetJ, conn, u, mu, kappa, nthreads=1):
    """Element forces and the first element with det F <= 0 (or -1)."""
    F = deformation_gradient(dNdX, conn, u)
    S, J = neohookean_pk2(F, mu[:, None], kappa[:, None])
    bad = np.nonzero((J <= 0).any(axis=1))[0]
    P = F @ S
    return pk1_forces(dNdX, wdetJ, P), (int(bad[0]) if len(bad) else -1)
