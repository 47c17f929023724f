"""Reference-element shape functions, quadrature rules and face tables."""

import numpy as np

# Corner coordinates of the reference hexahedron in the standard node order.
HEX8_NODES = np.array(
    [[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
     [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float)

# Local faces, ordered so the right-hand rule gives the outward normal.
HEX8_FACES = ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
              (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7))
TET4_FACES = ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2))
QUAD4_FACES = ((0, 1, 2, 3),)
TRI3_FACES = ((0, 1, 2),)

# Edges of the hexahedron (also used for the interface element).
HEX8_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4),
              (0, 4), (1, 5), (2, 6), (3, 7))

_G = 1.0 / np.sqrt(3.0)


def hex8_gauss():
    """2x2x2 Gauss rule: points (8, 3) in node order, unit weights (8,)."""
    return HEX8_NODES * _G, np.ones(8)


def tet4_gauss():
    """One-point rule at the centroid of the unit tetrahedron."""
    return np.array([[0.25, 0.25, 0.25]]), np.array([1.0 / 6.0])


def hex8_shape(points):
    """Trilinear shape functions and their parametric gradients.

    Parameters
    ----------
    points : (q, 3) array of parametric coordinates.

    Returns
    -------
    N : (q, 8)
    dN : (q, 8, 3)
    """
    p = np.atleast_2d(points)
    s = HEX8_NODES[None, :, :] * p[:, None, :]
    f = 1.0 + s
    N = 0.125 * f[..., 0] * f[..., 1] * f[..., 2]
    dN = np.empty(p.shape[:1] + (8, 3))
    dN[..., 0] = 0.125 * HEX8_NODES[:, 0] * f[..., 1] * f[..., 2]
    dN[..., 1] = 0.125 * HEX8_NODES[:, 1] * f[..., 0] * f[..., 2]
    dN[..., 2] = 0.125 * HEX8_NODES[:, 2] * f[..., 0] * f[..., 1]
    return N, dN


def tet4_shape(points):
    p = np.atleast_2d(points)
    N = np.column_stack([1.0 - p.sum(axis=1), p[:, 0], p[:, 1], p[:, 2]])
    dN = np.broadcast_to(
        np.array([[-1.0, -1, -1], [1, 0, 0], [0, 1, 0], [0, 0, 1]]), (len(p), 4, 3)).copy()
    return N, dN


def quad4_shape(points):
    """Bilinear shape functions on [-1, 1]^2 with their gradients."""
    p = np.atleast_2d(points)
    c = np.array([[-1.0, -1], [1, -1], [1, 1], [-1, 1]])
    f = 1.0 + c[None] * p[:, None, :]
    N = 0.25 * f[..., 0] * f[..., 1]
    dN = np.empty(p.shape[:1] + (4, 2))
    dN[..., 0] = 0.25 * c[:, 0] * f[..., 1]
    dN[..., 1] = 0.25 * c[:, 1] * f[..., 0]
    return N, dN


def quad4_gauss():
    c = np.array([[-1.0, -1], [1, -1], [1, 1], [-1, 1]])
    return c * _G, np.ones(4)
