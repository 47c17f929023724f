"""Node-to-surface contact by partial Dirichlet-Neumann conditions.

The master (rigid) surface owns detection and projection. The slave
(deformable) side receives projections, imposes the normal position and
velocity of the master at each projected node, extracts the reactions that
this constraint requires, and releases nodes whose reaction is adhesive.
"""

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import AmbiguousProjectionError, LivelockError


class NodeStatus(enum.IntEnum):
    FREE = 0
    CONSTRAINED = 1
    RELEASED_THIS_STEP = 2


# --------------------------------------------------------------------------
# Geometry

def closest_point_on_triangle(p, a, b, c):
    """Closest points on triangles (a, b, c) to points ``p``; all arrays (k, 3)."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(p)
    done = np.zeros(len(p), bool)

    def put(mask, value):
        m = mask & ~done
        out[m] = value[m] if np.ndim(value) == 2 else value
        done[:] |= m

    with np.errstate(divide="ignore", invalid="ignore"):
        put((d1 <= 0) & (d2 <= 0), a)
        put((d3 >= 0) & (d4 <= d3), b)
        v = d1 / (d1 - d3)
        put((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v[:, None] * ab)
        put((d6 >= 0) & (d5 <= d6), c)
        w = d2 / (d2 - d6)
        put((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w[:, None] * ac)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        put((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + w[:, None] * (c - b))
        den = 1.0 / (va + vb + vc)
        v = vb * den
        w = vc * den
        put(np.ones(len(p), bool), a + v[:, None] * ab + w[:, None] * ac)
    return out


def tangent_frames(n):
    """Rows (n, t1, t2) completing unit normals ``n`` (k, 3) to right-handed frames."""
    n = np.atleast_2d(n)
    ref = np.where((np.abs(n[:, 0]) < 0.9)[:, None], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    t1 = ref - np.einsum("ij,ij->i", ref, n)[:, None] * n
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    return np.stack([n, t1, t2], axis=1)


@dataclass
class Projections:
    """Struct-of-arrays projection records; ``frames`` rows are (n, t1, t2)."""

    nodes: np.ndarray
    facets: np.ndarray
    points: np.ndarray
    gaps: np.ndarray
    frames: np.ndarray

    @classmethod
    def empty(cls) -> "Projections":
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, 3)),
                   np.zeros(0), np.zeros((0, 3, 3)))

    def __len__(self):
        return len(self.nodes)

    @property
    def normals(self):
        return self.frames[:, 0]

    def subset(self, mask) -> "Projections":
        return Projections(self.nodes[mask], self.facets[mask], self.points[mask],
                           self.gaps[mask], self.frames[mask])


class MasterSurface:
    """Triangulated rigid surface stored in its body frame.

    Rigid translations are applied to query points, so the search tree over
    facet centroids is built once.
    """

    def __init__(self, vertices, triangles, strict=False):
        self.vertices = np.asarray(vertices, float)
        self.triangles = np.asarray(triangles, np.int64)
        tri = self.vertices[self.triangles]
        self.tri = tri
        nv = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        self.areas = 0.5 * np.linalg.norm(nv, axis=1)
        self.normals = nv / (2.0 * self.areas[:, None])
        self.centroids = tri.mean(axis=1)
        self.radii = np.linalg.norm(tri - self.centroids[:, None], axis=2).max(axis=1)
        self.radius = float(self.radii.max())
        self.tree = cKDTree(self.centroids)
        self.lo = self.vertices.min(axis=0)
        self.hi = self.vertices.max(axis=0)
        self.facet_size = float(np.sqrt(self.areas.mean() * 2.0))
        self.strict = strict
        self.ambiguous = 0

    def screen(self, x, offset, margin=0.0):
        """Mask of points that may lie within ``margin`` of the translated surface.

        A bounding-box test is followed by a centroid-distance bound: a point
        farther than ``margin`` plus the largest facet radius from every
        centroid is farther than ``margin`` from the surface.
        """
        lo = self.lo + offset - margin
        hi = self.hi + offset + margin
        mask = np.all((x >= lo) & (x <= hi), axis=1)
        if mask.any():
            d, _ = self.tree.query(x[mask] - offset, distance_upper_bound=margin + self.radius)
            mask[mask] = np.isfinite(d)
        return mask

    def project(self, x, offset=np.zeros(3)):
        """Closest facet, point, signed distance and facet normal for points ``x``.

        Ties within 1e-12 go to the lowest facet id. A point lying outside
        any of the tied facets counts as outside, which is exact for convex
        edges.
        """
        q = np.asarray(x, float) - offset
        k = len(q)
        if not k:
            return (np.zeros(0, np.int64), np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)))
        # the facet with the nearest centroid bounds the distance from above
        _, f0 = self.tree.query(q)
        t0 = self.tri[f0]
        ub = np.linalg.norm(q - closest_point_on_triangle(q, t0[:, 0], t0[:, 1], t0[:, 2]),
                            axis=1) + 1e-12
        cand = self.tree.query_ball_point(q, ub + self.radius)
        counts = np.fromiter((len(c) for c in cand), np.int64, k)
        rows = np.repeat(np.arange(k), counts)
        fac = np.concatenate([np.asarray(c, np.int64) for c in cand])
        keep = np.linalg.norm(q[rows] - self.centroids[fac], axis=1) - self.radii[fac] <= ub[rows]
        rows, fac = rows[keep], fac[keep]
        t = self.tri[fac]
        cp = closest_point_on_triangle(q[rows], t[:, 0], t[:, 1], t[:, 2])
        dist = np.linalg.norm(q[rows] - cp, axis=1)
        best_d = np.full(k, np.inf)
        np.minimum.at(best_d, rows, dist)
        tie = dist <= best_d[rows] + 1e-12
        # lowest facet id among the ties
        best_f = np.full(k, np.iinfo(np.int64).max)
        np.minimum.at(best_f, rows[tie], fac[tie])
        pick = tie & (fac == best_f[rows])
        sel = np.nonzero(pick)[0]
        sel = sel[np.unique(rows[sel], return_index=True)[1]]
        n = self.normals[fac[sel]]
        point = cp[sel]
        # a point is outside if it lies outside any of the tied facets (convex edges)
        side = np.einsum("ij,ij->i", q[rows] - cp, self.normals[fac]) >= 0
        outside = np.zeros(k, bool)
        np.logical_or.at(outside, rows[tie], side[tie])
        gap = np.where(outside, dist[sel], -dist[sel])
        self._check_ties(rows, fac, tie, n)
        return fac[sel], point + offset, gap, n

    def _check_ties(self, rows, fac, tie, n_best):
        r, f = rows[tie], fac[tie]
        opposed = np.einsum("ij,ij->i", self.normals[f], n_best[r]) < 0
        hits = len(np.unique(r[opposed]))
        if hits:
            self.ambiguous += hits
            msg = f"{hits} node(s) equidistant to facets with opposing normals; lowest id used"
            if self.strict:
                raise AmbiguousProjectionError(msg)
            warnings.warn(msg, stacklevel=3)


def detect_contact(x, node_ids, master: MasterSurface, offset=np.zeros(3), margin=0.0,
                   gap_tol=0.0):
    """Projections of the penetrating slave nodes.

    Parameters
    ----------
    x : (k, 3) current positions of the candidate slave nodes.
    node_ids : (k,) their node ids.
    margin : float
        Screening distance. Nodes farther than this from the surface on
        either side are skipped, so it must exceed the largest penetration
        a node can acquire in one step.
    gap_tol : float
        Nodes with ``gap < gap_tol`` are reported. A roundoff-sized value
        keeps nodes resting exactly on the surface in contact.
    """
    x = np.asarray(x, float)
    node_ids = np.asarray(node_ids, np.int64)
    near = master.screen(x, offset, margin)
    if not near.any():
        return Projections.empty()
    fac, pts, gap, n = master.project(x[near], offset)
    pen = gap < gap_tol
    return Projections(node_ids[near][pen], fac[pen], pts[pen], gap[pen],
                       tangent_frames(n[pen]) if pen.any() else np.zeros((0, 3, 3)))


# --------------------------------------------------------------------------
# Slave side

def apply_contact_constraints(proj: Projections, x, d, v, master_v):
    """Put projected nodes on the master surface and impose its normal velocity.

    The nodal update is rotated into (n, t1, t2), its normal component is
    overwritten and it is rotated back; tangential components are left
    untouched. ``d`` and ``v`` are modified in place.

    Returns
    -------
    dv : (k, 3) velocity change imposed at the projected nodes.
    """
    if not len(proj):
        return np.zeros((0, 3))
    j = proj.nodes
    R = proj.frames
    dl = np.einsum("kij,kj->ki", R, x[j] - proj.points)
    dl[:, 0] = 0.0
    d[j] += np.einsum("kji,kj->ki", R, dl) + proj.points - x[j]
    vl = np.einsum("kij,kj->ki", R, v[j])
    vl[:, 0] = R[:, 0] @ master_v
    vnew = np.einsum("kji,kj->ki", R, vl)
    dv = vnew - v[j]
    v[j] = vnew
    return dv


def contact_reactions(proj: Projections, m, f_free, master_a):
    """Normal reactions needed to give projected nodes the master's normal acceleration.

    ``f_free`` is f_ext - f_int at every node. Returns (k, 3) global vectors
    along the master normal.
    """
    if not len(proj):
        return np.zeros((0, 3))
    n = proj.normals
    j = proj.nodes
    rn = m[j] * (n @ master_a) - np.einsum("ij,ij->i", f_free[j], n)
    return rn[:, None] * n


def release_nodes(proj: Projections, reactions, rtol=1e-12):
    """Mask of adhesive nodes (tensile reaction) and the reset flag."""
    if not len(proj):
        return np.zeros(0, bool), False
    rn = np.einsum("ij,ij->i", reactions, proj.normals)
    scale = np.abs(rn).max()
    bad = rn < -rtol * scale
    return bad, bool(bad.any())


class ContactLayer:
    """Status bookkeeping for the slave surface of one deformable body."""

    def __init__(self, slave_nodes, n_nodes):
        self.slave_nodes = np.unique(np.asarray(slave_nodes, np.int64))
        self.status = np.zeros(n_nodes, np.int8)
        self.excluded = np.zeros(n_nodes, bool)
        self.reactions = np.zeros((n_nodes, 3))
        self.resets_total = 0

    def begin_step(self):
        self.excluded[:] = False
        self.status[self.status == NodeStatus.RELEASED_THIS_STEP] = NodeStatus.FREE

    def filter(self, proj: Projections) -> Projections:
        """Drop nodes released earlier in the current step."""
        return proj.subset(~self.excluded[proj.nodes]) if len(proj) else proj

    def release(self, nodes, limit):
        self.excluded[nodes] = True
        self.status[nodes] = NodeStatus.RELEASED_THIS_STEP
        self.resets_total += 1
        if self.excluded.sum() > limit:
            raise LivelockError(f"release loop exceeded {limit} iterations")

    def accept(self, proj: Projections, reactions):
        self.status[self.status == NodeStatus.CONSTRAINED] = NodeStatus.FREE
        self.status[proj.nodes] = NodeStatus.CONSTRAINED
        self.reactions[:] = 0.0
        self.reactions[proj.nodes] = reactions

    @property
    def n_constrained(self):
        return int(np.sum(self.status == NodeStatus.CONSTRAINED))
