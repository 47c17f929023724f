"""Uniform mesh multiplication for hybrid HEX8/ELINT8 meshes.

Each HEX8 splits into 8 children through edge, face and body mid-points.
Each ELINT8 splits into 4 children in its mid-plane only, so no node is ever
created across the interface thickness. New node numbering depends only on
sorted node-id keys, so it is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import shapes
from .errors import UnsupportedKindError
from .mesh import ElementBlock, ElementKind, MeshModel, exterior_facets

_LATERAL = (2, 3, 4, 5)                      # ELINT8 faces parallel to stacking
_THICKNESS_EDGES = ((0, 4), (1, 5), (2, 6), (3, 7))
_PLANE_EDGES = shapes.HEX8_EDGES[:8]


@dataclass
class RefinementPlan:
    """Edge/face tables of one level and the dimensions they predict."""

    edges: np.ndarray            # (n_edges, 2) sorted node ids
    edge_is_interface: np.ndarray
    faces: np.ndarray            # (n_faces, 4) sorted node ids
    face_is_interface: np.ndarray
    n_e: int
    n_n: int
    n_b: int


def _check(model: MeshModel):
    for b in model.blocks:
        if b.kind not in (ElementKind.HEX8, ElementKind.ELINT8):
            raise UnsupportedKindError(
                f"mesh multiplication supports HEX8 and ELINT8 only, found {b.kind.value}")


def _unique_rows(rows):
    if not len(rows):
        return rows.reshape(0, rows.shape[1] if rows.ndim == 2 else 0)
    return np.unique(rows, axis=0)


def plan(model: MeshModel) -> RefinementPlan:
    """Enumerate unique edges and faces and evaluate the dimension formulas."""
    _check(model)
    hexc = [b.connectivity for b in model.blocks if b.kind == ElementKind.HEX8]
    intc = [b.connectivity for b in model.blocks if b.kind == ElementKind.ELINT8]
    hexc = np.concatenate(hexc) if hexc else np.empty((0, 8), np.int64)
    intc = np.concatenate(intc) if intc else np.empty((0, 8), np.int64)

    def edge_rows(conn, local):
        if not len(conn):
            return np.empty((0, 2), np.int64)
        e = np.concatenate([conn[:, list(p)] for p in local])
        return np.sort(e, axis=1)

    def face_rows(conn, local):
        if not len(conn):
            return np.empty((0, 4), np.int64)
        return np.sort(np.concatenate([conn[:, list(shapes.HEX8_FACES[f])] for f in local]), axis=1)

    div_edges = np.concatenate([edge_rows(hexc, shapes.HEX8_EDGES), edge_rows(intc, _PLANE_EDGES)])
    int_edges = edge_rows(intc, _THICKNESS_EDGES)
    div_faces = np.concatenate([face_rows(hexc, range(6)), face_rows(intc, (0, 1))])
    int_faces = face_rows(intc, _LATERAL)

    e_div, e_int = _unique_rows(div_edges), _unique_rows(int_edges)
    f_div, f_int = _unique_rows(div_faces), _unique_rows(int_faces)
    edges = np.concatenate([e_div, e_int])
    faces = np.concatenate([f_div, f_int])
    e_flag = np.r_[np.zeros(len(e_div), bool), np.ones(len(e_int), bool)]
    f_flag = np.r_[np.zeros(len(f_div), bool), np.ones(len(f_int), bool)]

    n_total, n_int = len(hexc) + len(intc), len(intc)
    ext = exterior_facets(model)
    offs = model.block_offsets
    ext_int = 0
    for b, block in enumerate(model.blocks):
        if block.kind == ElementKind.ELINT8:
            inb = (ext[:, 0] >= offs[b]) & (ext[:, 0] < offs[b + 1])
            ext_int += int(np.isin(ext[inb, 1], _LATERAL).sum())
    n_e = 8 * n_total - 4 * n_int
    n_n = (model.n_nodes + len(edges) + len(faces) + n_total - n_int
           - len(e_int) - len(f_int))
    n_b = 4 * len(ext) - 2 * ext_int
    return RefinementPlan(edges, e_flag, faces, f_flag, n_e, n_n, n_b)


def get_dimensions(model: MeshModel) -> tuple[int, int, int]:
    """Exact (n_e, n_n, n_b) after one level of division.

    ``n_b`` counts exterior facets (faces used by one element only).

    Raises
    ------
    UnsupportedKindError
        If the model contains anything other than HEX8/ELINT8.
    """
    p = plan(model)
    return p.n_e, p.n_n, p.n_b


def child_length_scale(lc: float, ndivi: int) -> float:
    """Characteristic length after ``ndivi`` levels: ``lc / 2**ndivi``."""
    if ndivi < 0:
        raise ValueError("ndivi must be >= 0")
    return lc / 2.0 ** ndivi


def _lookup(table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Index of each row of ``rows`` in the lexicographically sorted ``table``."""
    if not len(rows):
        return np.empty(0, np.int64)
    w = table.shape[1]
    tv = np.ascontiguousarray(table).view([("", table.dtype)] * w).ravel()
    rv = np.ascontiguousarray(rows).view([("", rows.dtype)] * w).ravel()
    idx = np.searchsorted(tv, rv)
    assert np.array_equal(tv[np.minimum(idx, len(tv) - 1)], rv), "edge/face lookup failed"
    return idx


# lattice position (0,1,2)^3 of each reference corner
_CORNER_LAT = ((shapes.HEX8_NODES + 1) // 1).astype(int)   # values 0 or 2


def _hex_lattice(conn, edge_id, face_id, center_id, edges, faces):
    """Global node id at each point of the 3x3x3 lattice of every hex."""
    n = len(conn)
    lat = np.empty((n, 3, 3, 3), np.int64)
    corner_of = {tuple(c): k for k, c in enumerate(_CORNER_LAT)}
    for i in range(3):
        for j in range(3):
            for k in range(3):
                p = (i, j, k)
                mids = [a for a in range(3) if p[a] == 1]
                if not mids:
                    lat[:, i, j, k] = conn[:, corner_of[p]]
                    continue
                corners = []
                for bits in np.ndindex(*(2,) * len(mids)):
                    q = list(p)
                    for a, bit in zip(mids, bits):
                        q[a] = 2 * bit
                    corners.append(corner_of[tuple(q)])
                cn = np.sort(conn[:, corners], axis=1)
                if len(mids) == 1:
                    lat[:, i, j, k] = edge_id[_lookup(edges, cn)]
                elif len(mids) == 2:
                    lat[:, i, j, k] = face_id[_lookup(faces, cn)]
                else:
                    lat[:, i, j, k] = center_id
    return lat


def _divide_once(model: MeshModel) -> tuple[MeshModel, RefinementPlan]:
    p = plan(model)
    x = model.nodes
    nn0 = model.n_nodes
    div_e = ~p.edge_is_interface
    div_f = ~p.face_is_interface
    edge_id = np.full(len(p.edges), -1, np.int64)
    face_id = np.full(len(p.faces), -1, np.int64)
    edge_id[div_e] = nn0 + np.arange(div_e.sum())
    face_id[div_f] = nn0 + div_e.sum() + np.arange(div_f.sum())
    new_xyz = [x, x[p.edges[div_e]].mean(axis=1), x[p.faces[div_f]].mean(axis=1)]
    next_id = nn0 + div_e.sum() + div_f.sum()

    # the lookup tables must stay sorted; divided and interface parts are sorted separately
    ed_tab, ed_ids = p.edges[div_e], edge_id[div_e]
    fd_tab, fd_ids = p.faces[div_f], face_id[div_f]

    blocks, parent_of = [], []
    offs = model.block_offsets
    child_of_face: dict[int, tuple] = {}
    center_ids: dict[int, np.ndarray] = {}
    for b, block in enumerate(model.blocks):
        conn = block.connectivity
        n = len(conn)
        if block.kind == ElementKind.HEX8:
            centers = next_id + np.arange(n)
            center_ids[b] = centers
            next_id += n
            new_xyz.append(x[conn].mean(axis=1))
            lat = _hex_lattice(conn, ed_ids, fd_ids, centers, ed_tab, fd_tab)
            kids = []
            for ci, cj, ck in np.ndindex(2, 2, 2):
                sub = lat[:, ci:ci + 2, cj:cj + 2, ck:ck + 2]
                kids.append(np.stack([sub[:, c[0] // 2, c[1] // 2, c[2] // 2]
                                      for c in _CORNER_LAT], axis=1))
            child_pos = list(np.ndindex(2, 2, 2))
        else:
            # mid-plane lattice on bottom and top facets (3x3 each)
            bot = _quad_lattice(conn[:, :4], ed_ids, fd_ids, ed_tab, fd_tab)
            top = _quad_lattice(conn[:, 4:], ed_ids, fd_ids, ed_tab, fd_tab)
            kids = []
            for ci, cj in np.ndindex(2, 2):
                q = [(ci, cj), (ci + 1, cj), (ci + 1, cj + 1), (ci, cj + 1)]
                kids.append(np.stack([bot[:, a, c] for a, c in q] + [top[:, a, c] for a, c in q],
                                     axis=1))
            child_pos = [(ci, cj, None) for ci, cj in np.ndindex(2, 2)]
        kids = np.stack(kids, axis=1)                       # (n, nchild, 8)
        blocks.append(ElementBlock(block.kind, block.material, kids.reshape(-1, 8)))
        parent_of.append(np.repeat(np.arange(n) + offs[b], kids.shape[1]))
        child_of_face[b] = (kids.shape[1], child_pos)

    nodes = np.concatenate(new_xyz)
    parent = np.concatenate(parent_of) if parent_of else np.empty(0, np.int64)
    fields = {k: v[parent] for k, v in model.fields.items()}
    new = MeshModel(nodes, blocks, fields=fields)

    # boundary sets: children of each parent facet that touch the facet
    new_offs = new.block_offsets
    for name, pairs in model.boundary_sets.items():
        out = []
        for e, f in pairs:
            b = int(np.searchsorted(offs, e, side="right") - 1)
            nchild, pos = child_of_face[b]
            base = new_offs[b] + (e - offs[b]) * nchild
            for c, cp in enumerate(pos):
                if _touches(model.blocks[b].kind, f, cp):
                    out.append((base + c, f))
        new.boundary_sets[name] = np.array(out, np.int64).reshape(-1, 2)

    # node sets: a new node joins a set when all its parent nodes belong to it
    for name, ids in model.node_sets.items():
        mask = np.zeros(nn0, bool)
        mask[ids] = True
        add = [ed_ids[mask[ed_tab].all(axis=1)], fd_ids[mask[fd_tab].all(axis=1)]]
        for b, block in enumerate(model.blocks):
            if block.kind == ElementKind.HEX8:
                inside = mask[block.connectivity].all(axis=1)
                add.append(center_ids[b][inside])
        new.node_sets[name] = np.concatenate([ids] + add)
    return new, p


def _touches(kind, face, child_pos):
    """Whether child at lattice position ``child_pos`` has ``face`` on the parent face."""
    ci, cj, ck = child_pos
    if kind == ElementKind.ELINT8:
        if face in (0, 1):
            return True
        return {2: cj == 0, 3: ci == 1, 4: cj == 1, 5: ci == 0}[face]
    return {0: ck == 0, 1: ck == 1, 2: cj == 0, 3: ci == 1, 4: cj == 1, 5: ci == 0}[face]


def _quad_lattice(conn4, ed_ids, fd_ids, ed_tab, fd_tab):
    """3x3 node lattice of quads with corners (0,0),(2,0),(2,2),(0,2)."""
    n = len(conn4)
    lat = np.empty((n, 3, 3), np.int64)
    corner = {(0, 0): 0, (2, 0): 1, (2, 2): 2, (0, 2): 3}
    for (i, j), k in corner.items():
        lat[:, i, j] = conn4[:, k]
    for (i, j), (a, b) in {(1, 0): (0, 1), (2, 1): (1, 2), (1, 2): (2, 3), (0, 1): (3, 0)}.items():
        lat[:, i, j] = ed_ids[_lookup(ed_tab, np.sort(conn4[:, [a, b]], axis=1))]
    lat[:, 1, 1] = fd_ids[_lookup(fd_tab, np.sort(conn4, axis=1))]
    return lat


def divide_mesh(model: MeshModel, ndivi: int) -> MeshModel:
    """Apply ``ndivi`` levels of uniform division.

    Raises
    ------
    UnsupportedKindError
        If the model contains TET4, QUAD4 or TRI3 blocks.
    """
    if ndivi < 0:
        raise ValueError("ndivi must be >= 0")
    _check(model)
    out = model
    for _ in range(ndivi):
        out, _ = _divide_once(out)
    return out


def divide_with_report(model: MeshModel, ndivi: int) -> tuple[MeshModel, list[dict]]:
    """Like :func:`divide_mesh` but also return predicted vs realized counts per level."""
    _check(model)
    out, report = model, []
    for level in range(1, ndivi + 1):
        out, p = _divide_once(out)
        report.append({"level": level,
                       "predicted": {"n_e": p.n_e, "n_n": p.n_n, "n_b": p.n_b},
                       "realized": {"n_e": out.n_elements, "n_n": out.n_nodes,
                                    "n_b": len(exterior_facets(out))}})
    return out, report
