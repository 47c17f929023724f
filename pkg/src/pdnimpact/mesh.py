"""Hybrid bulk/interface mesh model, validation and the ``MESH v1`` text format.

Units are mm throughout. Node and element ids are 0-based in memory and
1-based in files.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import shapes
from .errors import KindError, ParseError, UnknownSetError, ValidationError


class ElementKind(enum.Enum):
    HEX8 = "HEX8"
    TET4 = "TET4"
    ELINT8 = "ELINT8"
    QUAD4 = "QUAD4"
    TRI3 = "TRI3"

    @property
    def n_nodes(self) -> int:
        return _N_NODES[self]

    @property
    def faces(self):
        return _FACES[self]

    @property
    def is_bulk(self) -> bool:
        return self in (ElementKind.HEX8, ElementKind.TET4)

    @property
    def is_facet(self) -> bool:
        return self in (ElementKind.QUAD4, ElementKind.TRI3)


_N_NODES = {ElementKind.HEX8: 8, ElementKind.TET4: 4, ElementKind.ELINT8: 8,
            ElementKind.QUAD4: 4, ElementKind.TRI3: 3}
_FACES = {ElementKind.HEX8: shapes.HEX8_FACES, ElementKind.TET4: shapes.TET4_FACES,
          ElementKind.ELINT8: shapes.HEX8_FACES, ElementKind.QUAD4: shapes.QUAD4_FACES,
          ElementKind.TRI3: shapes.TRI3_FACES}

FIELD_SHAPES = {"frame": (3, 3), "ply_angle": (), "stacking": (3,)}


@dataclass
class ElementBlock:
    kind: ElementKind
    material: int
    connectivity: np.ndarray

    def __post_init__(self):
        self.kind = ElementKind(self.kind)
        self.connectivity = np.asarray(self.connectivity, dtype=np.int64).reshape(
            -1, self.kind.n_nodes)

    def __len__(self):
        return len(self.connectivity)


@dataclass
class MeshModel:
    """Nodes, typed element blocks, named sets and per-element fields.

    Element ids run globally over the blocks in order. Boundary sets hold
    ``(element, local_face)`` pairs; per-element fields use NaN for unset rows.
    """

    nodes: np.ndarray
    blocks: list[ElementBlock]
    boundary_sets: dict[str, np.ndarray] = field(default_factory=dict)
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)
    fields: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float).reshape(-1, 3)
        self.boundary_sets = {k: np.asarray(v, dtype=np.int64).reshape(-1, 2)
                              for k, v in self.boundary_sets.items()}
        self.node_sets = {k: np.asarray(v, dtype=np.int64).ravel()
                          for k, v in self.node_sets.items()}
        for name, arr in list(self.fields.items()):
            if name not in FIELD_SHAPES:
                raise ValidationError(f"unknown field '{name}'")
            self.fields[name] = np.asarray(arr, dtype=float).reshape(
                (self.n_elements,) + FIELD_SHAPES[name])

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def block_offsets(self) -> np.ndarray:
        return np.cumsum([0] + [len(b) for b in self.blocks])

    def locate(self, element: int) -> tuple[ElementBlock, int]:
        """Return the block holding global ``element`` and the local row."""
        offs = self.block_offsets
        if not 0 <= element < offs[-1]:
            raise IndexError(f"element {element} out of range")
        b = int(np.searchsorted(offs, element, side="right") - 1)
        return self.blocks[b], int(element - offs[b])

    def element_kinds(self) -> np.ndarray:
        return np.concatenate([[b.kind] * len(b) for b in self.blocks]) if self.blocks \
            else np.empty(0, dtype=object)

    def count(self, kind: ElementKind) -> int:
        return sum(len(b) for b in self.blocks if b.kind == kind)

    def field(self, name: str) -> np.ndarray:
        """Field array, allocated as all-NaN if it was never set."""
        if name not in self.fields:
            self.fields[name] = np.full((self.n_elements,) + FIELD_SHAPES[name], np.nan)
        return self.fields[name]

    def bounding_box_diagonal(self) -> float:
        if not len(self.nodes):
            return 0.0
        return float(np.linalg.norm(self.nodes.max(axis=0) - self.nodes.min(axis=0)))

    def boundary_set(self, name: str) -> np.ndarray:
        try:
            return self.boundary_sets[name]
        except KeyError:
            raise UnknownSetError(f"unknown boundary set '{name}'") from None

    def node_set(self, name: str) -> np.ndarray:
        try:
            return self.node_sets[name]
        except KeyError:
            raise UnknownSetError(f"unknown node set '{name}'") from None

    def copy(self) -> "MeshModel":
        return MeshModel(
            self.nodes.copy(),
            [ElementBlock(b.kind, b.material, b.connectivity.copy()) for b in self.blocks],
            {k: v.copy() for k, v in self.boundary_sets.items()},
            {k: v.copy() for k, v in self.node_sets.items()},
            {k: v.copy() for k, v in self.fields.items()})


# --------------------------------------------------------------------------
# Geometry


def hex8_jacobians(xe: np.ndarray) -> np.ndarray:
    """det J at the 2x2x2 Gauss points for element coordinates ``(n, 8, 3)``."""
    pts, _ = shapes.hex8_gauss()
    _, dN = shapes.hex8_shape(pts)
    J = np.einsum("qai,naj->nqij", dN, xe)
    return np.linalg.det(J)


def tet4_volumes(xe: np.ndarray) -> np.ndarray:
    e = xe[:, 1:] - xe[:, :1]
    return np.linalg.det(e) / 6.0


def block_volumes(model: MeshModel, block: ElementBlock) -> np.ndarray:
    xe = model.nodes[block.connectivity]
    if block.kind == ElementKind.HEX8:
        return hex8_jacobians(xe).sum(axis=1)
    if block.kind == ElementKind.TET4:
        return tet4_volumes(xe)
    raise KindError(f"volume is undefined for {block.kind.value} elements")


def element_volume(model: MeshModel, element: int) -> float:
    """Gauss-quadrature volume (mm^3) of a bulk element.

    Raises
    ------
    KindError
        If the element is an interface element or a boundary facet.
    """
    block, row = model.locate(element)
    if not block.kind.is_bulk:
        raise KindError(f"element {element + 1} is {block.kind.value}; volume needs HEX8/TET4")
    sub = ElementBlock(block.kind, block.material, block.connectivity[row:row + 1])
    return float(block_volumes(model, sub)[0])


def bulk_volume(model: MeshModel) -> float:
    return float(sum(block_volumes(model, b).sum() for b in model.blocks if b.kind.is_bulk))


@dataclass
class SurfaceFacets:
    """Struct-of-arrays facet list.

    ``nodes`` is ``(k, 4)``; triangles pad the last column with -1.
    ``vector_area`` is the exact vector area of each (bilinear) facet.
    """

    element: np.ndarray
    local_face: np.ndarray
    nodes: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    centroids: np.ndarray

    def __len__(self):
        return len(self.element)

    @property
    def vector_area(self) -> np.ndarray:
        return self.normals * self.areas[:, None]

    def node_ids(self) -> np.ndarray:
        n = self.nodes.ravel()
        return np.unique(n[n >= 0])

    def triangles(self) -> np.ndarray:
        """Split quads along the 0-2 diagonal; returns ``(t, 3)`` node ids."""
        tri = self.nodes[:, 3] < 0
        out = [self.nodes[tri, :3], self.nodes[~tri][:, [0, 1, 2]], self.nodes[~tri][:, [0, 2, 3]]]
        return np.concatenate(out).astype(np.int64)


def facet_nodes(model: MeshModel, pairs: np.ndarray) -> np.ndarray:
    """Node ids ``(k, 4)`` (-1 padded) of ``(element, local_face)`` pairs."""
    out = np.full((len(pairs), 4), -1, dtype=np.int64)
    offs = model.block_offsets
    blk = np.searchsorted(offs, pairs[:, 0], side="right") - 1
    for b, block in enumerate(model.blocks):
        sel = np.nonzero(blk == b)[0]
        if not len(sel):
            continue
        rows = pairs[sel, 0] - offs[b]
        faces = pairs[sel, 1]
        if np.any(faces < 0) or np.any(faces >= len(block.kind.faces)):
            bad = sel[(faces < 0) | (faces >= len(block.kind.faces))][0]
            raise ValidationError(
                f"element {pairs[bad, 0] + 1}: local face {pairs[bad, 1] + 1} does not exist")
        for f, loc in enumerate(block.kind.faces):
            m = faces == f
            out[sel[m], :len(loc)] = block.connectivity[rows[m]][:, loc]
    return out


def _facet_geometry(x: np.ndarray, nodes: np.ndarray):
    tri = nodes[:, 3] < 0
    p = x[np.where(nodes < 0, nodes[:, :1], nodes)]
    va = np.empty((len(nodes), 3))
    va[tri] = 0.5 * np.cross(p[tri, 1] - p[tri, 0], p[tri, 2] - p[tri, 0])
    va[~tri] = 0.5 * np.cross(p[~tri, 2] - p[~tri, 0], p[~tri, 3] - p[~tri, 1])
    area = np.linalg.norm(va, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = va / area[:, None]
    cen = np.where(tri[:, None], p[:, :3].mean(axis=1), p.mean(axis=1))
    return n, area, cen


def extract_surface(model: MeshModel, name: str) -> SurfaceFacets:
    """Facets of a boundary set with parent element and outward unit normal.

    Raises
    ------
    UnknownSetError
        If ``name`` is not a boundary set of ``model``.
    """
    pairs = model.boundary_set(name)
    nodes = facet_nodes(model, pairs)
    n, area, cen = _facet_geometry(model.nodes, nodes)
    return SurfaceFacets(pairs[:, 0].copy(), pairs[:, 1].copy(), nodes, n, area, cen)


def all_face_pairs(model: MeshModel, kinds=None) -> tuple[np.ndarray, np.ndarray]:
    """Every ``(element, local_face)`` pair of volume/interface elements.

    Returns the pairs and a ``(k, 4)`` array of face node ids (-1 padded).
    """
    pairs, nodes = [], []
    offs = model.block_offsets
    for b, block in enumerate(model.blocks):
        if block.kind.is_facet or (kinds is not None and block.kind not in kinds):
            continue
        ne = len(block)
        for f, loc in enumerate(block.kind.faces):
            pr = np.column_stack([np.arange(ne) + offs[b], np.full(ne, f)])
            nd = np.full((ne, 4), -1, dtype=np.int64)
            nd[:, :len(loc)] = block.connectivity[:, loc]
            pairs.append(pr)
            nodes.append(nd)
    if not pairs:
        return np.empty((0, 2), np.int64), np.empty((0, 4), np.int64)
    return np.concatenate(pairs), np.concatenate(nodes)


def face_keys(nodes: np.ndarray) -> np.ndarray:
    """Order-independent face keys: sorted node ids, padding kept last."""
    big = np.iinfo(np.int64).max
    k = np.sort(np.where(nodes < 0, big, nodes), axis=1)
    return k


def exterior_facets(model: MeshModel) -> np.ndarray:
    """``(element, local_face)`` pairs of faces used by exactly one element."""
    pairs, nodes = all_face_pairs(model)
    if not len(pairs):
        return pairs
    keys = face_keys(nodes)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return pairs[counts[inv.ravel()] == 1]


# --------------------------------------------------------------------------
# Validation


def _eid(model, e):
    return f"element {int(e) + 1}"


def validate(model: MeshModel) -> MeshModel:
    """Check every model invariant; raise ``ValidationError`` naming the culprit."""
    nn = model.n_nodes
    if not np.all(np.isfinite(model.nodes)):
        bad = np.nonzero(~np.isfinite(model.nodes).all(axis=1))[0][0]
        raise ValidationError(f"node {bad + 1} has non-finite coordinates")
    offs = model.block_offsets
    diag = model.bounding_box_diagonal()
    for b, block in enumerate(model.blocks):
        c = block.connectivity
        if not len(c):
            continue
        bad = np.nonzero(((c < 0) | (c >= nn)).any(axis=1))[0]
        if len(bad):
            raise ValidationError(f"{_eid(model, offs[b] + bad[0])} references a node "
                                  f"outside 1..{nn}")
        s = np.sort(c, axis=1)
        bad = np.nonzero((s[:, 1:] == s[:, :-1]).any(axis=1))[0]
        if len(bad):
            raise ValidationError(f"{_eid(model, offs[b] + bad[0])} references a node twice")
        xe = model.nodes[c]
        if block.kind == ElementKind.HEX8:
            bad = np.nonzero((hex8_jacobians(xe) <= 0).any(axis=1))[0]
            if len(bad):
                raise ValidationError(
                    f"{_eid(model, offs[b] + bad[0])} has a non-positive Jacobian")
        elif block.kind == ElementKind.TET4:
            bad = np.nonzero(tet4_volumes(xe) <= 0)[0]
            if len(bad):
                raise ValidationError(f"{_eid(model, offs[b] + bad[0])} has non-positive volume")
        elif block.kind == ElementKind.ELINT8:
            gap = np.linalg.norm(xe[:, 4:] - xe[:, :4], axis=2).max(axis=1)
            bad = np.nonzero(gap > 1e-9 * diag)[0]
            if len(bad):
                raise ValidationError(
                    f"{_eid(model, offs[b] + bad[0])}: interface facets do not coincide")
            st = model.field("stacking")[offs[b]:offs[b + 1]]
            bad = np.nonzero(~np.isfinite(st).all(axis=1)
                             | (np.abs(np.linalg.norm(st, axis=1) - 1) > 1e-9))[0]
            if len(bad):
                raise ValidationError(
                    f"{_eid(model, offs[b] + bad[0])}: interface element needs a unit "
                    "stacking direction")
    if "frame" in model.fields:
        fr = model.fields["frame"]
        set_ = np.isfinite(fr).all(axis=(1, 2))
        err = np.abs(np.einsum("nij,nkj->nik", fr, fr) - np.eye(3)).max(axis=(1, 2))
        bad = np.nonzero(set_ & (err > 1e-12))[0]
        if len(bad):
            raise ValidationError(f"{_eid(model, bad[0])}: material frame is not orthonormal")
    for name, pairs in model.boundary_sets.items():
        if len(pairs) and (pairs[:, 0].min() < 0 or pairs[:, 0].max() >= offs[-1]):
            raise ValidationError(f"boundary set '{name}' references a missing element")
        facet_nodes(model, pairs)
    for name, ids in model.node_sets.items():
        if len(ids) and (ids.min() < 0 or ids.max() >= nn):
            raise ValidationError(f"node set '{name}' references a missing node")
    return model


# --------------------------------------------------------------------------
# File format


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if line:
            yield lineno, line


def _count(tok, lineno, pos):
    try:
        n = int(tok[pos])
    except (IndexError, ValueError):
        raise ParseError(f"line {lineno}: expected a count") from None
    if n < 0:
        raise ParseError(f"line {lineno}: negative count")
    return n


def parse_mesh(text: str, check: bool = True) -> MeshModel:
    """Parse ``MESH v1`` text; see the README for the grammar."""
    it = _tokens(text)
    try:
        lineno, tok = next(it)
    except StopIteration:
        raise ParseError("empty mesh file") from None
    if tok != ["MESH", "v1"]:
        raise ParseError(f"line {lineno}: expected header 'MESH v1'")

    def rows(n, width, what):
        out = []
        for _ in range(n):
            try:
                ln, t = next(it)
            except StopIteration:
                raise ParseError(f"unexpected end of file inside {what}") from None
            if len(t) != width:
                raise ParseError(f"line {ln}: {what} row needs {width} values, got {len(t)}")
            out.append((ln, t))
        return out

    node_ids, coords = [], []
    blocks_raw = []  # (kind, material, [(ln, eid, conn)])
    bsets_raw, nsets_raw, fields_raw = {}, {}, {}
    for lineno, tok in it:
        key = tok[0]
        if key == "NODES":
            for ln, t in rows(_count(tok, lineno, 1), 4, "NODES"):
                try:
                    node_ids.append(int(t[0]))
                    coords.append([float(v) for v in t[1:]])
                except ValueError:
                    raise ParseError(f"line {ln}: bad node record") from None
        elif key == "BLOCK":
            if len(tok) != 4:
                raise ParseError(f"line {lineno}: BLOCK needs kind material_id count")
            try:
                kind = ElementKind(tok[1])
                mat = int(tok[2])
            except ValueError:
                raise ParseError(f"line {lineno}: bad BLOCK header") from None
            recs = []
            for ln, t in rows(_count(tok, lineno, 3), kind.n_nodes + 1, f"{kind.value} block"):
                try:
                    recs.append((ln, int(t[0]), [int(v) for v in t[1:]]))
                except ValueError:
                    raise ParseError(f"line {ln}: bad connectivity") from None
            blocks_raw.append((kind, mat, recs))
        elif key in ("BSET", "NSET"):
            if len(tok) != 3:
                raise ParseError(f"line {lineno}: {key} needs name count")
            width = 2 if key == "BSET" else 1
            vals = []
            for ln, t in rows(_count(tok, lineno, 2), width, key):
                try:
                    vals.append([int(v) for v in t])
                except ValueError:
                    raise ParseError(f"line {ln}: bad {key} entry") from None
            (bsets_raw if key == "BSET" else nsets_raw)[tok[1]] = vals
        elif key == "FIELD":
            if len(tok) != 3 or tok[1] not in FIELD_SHAPES:
                raise ParseError(f"line {lineno}: FIELD needs frame|ply_angle|stacking count")
            width = 1 + int(np.prod(FIELD_SHAPES[tok[1]], dtype=int))
            vals = []
            for ln, t in rows(_count(tok, lineno, 2), width, f"FIELD {tok[1]}"):
                try:
                    vals.append((ln, int(t[0]), [float(v) for v in t[1:]]))
                except ValueError:
                    raise ParseError(f"line {ln}: bad field record") from None
            fields_raw[tok[1]] = vals
        else:
            raise ParseError(f"line {lineno}: unknown section '{key}'")

    node_index = {}
    for i, nid in enumerate(node_ids):
        if nid in node_index:
            raise ParseError(f"duplicate node id {nid}")
        node_index[nid] = i
    elem_index = {}
    blocks = []
    for kind, mat, recs in blocks_raw:
        conn = np.empty((len(recs), kind.n_nodes), dtype=np.int64)
        for r, (ln, eid, cn) in enumerate(recs):
            if eid in elem_index:
                raise ParseError(f"line {ln}: duplicate element id {eid}")
            elem_index[eid] = len(elem_index)
            for j, nid in enumerate(cn):
                if nid not in node_index:
                    raise ValidationError(f"element {eid} references node {nid}, "
                                          f"which is not among the {len(node_ids)} nodes")
                conn[r, j] = node_index[nid]
        blocks.append(ElementBlock(kind, mat, conn))

    def elem(eid, where):
        if eid not in elem_index:
            raise ValidationError(f"{where} references unknown element {eid}")
        return elem_index[eid]

    bsets = {name: np.array([[elem(e, f"BSET {name}"), f - 1] for e, f in v], dtype=np.int64)
             .reshape(-1, 2) for name, v in bsets_raw.items()}
    nsets = {}
    for name, v in nsets_raw.items():
        ids = []
        for (nid,) in v:
            if nid not in node_index:
                raise ValidationError(f"NSET {name} references unknown node {nid}")
            ids.append(node_index[nid])
        nsets[name] = np.array(ids, dtype=np.int64)
    model = MeshModel(np.array(coords, dtype=float).reshape(-1, 3), blocks, bsets, nsets)
    for name, vals in fields_raw.items():
        arr = model.field(name)
        for ln, eid, v in vals:
            arr[elem(eid, f"FIELD {name}")] = np.reshape(v, FIELD_SHAPES[name])
    return validate(model) if check else model


def load_mesh(path) -> MeshModel:
    """Read and validate a ``MESH v1`` file.

    Raises
    ------
    ParseError
        Malformed file.
    ValidationError
        An invariant fails; the message names the element or node (1-based).
    """
    return parse_mesh(Path(path).read_text())


def format_mesh(model: MeshModel) -> str:
    out = ["MESH v1", f"NODES {model.n_nodes}"]
    out += [f"{i + 1} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(model.nodes.tolist())]
    eid = 0
    for block in model.blocks:
        out.append(f"BLOCK {block.kind.value} {block.material} {len(block)}")
        for row in (block.connectivity + 1).tolist():
            eid += 1
            out.append(f"{eid} " + " ".join(map(str, row)))
    for name, pairs in model.boundary_sets.items():
        out.append(f"BSET {name} {len(pairs)}")
        out += [f"{e + 1} {f + 1}" for e, f in pairs.tolist()]
    for name, ids in model.node_sets.items():
        out.append(f"NSET {name} {len(ids)}")
        out += [str(i + 1) for i in ids.tolist()]
    for name, arr in model.fields.items():
        flat = arr.reshape(len(arr), -1)
        rows = np.nonzero(np.isfinite(flat).all(axis=1))[0]
        out.append(f"FIELD {name} {len(rows)}")
        out += [f"{e + 1} " + " ".join(repr(v) for v in flat[e].tolist()) for e in rows]
    return "\n".join(out) + "\n"


def save_mesh(model: MeshModel, path) -> None:
    """Write ``model`` so that :func:`load_mesh` reproduces it bit-exactly."""
    Path(path).write_text(format_mesh(model))
