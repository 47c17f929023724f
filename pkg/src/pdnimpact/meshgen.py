"""Structured generators: boxes, laminated plates with interface layers, and
triangulated rigid surfaces (spherical cap, half cylinder)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import ElementBlock, ElementKind, MeshModel, exterior_facets, validate

_FACE_NAMES = ("zmin", "zmax", "ymin", "xmax", "ymax", "xmin")


def graded_coords(length, fine_size, fine_extent, growth=1.25, center=None):
    """1D node coordinates on ``[0, length]``, fine near ``center`` and graded out.

    A uniform region of spacing ``fine_size`` covers ``center ± fine_extent``;
    beyond it the spacing grows geometrically by ``growth``. The result is
    symmetric about ``center`` when both sides have equal room.
    """
    c = 0.5 * length if center is None else center

    def side(room):
        n_fine = max(1, int(np.ceil(min(fine_extent, room) / fine_size - 1e-9)))
        h = min(fine_size, room / n_fine)
        pts = [h * (i + 1) for i in range(n_fine)]
        pos = pts[-1]
        while room - pos > 1e-9 * length:
            h *= growth
            if pos + 1.5 * h >= room:
                pts.append(room)
                break
            pos += h
            pts.append(pos)
        pts[-1] = room
        return np.array(pts)

    right = c + side(length - c) if length - c > 0 else np.empty(0)
    left = c - side(c) if c > 0 else np.empty(0)
    x = np.concatenate([left[::-1], [c], right])
    x[0], x[-1] = 0.0, float(length)
    return x


def _grid_hex(nx, ny, node_id):
    """Connectivity of an (nx-1)x(ny-1) cell layer between two node planes."""
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    b = node_id[0]
    t = node_id[1]
    return np.column_stack([b[i, j], b[i + 1, j], b[i + 1, j + 1], b[i, j + 1],
                            t[i, j], t[i + 1, j], t[i + 1, j + 1], t[i, j + 1]])


def _box_sets(model, n_cells):
    """Boundary/node sets for the six faces of a structured hex box."""
    nx, ny, nz = n_cells
    # element index e = (k*nx + i)*ny + j on a layer-major layout
    e = np.arange(nx * ny * nz).reshape(nz, nx, ny)
    face_cells = {0: e[0].ravel(), 1: e[-1].ravel(), 2: e[:, :, 0].ravel(),
                  3: e[:, -1, :].ravel(), 4: e[:, :, -1].ravel(), 5: e[:, 0, :].ravel()}
    for f, name in enumerate(_FACE_NAMES):
        model.boundary_sets[name] = np.column_stack(
            [face_cells[f], np.full(len(face_cells[f]), f)])
    model.boundary_sets["surface"] = np.concatenate(
        [model.boundary_sets[n] for n in _FACE_NAMES])
    x = model.nodes
    lo, hi = x.min(axis=0), x.max(axis=0)
    tol = 1e-9 * max(1.0, float(np.linalg.norm(hi - lo)))
    for ax, (a, b) in enumerate(((_FACE_NAMES[5], _FACE_NAMES[3]),
                                 (_FACE_NAMES[2], _FACE_NAMES[4]),
                                 (_FACE_NAMES[0], _FACE_NAMES[1]))):
        model.node_sets[a] = np.nonzero(np.abs(x[:, ax] - lo[ax]) <= tol)[0]
        model.node_sets[b] = np.nonzero(np.abs(x[:, ax] - hi[ax]) <= tol)[0]


def box_mesh(xs, ys, zs, material=1) -> MeshModel:
    """Structured HEX8 box on the tensor grid ``xs × ys × zs``.

    Named boundary sets ``xmin … zmax`` and ``surface``; node sets per face.
    """
    xs, ys, zs = (np.asarray(a, float) for a in (xs, ys, zs))
    nx, ny, nz = len(xs), len(ys), len(zs)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.transpose(2, 0, 1).ravel(), Y.transpose(2, 0, 1).ravel(),
                             Z.transpose(2, 0, 1).ravel()])
    ids = np.arange(nx * ny * nz).reshape(nz, nx, ny)
    conn = np.concatenate([_grid_hex(nx, ny, ids[k:k + 2]) for k in range(nz - 1)])
    model = MeshModel(nodes, [ElementBlock(ElementKind.HEX8, material, conn)])
    _box_sets(model, (nx - 1, ny - 1, nz - 1))
    return model


def ply_frame(angle_deg):
    """Rows a1, a2, a3 of the material frame for a ply rotated about +z."""
    t = np.radians(np.asarray(angle_deg, float))
    c, s = np.cos(t), np.sin(t)
    fr = np.zeros(np.shape(t) + (3, 3))
    fr[..., 0, 0], fr[..., 0, 1] = c, s
    fr[..., 1, 0], fr[..., 1, 1] = -s, c
    fr[..., 2, 2] = 1.0
    return fr


def clusters(angles):
    """Group consecutive equal ply angles: list of (angle, ply count)."""
    out = []
    for a in angles:
        if out and out[-1][0] == a:
            out[-1][1] += 1
        else:
            out.append([a, 1])
    return [(a, n) for a, n in out]


@dataclass
class PlateLayout:
    """Bookkeeping returned alongside a generated laminate."""

    cluster_angles: list
    cluster_plies: list
    cluster_layers: list
    n_interface_layers: int
    thickness: float


def laminate_plate(xs, ys, angles, ply_thickness, layer_thickness=None,
                   interfaces=True, ply_material=1, interface_material=2):
    """Laminated plate: one HEX8 block per ply cluster stack plus ELINT8 layers.

    Plies with equal consecutive angles form a cluster; an interface layer is
    inserted at every change of ply angle. Each cluster gets
    ``round(cluster_thickness / layer_thickness)`` element layers (at least 1).

    Returns
    -------
    model : MeshModel
        Block 0 holds the bulk elements, block 1 (if any) the interface layers.
    layout : PlateLayout
    """
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    nx, ny = len(xs), len(ys)
    cl = clusters(list(angles))
    thick = [n * ply_thickness for _, n in cl]
    if layer_thickness is None:
        layer_thickness = min(thick)
    layers = [max(1, int(round(t / layer_thickness))) for t in thick]

    X, Y = np.meshgrid(xs, ys, indexing="ij")
    planes, zlist = [], []
    z0 = 0.0
    bulk, bulk_angle, elint = [], [], []
    next_id = 0

    def new_plane(z):
        nonlocal next_id
        ids = np.arange(next_id, next_id + nx * ny).reshape(nx, ny)
        next_id += nx * ny
        planes.append(ids)
        zlist.append(z)
        return ids

    prev_top = None
    for c, ((ang, _), t, nl) in enumerate(zip(cl, thick, layers)):
        zs = z0 + t * np.arange(nl + 1) / nl
        if prev_top is None or interfaces:
            bottom = new_plane(zs[0])
            if prev_top is not None:
                elint.append(_grid_hex(nx, ny, (prev_top, bottom)))
        else:
            bottom = prev_top
        cur = bottom
        for k in range(1, nl + 1):
            top = new_plane(zs[k])
            conn = _grid_hex(nx, ny, (cur, top))
            bulk.append(conn)
            bulk_angle.append(np.full(len(conn), float(ang)))
            cur = top
        prev_top = cur
        z0 = zs[-1]

    nodes = np.empty((next_id, 3))
    for ids, z in zip(planes, zlist):
        nodes[ids.ravel(), 0] = X.ravel()
        nodes[ids.ravel(), 1] = Y.ravel()
        nodes[ids.ravel(), 2] = z
    blocks = [ElementBlock(ElementKind.HEX8, ply_material, np.concatenate(bulk))]
    if elint:
        blocks.append(ElementBlock(ElementKind.ELINT8, interface_material, np.concatenate(elint)))
    model = MeshModel(nodes, blocks)
    nb = len(blocks[0])
    ang = model.field("ply_angle")
    ang[:nb] = np.concatenate(bulk_angle)
    model.field("frame")[:nb] = ply_frame(ang[:nb])
    model.field("stacking")[:] = (0.0, 0.0, 1.0)

    # boundary sets: top/bottom faces of the stack and the four sides
    ncell = (nx - 1) * (ny - 1)
    first = np.arange(ncell)
    last = np.arange(nb - ncell, nb)
    model.boundary_sets["zmin"] = np.column_stack([first, np.zeros(ncell, np.int64)])
    model.boundary_sets["zmax"] = np.column_stack([last, np.ones(ncell, np.int64)])
    ext = exterior_facets(model)
    model.boundary_sets["surface"] = ext
    zmin, zmax = nodes[:, 2].min(), nodes[:, 2].max()
    tol = 1e-9 * max(1.0, zmax - zmin)
    model.node_sets["zmin"] = np.nonzero(nodes[:, 2] <= zmin + tol)[0]
    model.node_sets["zmax"] = np.nonzero(nodes[:, 2] >= zmax - tol)[0]
    layout = PlateLayout([a for a, _ in cl], [n for _, n in cl], layers,
                         len(cl) - 1 if interfaces else 0, float(sum(thick)))
    return validate(model), layout


def _orient_outward(nodes, tris, center):
    p = nodes[tris]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum("ij,ij->i", n, p.mean(axis=1) - center) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _zip_rings(a, b):
    """Triangulate the band between two closed vertex rings ``a`` and ``b``."""
    na, nb = len(a), len(b)
    tris = []
    i = j = 0
    while i < na or j < nb:
        fa = (i + 1) / na
        fb = (j + 1) / nb
        if j >= nb or (i < na and fa <= fb):
            tris.append((a[i % na], a[(i + 1) % na], b[j % nb]))
            i += 1
        else:
            tris.append((a[i % na], b[(j + 1) % nb], b[j % nb]))
            j += 1
    return tris


def spherical_cap(radius, polar_max=np.pi / 2, facet_size=None, tip_size=None,
                  growth=1.15, closed=True, center=(0.0, 0.0, 0.0)):
    """Triangulated spherical cap whose pole points in ``-z``.

    Rings of vertices at increasing polar angle; edge length grows from
    ``tip_size`` at the pole to ``facet_size``. Every vertex lies exactly on
    the sphere. With ``closed`` the base is capped by a flat fan so the
    surface bounds a solid.

    Returns a TRI3 ``MeshModel`` with boundary set ``surface``.
    """
    R = float(radius)
    h_max = facet_size or R * polar_max / 24
    h = tip_size or h_max
    thetas = [0.0]
    while thetas[-1] < polar_max - 1e-12:
        step = min(h, h_max) / R
        nxt = thetas[-1] + step
        if polar_max - nxt < 0.5 * step:
            nxt = polar_max
        thetas.append(min(nxt, polar_max))
        h *= growth
    verts = [np.array([0.0, 0.0, -R])]
    rings = []
    for k, th in enumerate(thetas[1:], 1):
        hk = R * (thetas[k] - thetas[k - 1])
        m = max(8, int(np.ceil(2 * np.pi * R * np.sin(th) / hk)))
        m += (-m) % 4
        phi = 2 * np.pi * np.arange(m) / m
        start = len(verts)
        verts += list(np.column_stack([R * np.sin(th) * np.cos(phi), R * np.sin(th) * np.sin(phi),
                                       np.full(m, -R * np.cos(th))]))
        rings.append(np.arange(start, start + m))
    tris = [(0, rings[0][(i + 1) % len(rings[0])], rings[0][i]) for i in range(len(rings[0]))]
    for a, b in zip(rings[:-1], rings[1:]):
        tris += _zip_rings(a, b)
    if closed:
        c = len(verts)
        verts.append(np.array([0.0, 0.0, -R * np.cos(polar_max)]))
        last = rings[-1]
        tris += [(c, last[i], last[(i + 1) % len(last)]) for i in range(len(last))]
    nodes = np.array(verts) + np.asarray(center, float)
    tris = np.array(tris, dtype=np.int64)
    ref = np.asarray(center, float)
    if closed:
        # orient against the solid centroid so the flat base faces outward too
        p = nodes[tris]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        is_base = np.all(np.isclose(p[:, :, 2], nodes[-1, 2]), axis=1)
        flip = np.where(is_base, n[:, 2] < 0, np.einsum("ij,ij->i", n, p.mean(axis=1) - ref) < 0)
        tris[flip] = tris[flip][:, [0, 2, 1]]
    else:
        tris = _orient_outward(nodes, tris, ref)
    model = MeshModel(nodes, [ElementBlock(ElementKind.TRI3, 0, tris)])
    model.boundary_sets["surface"] = np.column_stack(
        [np.arange(len(tris)), np.zeros(len(tris), np.int64)])
    return model


def half_cylinder(radius, width, n_theta, n_width, axis_point=(0.0, 0.0, 0.0)):
    """Lower half of a cylinder with axis along ``y``, as a TRI3 surface.

    The curved face spans polar angles π…2π in the x-z plane and ``y`` in
    ``axis_point[1] ± width/2``; normals point away from the axis.
    """
    th = np.linspace(np.pi, 2 * np.pi, n_theta + 1)
    y = np.linspace(-0.5 * width, 0.5 * width, n_width + 1)
    T, Yg = np.meshgrid(th, y, indexing="ij")
    nodes = np.column_stack([radius * np.cos(T).ravel(), Yg.ravel(), radius * np.sin(T).ravel()])
    nodes += np.asarray(axis_point, float)
    ids = np.arange(len(nodes)).reshape(n_theta + 1, n_width + 1)
    a, b = ids[:-1, :-1].ravel(), ids[1:, :-1].ravel()
    c, d = ids[1:, 1:].ravel(), ids[:-1, 1:].ravel()
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    ax = np.asarray(axis_point, float)
    p = nodes[tris]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    radial = p.mean(axis=1) - ax
    radial[:, 1] = 0.0
    flip = np.einsum("ij,ij->i", n, radial) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    model = MeshModel(nodes, [ElementBlock(ElementKind.TRI3, 0, tris)])
    model.boundary_sets["surface"] = np.column_stack(
        [np.arange(len(tris)), np.zeros(len(tris), np.int64)])
    return model
