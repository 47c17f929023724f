"""Benchmark set-ups: Hertz indentation, cylinder-on-beam indentation, plate impact.

Units are mm, s, N, t (tonne) and MPa throughout, so energies are in mJ
and densities in t/mm^3 (1000 kg/m^3 = 1e-9).
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .cohesive import check_penalty
from .contact import MasterSurface
from .coupling import DeformableInstance, RigidInstance
from .dynamics import RigidBodyState, SmoothStep, Staircase, TimeLoopConfig
from .errors import ConfigError, StabilityError
from .fem import Solid
from .materials import (INTERFACE_PRESETS, PLY_PRESETS, CohesiveProps,
                        IntralaminarDamage, LinearElastic, NeoHookean,
                        TransverselyIsotropicElastic)
from .mesh import ElementKind, MeshModel
from .meshgen import box_mesh, graded_coords, half_cylinder, laminate_plate, spherical_cap
from .refine import divide_with_report

GRAVITY = 9810.0  # mm/s^2
DOFS = {"x": 0, "y": 1, "z": 2}


@dataclass
class Striker:
    """Rigid body with a triangulated surface stored at its initial position."""

    surface: MeshModel
    mass: float
    center: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    motion: object = None
    motion_dir: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class Scenario:
    """Everything needed to run one coupled simulation.

    ``clamped`` node sets have all dofs fixed; ``supports`` maps node sets
    to the fixed components (e.g. ``"z"``).
    """

    name: str
    model: MeshModel
    materials: dict
    striker: Striker
    slave_set: str
    time: TimeLoopConfig
    clamped: tuple = ()
    supports: dict = field(default_factory=dict)
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    damping: float = 0.0
    interface_rule: str = "newton-cotes"
    rhobar: dict = field(default_factory=dict)
    symmetry_factor: float = 1.0
    ndivi: int = 0
    info: dict = field(default_factory=dict)

    def validate(self) -> "Scenario":
        names = set(self.clamped) | set(self.supports) | {self.slave_set}
        missing = sorted(n for n in names if n not in self.model.node_sets)
        if missing:
            raise ConfigError(f"scenario '{self.name}' references unknown node set(s) {missing}")
        used = {b.material for b in self.model.blocks if not b.kind.is_facet}
        unbound = sorted(used - set(self.materials))
        if unbound:
            raise ConfigError(f"scenario '{self.name}' has no material for id(s) {unbound}")
        for name, comps in self.supports.items():
            bad = set(comps) - set(DOFS)
            if bad:
                raise ConfigError(f"support '{name}': unknown component(s) {sorted(bad)}")
        return self

    def refined(self, ndivi: int) -> "Scenario":
        """Copy with the deformable mesh divided ``ndivi`` times."""
        if ndivi <= 0:
            return self
        model, report = divide_with_report(self.model, ndivi)
        info = dict(self.info, refinement=report)
        return replace(self, model=model, ndivi=self.ndivi + ndivi, info=info)

    def fixed_mask(self):
        fixed = np.zeros((self.model.n_nodes, 3), bool)
        for name in self.clamped:
            fixed[self.model.node_sets[name]] = True
        for name, comps in self.supports.items():
            for c in comps:
                fixed[self.model.node_sets[name], DOFS[c]] = True
        return fixed

    def slave_nodes(self):
        return np.asarray(self.model.node_sets[self.slave_set], np.int64)

    def build(self):
        """Solid, rigid instance and deformable instance ready to run."""
        self.validate()
        solid = Solid(self.model, self.materials, self.interface_rule, self.rhobar)
        s = self.striker
        tri = s.surface.blocks[0].connectivity
        surface = MasterSurface(s.surface.nodes, tri)
        body = RigidBodyState(s.mass, s.center, s.velocity, g=s.gravity, motion=s.motion,
                              motion_dir=s.motion_dir)
        rigid = RigidInstance(body, surface)
        deform = DeformableInstance(solid, self.slave_nodes(), self.fixed_mask(),
                                    gravity=self.gravity, damping=self.damping)
        return solid, rigid, deform


# --------------------------------------------------------------------------
# Hertz indentation

def hertz_force(delta, E, nu, R):
    """Normal force of a rigid sphere pressed to depth ``delta`` into a half-space."""
    Es = E / (1.0 - nu * nu)
    return 4.0 / 3.0 * Es * np.sqrt(R) * np.asarray(delta, float) ** 1.5


def hertz_axis_displacement(a, z, E, nu, R):
    """Vertical displacement at depth ``z`` under the centre of a Hertz contact.

    Superposes point-load half-space solutions over the elliptical pressure
    of contact radius ``a``. At ``z = 0`` this equals the indentation a²/R.
    """
    Es = E / (1.0 - nu * nu)
    G = E / (2.0 * (1.0 + nu))
    p0 = 2.0 * a * Es / (np.pi * R)

    def f(r):
        rho = np.hypot(r, z)
        return p0 * np.sqrt(max(1.0 - (r / a) ** 2, 0.0)) * r / (2.0 * G) \
            * (2.0 * (1.0 - nu) / rho + z * z / rho ** 3)

    return quad(f, 0.0, a, limit=200)[0]


def hertz_force_relative(delta_rel, z, E, nu, R):
    """Hertz force for an indentation measured relative to a point at depth ``z``.

    Solves a²/R - u_z(0, z; a) = ``delta_rel`` for the contact radius. Using
    a subsurface reference removes the far-field compliance that a finite,
    clamped block lacks.
    """
    Es = E / (1.0 - nu * nu)

    def g(a):
        return a * a / R - hertz_axis_displacement(a, z, E, nu, R) - delta_rel

    a = brentq(g, 1e-9 * R, R)
    return 4.0 * Es * a ** 3 / (3.0 * R), a


def build_hertz(E=1000.0, nu=0.3, rho=1e-9, R=8.0, levels=(0.05, 0.07, 0.09), size=32.0,
                h=0.1, fine_extent=1.0, growth=1.3, gap=1e-3, ramp_transits=8.0,
                hold_transits=4.0, ref_depth=4.0) -> Scenario:
    """Quarter model of a rigid sphere pressed into a clamped linear-elastic block.

    The block spans [0, size]^3 with symmetry planes x = 0 and y = 0, and is
    graded from ``h`` near the contact. The sphere follows a staircase of
    indentation ``levels``, each reached by a smooth ramp and held so the
    block settles under mass damping.

    The clamped base stiffens the block relative to a half-space by roughly
    ``a / size`` in force; the default edge keeps that near 3% at these
    indentations.
    """
    xs = graded_coords(size, h, fine_extent, growth, center=0.0)
    zs = graded_coords(size, h, fine_extent, growth, center=size)
    model = box_mesh(xs, xs, zs)
    x = model.nodes
    top = np.nonzero(np.isclose(x[:, 2], size))[0]
    a_max = np.sqrt(R * max(levels))
    zone = top[np.hypot(x[top, 0], x[top, 1]) <= 3.0 * a_max]
    model.node_sets["contact_zone"] = zone
    axis = np.nonzero(np.isclose(x[:, 0], 0.0) & np.isclose(x[:, 1], 0.0))[0]
    model.node_sets["axis"] = axis[np.argsort(-x[axis, 2])]

    c_dil = np.sqrt(E * (1 - nu) / ((1 + nu) * (1 - 2 * nu)) / rho)
    transit = size / c_dil
    motion = Staircase(tuple(lv + gap for lv in levels), ramp_transits * transit,
                       hold_transits * transit)
    polar = min(np.pi / 2, 4.0 * a_max / R)
    cap = spherical_cap(R, polar, facet_size=2 * h, tip_size=h / 3, growth=1.1, closed=False)
    center = np.array([0.0, 0.0, size + gap + R])
    striker = Striker(cap, 1.0, center, motion=motion)
    striker.surface.nodes[:] += center
    # half-critical damping of the fundamental through-thickness mode
    damping = np.pi * c_dil / (2.0 * size)
    return Scenario(
        "hertz", model, {1: LinearElastic(E, nu, rho, small_strain=True)}, striker,
        "contact_zone", TimeLoopConfig(t_end=motion.duration, scheme="tw", output_every=50),
        clamped=("zmin",), supports={"xmin": "x", "ymin": "y"}, damping=damping,
        symmetry_factor=4.0,
        info={"E": E, "nu": nu, "R": R, "levels": list(levels), "gap": gap, "h": h,
              "hold_ends": [motion.hold_end(k) for k in range(len(levels))],
              "ref_depth": ref_depth, "elements_across_contact":
                  [float(np.sqrt(R * lv) / h) for lv in levels]}).validate()


# --------------------------------------------------------------------------
# Cylinder-on-beam indentation

def build_indentation(scale=1.0) -> Scenario:
    """Rigid half-cylinder pushed into a clamped Neo-Hookean beam.

    Beam 1500 × 300 × 250 mm (length x, width y, height z) meshed 39 × 10 × 9
    at ``scale = 1``. Cylinder radius 1000 mm and width 500 mm, axis along y,
    offset 250 mm along x from the beam centre and overhanging both beam
    sides by 100 mm, starting 10 mm above the top face. Its displacement follows a smooth step of
    110 mm over 0.05 s, with a fixed step of 1e-5 s.
    """
    if not scale > 0:
        raise ConfigError("scale must be positive")
    L, W, H = 1500.0, 300.0, 250.0
    r_i, w_i = 1000.0, 500.0
    a_x, a_z, a_y = 250.0, 100.0, 10.0
    E, nu, rho = 689.6, 0.32, 1e-9
    n = [max(2, int(round(c * scale))) for c in (39, 10, 9)]
    xs, ys, zs = (np.linspace(0, d, k + 1) for d, k in zip((L, W, H), n))
    model = box_mesh(xs, ys, zs)
    n_theta = max(8, int(round(140 * scale)))
    n_width = max(2, int(round(57 * scale)))
    if w_i < W + 2 * a_z - 1e-9:
        raise ConfigError("indenter narrower than the beam plus overhangs")
    axis_point = np.array([0.5 * L + a_x, 0.5 * W, H + a_y + r_i])
    surf = half_cylinder(r_i, w_i, n_theta, n_width, axis_point=axis_point)
    motion = SmoothStep(0.0, 0.05, 0.0, 110.0)
    striker = Striker(surf, 1.0, axis_point, motion=motion)
    mat = NeoHookean(E, nu, rho)
    scn = Scenario("indentation", model, {1: mat}, striker, "zmax",
                   TimeLoopConfig(t_end=0.05, dt=1e-5, scheme="tw", output_every=10),
                   clamped=("zmin",),
                   info={"scale": scale, "beam_cells": n, "indenter_facets": 2 * n_theta * n_width,
                         "indentation": 110.0 - a_y})
    solid = Solid(model, scn.materials)
    dt_stable = solid.critical_time_step()
    if dt_stable < scn.time.dt:
        raise StabilityError(f"stable increment {dt_stable:.4g} s of the beam mesh is below the "
                             f"fixed step {scn.time.dt:.4g} s")
    scn.info["dt_stable"] = dt_stable
    return scn.validate()


# --------------------------------------------------------------------------
# Plate impact

def elastic_interface(props: CohesiveProps) -> CohesiveProps:
    """Same penalty stiffness with strengths so high that damage never starts."""
    return replace(props, tauI=props.tauI * 1e4, tauII=props.tauII * 1e4,
                   GIc=props.GIc * 1e8, GIIc=props.GIIc * 1e8)


def impact_velocity(energy, mass, gap=0.0, g=GRAVITY):
    """Initial striker speed so that it arrives with kinetic ``energy`` after falling ``gap``."""
    v2 = 2.0 * energy / mass - 2.0 * g * gap
    if v2 <= 0:
        raise ConfigError("impact energy too small to cover the gravity fall")
    return float(np.sqrt(v2))


def _disc_nodes(x, z, centers, radius):
    on = np.isclose(x[:, 2], z)
    hit = np.zeros(len(x), bool)
    for c in centers:
        hit |= on & (np.hypot(x[:, 0] - c[0], x[:, 1] - c[1]) <= radius)
    return np.nonzero(hit)[0]


def build_impact(material="AS4/8552", layup=(0, 90, 90, 0), energy=5.0, mass=1e-5, radius=4.0,
                 preset="desk", ply_thickness=0.125, length=15.0, width=10.0, damage=True,
                 scheme="tw", t_end=None, gap=0.01, ply=None, interface=None) -> Scenario:
    """Drop-weight impact on a laminated plate.

    Parameters
    ----------
    material : preset name, used when ``ply``/``interface`` are not given.
    layup : ply angles in degrees, bottom to top.
    energy : impact energy (mJ); mass in t (0.01 kg = 1e-5); radius in mm.
    preset : "desk" (coarse, ~10^3 elements) or "fine" (in-plane size equal
        to the thinnest cluster near the centre).
    damage : False binds elastic plies and a non-damaging interface.

    The plate rests on the frame: bottom nodes outside the central cut-out
    are fixed vertically; four clamp discs fix the vertical displacement of
    top nodes near the corners. Gravity acts on plate and striker from the
    first step. The striker starts ``gap`` above the plate with a speed that
    includes the gravity fall over the gap.
    """
    ply = ply or PLY_PRESETS.get(material)
    interface = interface or INTERFACE_PRESETS.get(material)
    if ply is None or interface is None:
        raise ConfigError(f"unknown material '{material}' "
                          f"(presets: {', '.join(PLY_PRESETS)})")
    layup = tuple(float(a) for a in layup)
    if not layup:
        raise ConfigError("empty layup")
    if preset == "desk":
        fine, extent, growth = 0.5, 1.5, 1.3
    elif preset == "fine":
        fine, extent, growth = 2 * ply_thickness, 0.2 * min(length, width), 1.2
    else:
        raise ConfigError(f"unknown mesh preset '{preset}' (desk or fine)")
    xs = graded_coords(length, fine, extent, growth)
    ys = graded_coords(width, fine, extent, growth)
    model, layout = laminate_plate(xs, ys, layup, ply_thickness)
    thickness = len(layup) * ply_thickness
    z = model.nodes[:, 2]
    if abs(z.max() - z.min() - thickness) > 1e-6 * thickness:
        raise ConfigError(f"layup thickness {thickness} does not match the mesh "
                          f"thickness {z.max() - z.min()}")
    changes = sum(1 for a, b in zip(layup[:-1], layup[1:]) if a != b)
    n_cells = (len(xs) - 1) * (len(ys) - 1)
    n_elint = model.count(ElementKind.ELINT8)
    if n_elint != changes * n_cells:
        raise ConfigError(f"expected {changes} interface layers, found {n_elint / n_cells:g}")

    x = model.nodes
    cx, cy = 0.5 * length, 0.5 * width
    cut = (abs(x[:, 0] - cx) < 0.5 * 0.8333 * length) & (abs(x[:, 1] - cy) < 0.5 * 0.75 * width)
    model.node_sets["frame"] = np.nonzero(np.isclose(z, z.min()) & ~cut)[0]
    corners = [(cx + sx * 0.4 * length, cy + sy * 0.4 * width) for sx in (-1, 1) for sy in (-1, 1)]
    model.node_sets["clamps"] = _disc_nodes(x, z.max(), corners, 0.05 * length)

    if damage:
        bulk = IntralaminarDamage(ply, on_snapback="reduce")
        coh = interface
    else:
        bulk = TransverselyIsotropicElastic(ply)
        coh = elastic_interface(interface)
    rhobar = coh.rhobar if coh.rhobar is not None else ply.rho * ply_thickness / 2.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        penalty_ok = check_penalty(coh, ply.E22, thickness)
    for w in caught:
        warnings.warn(w.message, stacklevel=2)

    v0 = impact_velocity(energy, mass, gap)
    top = z.max()
    center = np.array([cx, cy, top + gap + radius])
    cap = spherical_cap(radius, np.pi / 3, facet_size=radius / 20, tip_size=radius / 80,
                        growth=1.1, closed=False)
    cap.nodes[:] += center
    striker = Striker(cap, mass, center, velocity=np.array([0.0, 0.0, -v0]),
                      gravity=np.array([0.0, 0.0, -GRAVITY]))
    if t_end is None:
        # the desk plate releases the striker after about 4.9e-4 s
        t_end = 5.5e-4
    scn = Scenario("impact", model, {1: bulk, 2: coh}, striker, "zmax",
                   TimeLoopConfig(t_end=t_end, scheme=scheme, output_every=20),
                   supports={"frame": "z", "clamps": "z"}, rhobar={2: rhobar},
                   gravity=np.array([0.0, 0.0, -GRAVITY]),
                   info={"material": material, "layup": list(layup), "energy": energy,
                         "mass": mass, "radius": radius, "v0": v0, "gap": gap,
                         "interface_layers": changes, "penalty_ok": penalty_ok,
                         "thickness": thickness, "preset": preset, "damage": damage,
                         "clusters": layout.__dict__ if hasattr(layout, "__dict__") else None})
    return scn.validate()


BUILDERS = {"hertz": build_hertz, "indentation": build_indentation, "impact": build_impact}

