"""Scenario configuration files.

INI-style sections read with :mod:`configparser`::

    [scenario]     type = hertz | indentation | impact | custom
    [mesh]         generator parameters, or file = path for custom
    [material:ID]  type = linear | neohookean | orthotropic | intralaminar | cohesive
    [layup]        angles = 0, 90, 90, 0 ; ply_thickness = 0.125
    [bc]           clamped = set, ... ; supports = set:z, set:xy ; slave = set
    [ic]           striker and initial-condition values
    [time]         t_end, dt, dt_safety, scheme, phi, output_every, dt_recompute_every
    [output]       dir, vtk_every

The full grammar is documented in the README. Unknown sections or keys
raise :class:`~pdnimpact.errors.ConfigError`.
"""

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .dynamics import TimeLoopConfig
from .errors import ConfigError
from .materials import (INTERFACE_PRESETS, PLY_PRESETS, CohesiveProps, IntralaminarDamage,
                        LinearElastic, NeoHookean, TransverseIsotropicProps,
                        TransverselyIsotropicElastic)
from .mesh import load_mesh
from .meshgen import spherical_cap
from .scenarios import (Scenario, Striker, build_hertz, build_impact, build_indentation,
                        elastic_interface, impact_velocity)

SECTIONS = {"scenario", "mesh", "layup", "bc", "ic", "time", "output"}

_KEYS = {
    "scenario": {"type", "name"},
    "mesh": {"file", "scale", "preset", "length", "width", "size", "h", "growth",
             "fine_extent", "ndivi"},
    "layup": {"angles", "ply_thickness"},
    "bc": {"clamped", "supports", "slave"},
    "ic": {"energy", "mass", "radius", "gap", "gravity", "velocity", "center", "polar",
           "facet_size", "levels", "damping"},
    "time": {"t_end", "dt", "dt_safety", "scheme", "phi", "output_every",
             "dt_recompute_every", "max_steps"},
    "output": {"dir", "vtk_every"},
}


@dataclass
class OutputSpec:
    dir: str = "out"
    vtk_every: int = 0


def _floats(text, n=None, what="value"):
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot read numbers from {what} = '{text}'") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


def _names(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"not a boolean: '{text}'")


def parse_material(sec):
    """Material object from one ``[material:ID]`` section."""
    vals = {k: v for k, v in sec.items()}
    kind = vals.pop("type", "").strip().lower()
    preset = vals.pop("preset", None)
    try:
        if kind in ("linear", "neohookean"):
            small = _bool(vals.pop("small_strain", "no"))
            E, nu, rho = (float(vals.pop(k)) for k in ("e", "nu", "rho"))
            if vals:
                raise ConfigError(f"unknown material keys {sorted(vals)}")
            if kind == "linear":
                return LinearElastic(E, nu, rho, small_strain=small)
            return NeoHookean(E, nu, rho)
        if kind in ("orthotropic", "intralaminar"):
            on_sb = vals.pop("on_snapback", "raise")
            small = _bool(vals.pop("small_strain", "no"))
            props = _ply_props(preset, vals)
            if kind == "orthotropic":
                return TransverselyIsotropicElastic(props, small_strain=small)
            return IntralaminarDamage(props, on_snapback=on_sb, small_strain=small)
        if kind == "cohesive":
            base = INTERFACE_PRESETS.get(preset) if preset else None
            if preset and base is None:
                raise ConfigError(f"unknown interface preset '{preset}'")
            over = {_canon(k, CohesiveProps): float(v) for k, v in vals.items()}
            if base is None:
                return CohesiveProps.from_mapping(over)
            return replace(base, **over)
    except KeyError as exc:
        raise ConfigError(f"material section is missing key {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"material section: {exc}") from None
    raise ConfigError(f"unknown material type '{kind}'")


def _canon(key, cls):
    """configparser lower-cases keys; map them back to field names."""
    names = {f.name.lower(): f.name for f in fields(cls)}
    if key not in names:
        raise ConfigError(f"unknown key '{key}' for {cls.__name__}")
    return names[key]


def _ply_props(preset, vals):
    base = PLY_PRESETS.get(preset) if preset else None
    if preset and base is None:
        raise ConfigError(f"unknown ply preset '{preset}'")
    over = {_canon(k, TransverseIsotropicProps): float(v) for k, v in vals.items()}
    if base is None:
        return TransverseIsotropicProps.from_mapping(over)
    return base.with_(**over)


def read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cp.read(p)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for name in cp.sections():
        base = name.split(":", 1)[0]
        if name.startswith("material:"):
            try:
                int(name.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"material section '{name}' needs an integer id") from None
            continue
        if base not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        bad = set(cp[name]) - _KEYS[base]
        if bad:
            raise ConfigError(f"unknown key(s) {sorted(bad)} in [{name}]")
    if not cp.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    return cp


def load_scenario(path):
    """Scenario and output spec described by a config file."""
    try:
        return _load(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _load(path):
    cp = read_config(path)
    base_dir = Path(path).resolve().parent
    kind = cp["scenario"].get("type", "").strip().lower()
    mesh = cp["mesh"] if cp.has_section("mesh") else {}
    ic = cp["ic"] if cp.has_section("ic") else {}
    layup = cp["layup"] if cp.has_section("layup") else {}
    mats = {int(n.split(":")[1]): cp[n] for n in cp.sections() if n.startswith("material:")}

    if kind == "hertz":
        kw = {}
        for key in ("size", "h", "growth", "fine_extent"):
            if key in mesh:
                kw[key] = float(mesh[key])
        if "radius" in ic:
            kw["R"] = float(ic["radius"])
        if "levels" in ic:
            kw["levels"] = tuple(_floats(ic["levels"], what="levels"))
        sec = mats.get(1)
        if sec is not None:
            mat = parse_material(sec)
            if not isinstance(mat, LinearElastic):
                raise ConfigError("hertz needs a linear material")
            kw.update(E=mat.E, nu=mat.nu, rho=mat.rho)
        scn = build_hertz(**kw)
    elif kind == "indentation":
        scn = build_indentation(float(mesh.get("scale", 1.0)))
        if 1 in mats:
            scn.materials[1] = parse_material(mats[1])
    elif kind == "impact":
        kw = {}
        ply = parse_material(mats[1]) if 1 in mats else None
        coh = parse_material(mats[2]) if 2 in mats else None
        if ply is not None:
            kw["ply"] = getattr(ply, "props", None)
            kw["damage"] = isinstance(ply, IntralaminarDamage)
            if kw["ply"] is None:
                raise ConfigError("impact plies need an orthotropic or intralaminar material")
            kw["material"] = mats[1].get("preset", "user")
        if coh is not None:
            if not isinstance(coh, CohesiveProps):
                raise ConfigError("material 2 of an impact scenario must be cohesive")
            kw["interface"] = coh
        if "angles" in layup:
            kw["layup"] = tuple(_floats(layup["angles"], what="angles"))
        if "ply_thickness" in layup:
            kw["ply_thickness"] = float(layup["ply_thickness"])
        for key, name in (("preset", "preset"),):
            if key in mesh:
                kw[name] = mesh[key]
        for key in ("length", "width"):
            if key in mesh:
                kw[key] = float(mesh[key])
        for key in ("energy", "mass", "radius", "gap"):
            if key in ic:
                kw[key] = float(ic[key])
        if cp.has_section("time") and "scheme" in cp["time"]:
            kw["scheme"] = cp["time"]["scheme"]
        if cp.has_section("time") and "t_end" in cp["time"]:
            kw["t_end"] = float(cp["time"]["t_end"])
        scn = build_impact(**kw)
        if kw.get("damage") is False and coh is not None:
            scn.materials[2] = elastic_interface(coh)
    elif kind == "custom":
        scn = _custom(cp, base_dir, mats)
    else:
        raise ConfigError(f"unknown scenario type '{kind}' "
                          "(hertz, indentation, impact or custom)")

    scn = _apply_common(cp, scn)
    out = OutputSpec()
    if cp.has_section("output"):
        o = cp["output"]
        out = OutputSpec(o.get("dir", "out"), int(o.get("vtk_every", 0)))
    ndivi = int(mesh.get("ndivi", 0)) if mesh else 0
    if ndivi:
        scn = scn.refined(ndivi)
    return scn.validate(), out


def _custom(cp, base_dir, mats):
    """Mesh from file, materials by id, and a spherical striker from [ic]."""
    mesh = cp["mesh"]
    if "file" not in mesh:
        raise ConfigError("custom scenario needs [mesh] file")
    f = Path(mesh["file"])
    model = load_mesh(f if f.is_absolute() else base_dir / f)
    materials = {k: parse_material(v) for k, v in mats.items()}
    ic = cp["ic"] if cp.has_section("ic") else {}
    bc = cp["bc"] if cp.has_section("bc") else {}
    R = float(ic.get("radius", 1.0))
    mass = float(ic.get("mass", 1.0))
    gap = float(ic.get("gap", 0.0))
    x = model.nodes
    top = float(x[:, 2].max())
    if "center" in ic:
        center = np.array(_floats(ic["center"], 3, "center"))
    else:
        lo, hi = x.min(axis=0), x.max(axis=0)
        center = np.array([0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), top + gap + R])
    polar = float(ic.get("polar", np.pi / 3))
    cap = spherical_cap(R, polar, facet_size=float(ic.get("facet_size", R / 20)),
                        closed=False, center=center)
    g = float(ic.get("gravity", 0.0))
    if "velocity" in ic:
        v0 = float(ic["velocity"])
    elif "energy" in ic:
        v0 = impact_velocity(float(ic["energy"]), mass, gap, g if g else 0.0)
    else:
        v0 = 0.0
    striker = Striker(cap, mass, center, velocity=np.array([0.0, 0.0, -v0]),
                      gravity=np.array([0.0, 0.0, -g]))
    slave = bc.get("slave", "zmax").strip()
    if slave not in model.node_sets:
        raise ConfigError(f"slave node set '{slave}' not in mesh")
    t = cp["time"] if cp.has_section("time") else {}
    if "t_end" not in t:
        raise ConfigError("[time] t_end is required")
    return Scenario("custom", model, materials, striker, slave,
                    TimeLoopConfig(t_end=float(t["t_end"])),
                    damping=float(ic.get("damping", 0.0)))


def _apply_common(cp, scn: Scenario) -> Scenario:
    if cp.has_section("bc"):
        bc = cp["bc"]
        if "clamped" in bc:
            scn.clamped = tuple(_names(bc["clamped"]))
        if "supports" in bc:
            sup = {}
            for item in _names(bc["supports"]):
                name, _, comps = item.partition(":")
                if not comps:
                    raise ConfigError(f"support '{item}' needs components, e.g. {item}:z")
                sup[name.strip()] = comps.strip()
            scn.supports = sup
        if "slave" in bc:
            scn.slave_set = bc["slave"].strip()
    if cp.has_section("ic") and "damping" in cp["ic"] and scn.name != "custom":
        scn.damping = float(cp["ic"]["damping"])
    if cp.has_section("time"):
        t = cp["time"]
        tc = scn.time
        try:
            scn.time = TimeLoopConfig(
                t_end=float(t.get("t_end", tc.t_end)),
                dt=float(t["dt"]) if "dt" in t else tc.dt,
                dt_safety=float(t.get("dt_safety", tc.dt_safety)),
                scheme=t.get("scheme", tc.scheme),
                phi=float(t.get("phi", tc.phi)),
                output_every=int(t.get("output_every", tc.output_every)),
                dt_recompute_every=int(t.get("dt_recompute_every", tc.dt_recompute_every)),
                max_steps=int(t["max_steps"]) if "max_steps" in t else tc.max_steps)
        except ValueError as exc:
            raise ConfigError(f"[time]: {exc}") from None
    return scn

