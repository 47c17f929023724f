from pathlib import Path

import numpy as np
import pytest

from pdnimpact.config import load_scenario, parse_material, read_config
from pdnimpact.errors import ConfigError
from pdnimpact.materials import CohesiveProps, IntralaminarDamage, LinearElastic, NeoHookean
from pdnimpact.mesh import save_mesh
from pdnimpact.meshgen import box_mesh

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

pytestmark = pytest.mark.filterwarnings("ignore:K_coh")


def write(tmp_path, text, name="case.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("name", ["hertz_desk.cfg", "indentation_desk.cfg", "impact_desk.cfg",
                                  "impact_elastic_desk.cfg"])
def test_shipped_configs_load(name):
    scn, out = load_scenario(CONFIGS / name)
    scn.validate()
    assert out.dir.startswith("out/")


def test_impact_configs_bind_expected_materials():
    scn, out = load_scenario(CONFIGS / "impact_desk.cfg")
    assert isinstance(scn.materials[1], IntralaminarDamage)
    assert scn.time.scheme == "tw"
    assert out.vtk_every == 5000
    el, _ = load_scenario(CONFIGS / "impact_elastic_desk.cfg")
    assert el.time.scheme == "cd"
    assert not isinstance(el.materials[1], IntralaminarDamage)
    # damage-free runs get an interface that cannot soften
    assert el.materials[2].GIc > 1e6 * scn.materials[2].GIc


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        read_config("/nonexistent/x.cfg")


def test_unknown_section_and_key(tmp_path):
    with pytest.raises(ConfigError, match="unknown section"):
        read_config(write(tmp_path, "[scenario]\ntype = hertz\n[extras]\na = 1\n"))
    with pytest.raises(ConfigError, match="unknown key"):
        read_config(write(tmp_path, "[scenario]\ntype = hertz\n[time]\nspeed = 3\n"))


def test_missing_scenario_section(tmp_path):
    with pytest.raises(ConfigError, match="scenario"):
        read_config(write(tmp_path, "[time]\nt_end = 1\n"))


def test_material_section_needs_integer_id(tmp_path):
    with pytest.raises(ConfigError, match="integer id"):
        read_config(write(tmp_path, "[scenario]\ntype = hertz\n[material:steel]\ntype = linear\n"))


def test_unknown_scenario_type(tmp_path):
    with pytest.raises(ConfigError, match="unknown scenario type"):
        load_scenario(write(tmp_path, "[scenario]\ntype = drop\n"))


def test_parse_materials():
    m = parse_material({"type": "linear", "e": "210000", "nu": "0.3", "rho": "7.85e-9"})
    assert isinstance(m, LinearElastic) and m.E == 210000.0
    m = parse_material({"type": "neohookean", "e": "10", "nu": "0.45", "rho": "1e-9"})
    assert isinstance(m, NeoHookean)
    c = parse_material({"type": "cohesive", "preset": "AS4/8552", "gic": "0.5"})
    assert isinstance(c, CohesiveProps) and c.GIc == 0.5
    with pytest.raises(ConfigError, match="missing key"):
        parse_material({"type": "linear", "e": "1"})
    with pytest.raises(ConfigError, match="unknown material type"):
        parse_material({"type": "plastic"})
    with pytest.raises(ConfigError, match="unknown ply preset"):
        parse_material({"type": "orthotropic", "preset": "oak"})
    with pytest.raises(ConfigError):
        parse_material({"type": "linear", "e": "abc", "nu": "0.3", "rho": "1"})


def test_hertz_rejects_nonlinear_material(tmp_path):
    text = "[scenario]\ntype = hertz\n[material:1]\ntype = neohookean\ne = 1\nnu = 0.3\nrho = 1\n"
    with pytest.raises(ConfigError, match="linear"):
        load_scenario(write(tmp_path, text))


def test_time_section_overrides(tmp_path):
    text = ("[scenario]\ntype = indentation\n[mesh]\nscale = 0.25\n"
            "[time]\nt_end = 0.01\nscheme = cd\noutput_every = 7\nmax_steps = 12\n")
    scn, _ = load_scenario(write(tmp_path, text))
    assert scn.time.t_end == 0.01 and scn.time.scheme == "cd"
    assert scn.time.output_every == 7 and scn.time.max_steps == 12
    with pytest.raises(ConfigError):
        load_scenario(write(tmp_path, text.replace("cd", "rk")))


def test_bad_support_spec(tmp_path):
    text = "[scenario]\ntype = indentation\n[mesh]\nscale = 0.25\n[bc]\nsupports = zmin\n"
    with pytest.raises(ConfigError, match="components"):
        load_scenario(write(tmp_path, text))
    text = text.replace("supports = zmin", "clamped = nowhere")
    with pytest.raises(ConfigError, match="unknown node set"):
        load_scenario(write(tmp_path, text))


def _custom(tmp_path, extra=""):
    m = box_mesh(np.linspace(0, 4, 5), np.linspace(0, 4, 5), np.linspace(0, 1, 2))
    save_mesh(m, tmp_path / "block.mesh")
    return write(tmp_path, f"""[scenario]
type = custom
[mesh]
file = block.mesh
[material:1]
type = linear
e = 1000
nu = 0.3
rho = 1e-9
[bc]
clamped = zmin
slave = zmax
[ic]
radius = 2
mass = 1e-6
gap = 0.01
velocity = 500
[time]
{extra}
""")


def test_custom_scenario_from_mesh_file(tmp_path):
    scn, _ = load_scenario(_custom(tmp_path, "t_end = 1e-5"))
    assert scn.name == "custom"
    assert scn.striker.velocity[2] == -500.0
    np.testing.assert_allclose(scn.striker.center, [2.0, 2.0, 1.0 + 0.01 + 2.0])
    assert scn.fixed_mask()[scn.model.node_sets["zmin"]].all()


def test_custom_scenario_needs_end_time(tmp_path):
    with pytest.raises(ConfigError, match="t_end"):
        load_scenario(_custom(tmp_path))


def test_ndivi_in_mesh_section(tmp_path):
    p = _custom(tmp_path, "t_end = 1e-5")
    text = p.read_text().replace("file = block.mesh", "file = block.mesh\nndivi = 1")
    scn, _ = load_scenario(write(tmp_path, text, "fine.cfg"))
    assert scn.model.n_elements == 16 * 8 and scn.ndivi == 1
