import json

import meshio
import numpy as np
import pytest

from pdnimpact.config import load_scenario
from pdnimpact.mesh import ElementBlock, ElementKind, MeshModel
from pdnimpact.meshgen import box_mesh
from pdnimpact.output import CSV_COLUMNS, RunReport, read_csv, write_csv, write_vtk
from pdnimpact.runner import run_scenario

from test_config import CONFIGS


def _row(t, **kw):
    r = dict.fromkeys(CSV_COLUMNS, 0.0)
    r.update(t=t, n_contact=0, resets=0, **kw)
    return r


def test_report_rejects_non_increasing_time():
    rep = RunReport()
    rep.add_row(**_row(1.0))
    with pytest.raises(ValueError, match="strictly increasing"):
        rep.add_row(**_row(1.0))


def test_report_requires_every_column():
    with pytest.raises(KeyError):
        RunReport().add_row(t=0.0)


def test_csv_round_trip_is_exact(tmp_path):
    rows = [_row(0.1 * k, f_n=np.pi * k, ke=1.0 / 3.0) for k in range(1, 5)]
    write_csv(tmp_path / "a.csv", rows)
    text = (tmp_path / "a.csv").read_text().splitlines()
    assert text[0] == ",".join(CSV_COLUMNS)
    back = read_csv(tmp_path / "a.csv")
    np.testing.assert_array_equal(back["f_n"], [r["f_n"] for r in rows])
    np.testing.assert_array_equal(back["t"], [r["t"] for r in rows])


def test_vtk_is_readable_by_meshio(tmp_path):
    m = box_mesh([0, 1, 2], [0, 1], [0, 0.5, 1.0])
    u = np.arange(m.n_nodes * 3, dtype=float).reshape(-1, 3) / 7.0
    d = np.linspace(0, 1, m.n_elements)
    d[0] = np.nan
    path = tmp_path / "s.vtk"
    write_vtk(path, m, {"displacement": u, "mag": np.linalg.norm(u, axis=1)}, {"D1": d})
    got = meshio.read(path)
    np.testing.assert_array_equal(got.points, m.nodes)
    np.testing.assert_array_equal(got.cells_dict["hexahedron"], m.blocks[0].connectivity)
    np.testing.assert_array_equal(got.point_data["displacement"], u)
    cd = np.ravel(got.cell_data["D1"][0])
    assert cd[0] == -1.0
    np.testing.assert_array_equal(cd[1:], d[1:])


def test_vtk_legacy_header_and_counts(tmp_path):
    nodes = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    m = MeshModel(nodes, [ElementBlock(ElementKind.TET4, 1, np.array([[0, 1, 2, 3]])),
                          ElementBlock(ElementKind.TRI3, 0, np.array([[0, 2, 1]]))])
    path = tmp_path / "t.vtk"
    write_vtk(path, m, title="two\nlines")
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[1] == "two lines"
    assert lines[2:5] == ["ASCII", "DATASET UNSTRUCTURED_GRID", "POINTS 4 double"]
    i = lines.index("CELLS 2 9")
    assert lines[i + 1] == "4 0 1 2 3" and lines[i + 2] == "3 0 2 1"
    assert lines[i + 3:i + 6] == ["CELL_TYPES 2", "10", "5"]
    got = meshio.read(path)
    assert set(got.cells_dict) == {"tetra", "triangle"}


def test_run_writes_all_result_files(tmp_path):
    scn, _ = load_scenario(CONFIGS / "indentation_desk.cfg")
    rep = run_scenario(scn, tmp_path, steps=30, vtk_every=10)
    cols = read_csv(tmp_path / "timeseries.csv")
    assert tuple(cols) == CSV_COLUMNS
    assert np.all(np.diff(cols["t"]) > 0)
    for k in ("ke", "ie", "de"):
        assert np.all(np.isfinite(cols[k]))
    assert sorted(p.name for p in tmp_path.glob("*.vtk")) == \
        ["snapshot_0000010.vtk", "snapshot_0000020.vtk", "snapshot_0000030.vtk"]
    snap = meshio.read(tmp_path / "snapshot_0000030.vtk")
    assert snap.points.shape == (scn.model.n_nodes, 3)
    assert {"D1", "D2", "Dcoh"} <= set(snap.cell_data)
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["steps"] == 30 and s["dt"] == 1e-5
    assert s["mesh"]["elements"] == scn.model.n_elements
    assert "relative_residual" in s["energy"]
    assert {"assembly", "contact", "exchange", "io"} <= set(s["timings"])
    assert s["next_level_prediction"]["n_e"] == 8 * scn.model.n_elements
    log = (tmp_path / "contact_log.csv").read_text().splitlines()
    assert log[0].startswith("step,t,n_contact,n_released,resets")
    assert len(log) == 1 + len(rep.rows)
