"""Result files: CSV time series, contact log, VTK legacy snapshots and the run summary."""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mesh import ElementKind, MeshModel

CSV_COLUMNS = ("t", "f_n", "f_t1", "f_t2", "d_striker", "ke", "ie", "de", "n_contact", "resets")

# VTK cell type ids
_VTK_TYPES = {
    ElementKind.HEX8: 12,
    ElementKind.TET4: 10,
    ElementKind.ELINT8: 12,  # zero-thickness hexahedron
    ElementKind.QUAD4: 9,
    ElementKind.TRI3: 5,
}


@dataclass
class RunReport:
    """Rows of the time-series table plus timings and summary data."""

    rows: list = field(default_factory=list)
    contact_log: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    threads: int = 1

    def add_row(self, **values):
        missing = set(CSV_COLUMNS) - set(values)
        if missing:
            raise KeyError(f"missing columns {sorted(missing)}")
        if self.rows and values["t"] <= self.rows[-1]["t"]:
            raise ValueError("time column must be strictly increasing")
        self.rows.append({k: values[k] for k in CSV_COLUMNS})

    def column(self, name):
        return np.array([r[name] for r in self.rows])


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, rows):
    """Write time-series rows; floats use repr so reruns compare bitwise."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])


def read_csv(path):
    """Columns of a time-series file as float arrays."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        data = np.array([[float(x) for x in row] for row in rd]).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def write_contact_log(path, entries):
    """One line per output step: step, t, constrained nodes, releases and resets."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "t", "n_contact", "n_released", "resets", "min_gap", "min_rn"))
        for e in entries:
            w.writerow([_fmt(v) for v in e])


def write_vtk(path, model: MeshModel, point_data=None, cell_data=None, title="pdnimpact"):
    """Unstructured grid in VTK legacy ASCII format.

    ``point_data`` maps names to (n_nodes,) scalars or (n_nodes, 3)
    vectors; ``cell_data`` maps names to (n_elements,) scalars. Undefined
    cell values (NaN) are written as -1.
    """
    x = model.nodes
    conns = [(b.kind, b.connectivity) for b in model.blocks]
    n_cells = sum(len(c) for _, c in conns)
    size = sum(len(c) * (c.shape[1] + 1) for _, c in conns)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(x)} double"]
    lines += [f"{p[0]!r} {p[1]!r} {p[2]!r}" for p in x.tolist()]
    lines.append(f"CELLS {n_cells} {size}")
    for _, c in conns:
        k = c.shape[1]
        lines += [f"{k} " + " ".join(map(str, row)) for row in c.tolist()]
    lines.append(f"CELL_TYPES {n_cells}")
    for kind, c in conns:
        lines += [str(_VTK_TYPES[kind])] * len(c)
    if point_data:
        lines.append(f"POINT_DATA {len(x)}")
        for name, v in point_data.items():
            v = np.asarray(v, float)
            if v.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines += [f"{a!r} {b!r} {c!r}" for a, b, c in v.tolist()]
            else:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [repr(a) for a in v.tolist()]
    if cell_data:
        lines.append(f"CELL_DATA {n_cells}")
        for name, v in cell_data.items():
            v = np.where(np.isfinite(v), np.asarray(v, float), -1.0)
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [repr(a) for a in v.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_summary(path, summary: dict):
    Path(path).write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
