import numpy as np
import pytest

from pdnimpact.meshgen import box_mesh


@pytest.fixture
def unit_cube():
    return box_mesh([0.0, 1.0], [0.0, 1.0], [0.0, 1.0])


def stacked_text(elint=True):
    """Two unit hexes stacked in z, optionally with an interface element between them."""
    lines = ["MESH v1", "NODES 16"]
    quad = [(0, 0), (1, 0), (1, 1), (0, 1)]
    nid = 1
    for z in (0.0, 1.0, 1.0, 2.0):
        for x, y in quad:
            lines.append(f"{nid} {x} {y} {z}")
            nid += 1
    lines += ["BLOCK HEX8 1 2", "1 1 2 3 4 5 6 7 8", "2 9 10 11 12 13 14 15 16"]
    if elint:
        lines += ["BLOCK ELINT8 2 1", "3 5 6 7 8 9 10 11 12", "FIELD stacking 1", "3 0 0 1"]
    return "\n".join(lines) + "\n"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
