import numpy as np
import pytest

from pdnimpact import kernels
from pdnimpact.fem import Solid
from pdnimpact.materials import NeoHookean, isotropic_stiffness
from pdnimpact.meshgen import box_mesh

needs_core = pytest.mark.skipif("cython" not in kernels.available_backends(),
                                reason="compiled core not built")


@pytest.fixture
def group_data(rng):
    m = box_mesh(np.linspace(0, 2, 6), np.linspace(0, 1, 4), np.linspace(0, 1, 3))
    m.nodes[:] += rng.uniform(-0.03, 0.03, m.nodes.shape)
    s = Solid(m, {1: NeoHookean(100.0, 0.3, 1e-9)})
    g = s.groups[0]
    u = rng.uniform(-0.02, 0.02, m.nodes.shape)
    return s, g, u


def _both(fn):
    prev = kernels.BACKEND
    try:
        kernels.use_backend("numpy")
        a = fn()
        kernels.use_backend("cython")
        b = fn()
    finally:
        kernels.use_backend(prev)
    return a, b


@needs_core
def test_deformation_gradient_matches(group_data):
    _, g, u = group_data
    a, b = _both(lambda: kernels.deformation_gradient(g.dNdX, g.conn, u))
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)


@needs_core
@pytest.mark.parametrize("small", [False, True])
def test_elastic_forces_match(group_data, small):
    _, g, u = group_data
    C = isotropic_stiffness(100.0, 0.25)[None]
    a, b = _both(lambda: kernels.elastic_forces(g.dNdX, g.wdetJ, g.conn, u, C, small))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14 * np.abs(a).max())


@needs_core
def test_neohookean_forces_match(group_data):
    _, g, u = group_data
    ne = len(g.conn)
    mu, kappa = np.full(ne, 30.0), np.full(ne, 80.0)
    (fa, ba), (fb, bb) = _both(lambda: kernels.neohookean_forces(g.dNdX, g.wdetJ, g.conn, u,
                                                                 mu, kappa))
    assert ba == bb == -1
    np.testing.assert_allclose(fa, fb, rtol=1e-12, atol=1e-14 * np.abs(fa).max())


@needs_core
def test_inverted_flag_matches(group_data):
    _, g, u = group_data
    u = u.copy()
    u[g.conn[3, 4:], 2] -= 2.0
    ne = len(g.conn)
    (_, ba), (_, bb) = _both(lambda: kernels.neohookean_forces(
        g.dNdX, g.wdetJ, g.conn, u, np.full(ne, 1.0), np.full(ne, 1.0)))
    assert ba == bb and ba >= 0


@needs_core
def test_gather_matches(group_data, rng):
    s, g, u = group_data
    fe = rng.standard_normal((len(g.conn), 8, 3))
    a, b = _both(lambda: s.assemble([fe]))
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    # reference: scatter-add in element order
    ref = np.zeros((s.n_nodes, 3))
    np.add.at(ref, g.conn.ravel(), fe.reshape(-1, 3))
    np.testing.assert_allclose(b, ref, rtol=1e-13, atol=1e-13)


@needs_core
def test_threads_bitwise(group_data):
    s, _, u = group_data
    prev_b, prev_n = kernels.BACKEND, kernels.get_num_threads()
    try:
        kernels.use_backend("cython")
        out = []
        for n in (1, 2, 3, 8):
            kernels.set_num_threads(n)
            out.append(s.internal_force(u))
    finally:
        kernels.use_backend(prev_b)
        kernels.set_num_threads(prev_n)
    for f in out[1:]:
        assert np.array_equal(f, out[0])


def test_backend_switch():
    prev = kernels.BACKEND
    try:
        assert kernels.use_backend("numpy") == "numpy"
        assert kernels.BACKEND == "numpy"
        assert "numpy" in kernels.available_backends()
    finally:
        kernels.use_backend(prev)


def test_thread_count_floor():
    prev = kernels.get_num_threads()
    kernels.set_num_threads(0)
    assert kernels.get_num_threads() == 1
    kernels.set_num_threads(prev)
