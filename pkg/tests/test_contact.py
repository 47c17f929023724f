import numpy as np
import pytest

from oracles import active_set_oracle, global_stiffness
from pdnimpact.contact import (ContactLayer, MasterSurface, NodeStatus, Projections,
                               apply_contact_constraints, contact_reactions, detect_contact,
                               release_nodes, tangent_frames)
from pdnimpact.coupling import DeformableInstance, RigidInstance, run_coupled
from pdnimpact.dynamics import RigidBodyState, TimeLoopConfig
from pdnimpact.errors import AmbiguousProjectionError, LivelockError
from pdnimpact.fem import Solid
from pdnimpact.materials import LinearElastic
from pdnimpact.meshgen import box_mesh, spherical_cap


def plane(half=10.0, z=0.0, strict=False):
    V = np.array([[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]])
    return MasterSurface(V, [[0, 1, 2], [0, 2, 3]], strict=strict)


def test_node_above_plane_not_projected():
    proj = detect_contact([[0.3, 0.2, 0.01]], [7], plane(), margin=1.0)
    assert len(proj) == 0


def test_node_below_plane_projection():
    proj = detect_contact([[0.3, -0.2, -0.1]], [7], plane(), margin=1.0)
    assert proj.nodes.tolist() == [7]
    np.testing.assert_allclose(proj.points[0], [0.3, -0.2, 0.0], atol=1e-15)
    assert proj.gaps[0] == pytest.approx(-0.1, abs=1e-15)
    np.testing.assert_allclose(proj.normals[0], [0, 0, 1], atol=1e-15)


def test_frames_are_orthonormal(rng):
    n = rng.standard_normal((50, 3))
    n /= np.linalg.norm(n, axis=1)[:, None]
    R = tangent_frames(n)
    np.testing.assert_allclose(np.einsum("kij,klj->kil", R, R), np.broadcast_to(np.eye(3), R.shape),
                               atol=1e-14)
    np.testing.assert_allclose(R[:, 0], n)


def test_margin_screens_far_nodes():
    proj = detect_contact([[0, 0, -0.5]], [0], plane(), margin=0.2)
    assert len(proj) == 0
    proj = detect_contact([[0, 0, -0.5]], [0], plane(), margin=1.0)
    assert len(proj) == 1


def test_sphere_pole_projection_is_radial():
    R = 8.0
    cap = spherical_cap(R, tip_size=0.002, facet_size=0.5, growth=1.3, closed=False)
    tri = cap.blocks[0].connectivity
    master = MasterSurface(cap.nodes, tri)
    p = np.array([[0.0, 0.0, -7.9]])
    proj = detect_contact(p, [0], master, margin=1.0)
    assert proj.gaps[0] == pytest.approx(-0.1, abs=1e-6)
    # the pole facets tilt by about h/(2R), which moves the foot point sideways by 0.1*h/(2R)
    np.testing.assert_allclose(proj.points[0], [0, 0, -8.0], atol=0.1 * 0.002 / 8)


def test_sphere_projection_error_scales_with_facet_size(rng):
    R = 8.0
    d = rng.standard_normal((20, 3))
    d[:, 2] = -np.abs(d[:, 2]) - 1.5
    d /= np.linalg.norm(d, axis=1)[:, None]
    p = 7.9 * d
    worst = []
    for h in (0.4, 0.2, 0.1):
        cap = spherical_cap(R, facet_size=h, closed=False)
        master = MasterSurface(cap.nodes, cap.blocks[0].connectivity)
        proj = detect_contact(p, np.arange(len(p)), master, margin=1.0)
        assert len(proj) == len(p)
        err = np.abs(proj.gaps + 0.1)
        # the sagitta of the largest facet bounds the error
        assert err.max() <= master.radius ** 2 / (2 * R) * 1.05
        # projection stays radial up to the same order
        radial = np.einsum("ij,ij->i", master.normals[proj.facets], d)
        assert np.all(radial > 1 - (master.radius / R) ** 2)
        worst.append(err.max())
    assert worst[0] / worst[2] > 8.0


def test_constraint_puts_node_on_surface():
    x = np.array([[0.2, 0.1, -0.05], [1.0, 1.0, 0.3]])
    d = x - np.array([[0.2, 0.1, 0.5], [1.0, 1.0, 0.3]])
    x_ref = x - d
    v = np.array([[0.0, 0.0, -3.0], [0.0, 0.0, -3.0]])
    proj = detect_contact(x, [0, 1], plane(), margin=1.0)
    apply_contact_constraints(proj, x, d, v, np.zeros(3))
    xn = x_ref + d
    assert abs(xn[0, 2]) <= 1e-10
    np.testing.assert_array_equal(xn[1], x[1])
    assert v[0, 2] == 0.0


def test_constraint_keeps_tangential_motion():
    x = np.array([[0.2, 0.1, -0.05]])
    d = np.array([[0.013, -0.021, -0.05]])
    x_ref = x - d
    v = np.array([[1.7, -0.4, -2.0]])
    proj = detect_contact(x, [0], plane(), margin=1.0)
    dv = apply_contact_constraints(proj, x, d, v, np.array([0.0, 0.0, 0.5]))
    np.testing.assert_allclose(v[0, :2], [1.7, -0.4], rtol=0, atol=1e-12)
    np.testing.assert_allclose((x_ref + d)[0, :2], x[0, :2], rtol=0, atol=1e-12)
    assert v[0, 2] == pytest.approx(0.5)
    np.testing.assert_allclose(dv[0], [0, 0, 2.5], atol=1e-12)


def test_constraint_on_tilted_plane_keeps_tangential_velocity():
    c, s = np.cos(0.3), np.sin(0.3)
    rot = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    V = np.array([[-5, -5, 0], [5, -5, 0], [5, 5, 0], [-5, 5, 0.0]]) @ rot.T
    master = MasterSurface(V, [[0, 1, 2], [0, 2, 3]])
    n = rot[:, 2]
    x = np.array([[0.3, 0.2, 0.0]]) @ rot.T - 0.07 * n
    d = np.zeros((1, 3))
    v = np.array([[0.4, 1.1, -0.8]])
    vt = v[0] - (v[0] @ n) * n
    proj = detect_contact(x, [0], master, margin=1.0)
    apply_contact_constraints(proj, x.copy(), d, v, np.zeros(3))
    np.testing.assert_allclose(v[0], vt, atol=1e-12)
    assert abs((x[0] + d[0]) @ n) <= 1e-12


def test_reactions_empty_without_projections():
    r = contact_reactions(Projections.empty(), np.ones(3), np.zeros((3, 3)), np.zeros(3))
    assert r.shape == (0, 3)
    bad, reset = release_nodes(Projections.empty(), r)
    assert not reset and bad.shape == (0,)


def _proj(nodes):
    k = len(nodes)
    n = np.tile([0.0, 0.0, 1.0], (k, 1))
    return Projections(np.asarray(nodes), np.zeros(k, np.int64), np.zeros((k, 3)),
                       np.zeros(k), tangent_frames(n))


def test_reaction_balances_free_force():
    proj = _proj([1])
    m = np.array([1.0, 2.0])
    f_free = np.array([[0, 0, 0], [0.5, 0.0, -4.0]])
    r = contact_reactions(proj, m, f_free, np.zeros(3))
    np.testing.assert_allclose(r, [[0, 0, 4.0]])
    # a master accelerating upward needs a larger push
    r = contact_reactions(proj, m, f_free, np.array([0, 0, 1.0]))
    np.testing.assert_allclose(r, [[0, 0, 6.0]])


def test_compressive_reactions_are_kept():
    bad, reset = release_nodes(_proj([0, 1]), np.array([[0, 0, 2.0], [0, 0, 0.5]]))
    assert not reset and not bad.any()


def test_tensile_node_is_released():
    bad, reset = release_nodes(_proj([0, 1, 2]), np.array([[0, 0, 2.0], [0, 0, -1.0], [0, 0, 3.0]]))
    assert reset
    assert bad.tolist() == [False, True, False]


def test_layer_excludes_released_nodes_for_the_step():
    layer = ContactLayer([0, 1, 2], 3)
    layer.begin_step()
    layer.release(np.array([1]), limit=4)
    assert layer.filter(_proj([0, 1, 2])).nodes.tolist() == [0, 2]
    layer.begin_step()
    assert layer.status[1] == NodeStatus.FREE
    assert layer.filter(_proj([0, 1, 2])).nodes.tolist() == [0, 1, 2]


def test_release_loop_limit():
    layer = ContactLayer([0, 1, 2], 3)
    layer.release(np.array([0, 1]), limit=3)
    with pytest.raises(LivelockError):
        layer.release(np.array([2]), limit=2)


def test_opposed_ties_are_reported():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    tri = [[0, 1, 2], [0, 2, 1]]
    with pytest.warns(UserWarning, match="equidistant"):
        fac, _, _, _ = MasterSurface(V, tri).project(np.array([[0.2, 0.2, 0.3]]))
    assert fac[0] == 0
    with pytest.raises(AmbiguousProjectionError):
        MasterSurface(V, tri, strict=True).project(np.array([[0.2, 0.2, 0.3]]))


# ---------------------------------------------------------------------------
# static problems solved through the coupled loop

def _settle(model, fixed, loads, t_end, damping, rho=1e-3):
    E, nu = 1000.0, 0.3
    bot = np.nonzero(model.nodes[:, 2] == 0.0)[0]
    solid = Solid(model, {1: LinearElastic(E, nu, rho, small_strain=True)})
    defo = DeformableInstance(solid, bot, fixed, loads=loads, damping=damping)
    body = RigidBodyState(1.0, np.zeros(3), np.zeros(3), fixed=np.ones(3, bool))
    run_coupled(RigidInstance(body, plane()), defo,
                TimeLoopConfig(t_end=t_end, dt_safety=0.5, output_every=10 ** 9))
    return defo, bot


def test_single_element_compression_reaction_equals_load():
    m = box_mesh([0, 1.0], [0, 1.0], [0, 1.0])
    loads = np.zeros((m.n_nodes, 3))
    loads[m.nodes[:, 2] == 1.0, 2] = -0.25
    fixed = np.zeros((m.n_nodes, 3), bool)
    fixed[0, :2] = True
    fixed[m.nodes[:, 1] == 0.0, 1] = True
    defo, bot = _settle(m, fixed, loads, 0.3, 300.0)
    total = defo.layer.reactions[bot, 2].sum()
    assert total == pytest.approx(1.0, rel=0.01)


def test_corner_lift_matches_exhaustive_active_set():
    m = box_mesh(np.linspace(0, 2, 3), np.linspace(0, 1, 2), np.linspace(0, 1, 2))
    x = m.nodes
    fixed = np.zeros((len(x), 3), bool)
    bot = np.nonzero(x[:, 2] == 0)[0]
    fixed[bot, :2] = True
    loads = np.zeros((len(x), 3))
    top = x[:, 2] == 1
    loads[top & (x[:, 0] == 2), 2] = -1.0
    loads[top & (x[:, 0] == 1), 2] = -1.0
    loads[top & (x[:, 0] == 0), 2] = 0.3

    K = global_stiffness(x, m.blocks[0].connectivity, 1000.0, 0.3)
    valid = active_set_oracle(K, loads.ravel(), fixed, list(bot))
    assert len(valid) == 1
    expected, R, _ = valid[0]

    defo, bot = _settle(m, fixed, loads, 0.5, 300.0)
    active = bot[defo.layer.status[bot] == NodeStatus.CONSTRAINED]
    assert sorted(active.tolist()) == expected
    assert defo.layer.resets_total > 0
    np.testing.assert_allclose(defo.layer.reactions[active, 2], R[3 * active + 2], rtol=0.01)
    assert np.all(defo.layer.reactions[active, 2] > 0)
    lifted = np.setdiff1d(bot, active)
    assert np.all(defo.state.d[lifted, 2] > 0)
