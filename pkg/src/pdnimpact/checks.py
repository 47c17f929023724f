"""Randomized property checks for mesh multiplication."""

from dataclasses import dataclass, field

import numpy as np

from .mesh import ElementKind, bulk_volume
from .meshgen import laminate_plate
from .refine import divide_with_report


@dataclass
class CaseResult:
    case: int
    n_interfaces: int
    ndivi: int
    base: tuple
    levels: list
    volume_error: float
    ok: bool
    messages: list = field(default_factory=list)


def random_hybrid_mesh(rng, n_interfaces=None):
    """Small laminated box with 1-4 interface layers and jittered grid lines."""
    if n_interfaces is None:
        n_interfaces = int(rng.integers(1, 5))
    angles = []
    pool = (0.0, 45.0, 90.0, -45.0)
    a = float(rng.choice(pool))
    for _ in range(n_interfaces + 1):
        angles += [a] * int(rng.integers(1, 3))
        a = float(rng.choice([p for p in pool if p != a]))

    def grid(n, length):
        w = rng.uniform(0.5, 1.5, n)
        return np.r_[0.0, np.cumsum(w)] * length / w.sum()

    xs = grid(int(rng.integers(1, 4)), rng.uniform(0.5, 2.0))
    ys = grid(int(rng.integers(1, 4)), rng.uniform(0.5, 2.0))
    ply = float(rng.uniform(0.05, 0.3))
    model, layout = laminate_plate(xs, ys, angles, ply, layer_thickness=ply)
    # in-plane jitter of interior columns keeps interface facets coincident
    x = model.nodes
    inner = ((x[:, 0] > xs[0]) & (x[:, 0] < xs[-1]) & (x[:, 1] > ys[0]) & (x[:, 1] < ys[-1]))
    key = np.round(x[:, :2] * 1e9).astype(np.int64)
    _, col = np.unique(key, axis=0, return_inverse=True)
    shift = rng.uniform(-0.15, 0.15, (col.max() + 1, 2)) * min(np.diff(xs).min(),
                                                               np.diff(ys).min())
    x[inner, :2] += shift[col.ravel()[inner]]
    return model, layout


def _interface_thickness(model):
    worst = 0.0
    for b in model.blocks:
        if b.kind == ElementKind.ELINT8:
            xe = model.nodes[b.connectivity]
            worst = max(worst, float(np.abs(xe[:, :4] - xe[:, 4:]).max()))
    return worst


def refinement_suite(seed=0, n_cases=50, vol_tol=1e-12):
    """Run ``n_cases`` random meshes through 1 or 2 levels of division."""
    rng = np.random.default_rng(seed)
    out = []
    for case in range(n_cases):
        n_int = 1 + case % 4
        model, _ = random_hybrid_mesh(rng, n_int)
        ndivi = int(rng.integers(1, 3))
        v0 = bulk_volume(model)
        fine, levels = divide_with_report(model, ndivi)
        msgs = []
        for lv in levels:
            if lv["predicted"] != lv["realized"]:
                msgs.append(f"level {lv['level']}: predicted {lv['predicted']} "
                            f"realized {lv['realized']}")
        verr = abs(bulk_volume(fine) - v0) / v0
        if verr > vol_tol:
            msgs.append(f"volume error {verr:.3e}")
        if _interface_thickness(fine) > 1e-12:
            msgs.append("interface elements lost zero thickness")
        ang0 = set(np.unique(model.fields["ply_angle"][np.isfinite(model.fields["ply_angle"])]))
        ang1 = set(np.unique(fine.fields["ply_angle"][np.isfinite(fine.fields["ply_angle"])]))
        if ang1 != ang0:
            msgs.append("ply angles not inherited")
        out.append(CaseResult(case, n_int, ndivi, (model.n_elements, model.n_nodes),
                              levels, verr, not msgs, msgs))
    return out


def format_suite(results) -> str:
    lines = []
    for r in results:
        last = r.levels[-1]["realized"]
        lines.append(f"case {r.case:3d} interfaces {r.n_interfaces} ndivi {r.ndivi} "
                     f"n_e {last['n_e']:6d} n_n {last['n_n']:6d} n_b {last['n_b']:6d} "
                     f"dV {r.volume_error:.1e} {'ok' if r.ok else 'FAIL ' + '; '.join(r.messages)}")
    n_ok = sum(r.ok for r in results)
    lines.append(f"{n_ok}/{len(results)} cases passed")
    return "\n".join(lines)
