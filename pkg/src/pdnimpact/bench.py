"""Thread-scaling measurement and kernel backend comparison."""

import os
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .materials import NeoHookean
from .meshgen import box_mesh
from .fem import Solid


@dataclass
class ScalingPoint:
    threads: int
    seconds: float
    speedup: float
    efficiency: float


def speedup_table(times: dict) -> list:
    """Speedup t0/tN and efficiency t0*N0/(tN*N) relative to the smallest N."""
    ns = sorted(times)
    n0, t0 = ns[0], times[ns[0]]
    return [ScalingPoint(n, times[n], t0 / times[n], t0 * n0 / (times[n] * n)) for n in ns]


def scaling_mesh(n_elements=100_000):
    """Unit-density cube of about ``n_elements`` hexahedra."""
    k = int(np.ceil(n_elements ** (1.0 / 3.0)))
    g = np.linspace(0.0, 1.0, k + 1)
    return box_mesh(g, g, g)


def scale_bench(thread_counts=(1, 2, 4, 8), n_elements=100_000, steps=20, run=None):
    """Time ``steps`` internal-force evaluations per thread count.

    ``run(threads)`` may replace the default workload (a Neo-Hookean cube
    of at least ``n_elements`` elements) and must return elapsed seconds.
    """
    if run is None:
        model = scaling_mesh(n_elements)
        solid = Solid(model, {1: NeoHookean(1000.0, 0.3, 1e-9)})
        rng = np.random.default_rng(0)
        u = 1e-3 * rng.standard_normal((model.n_nodes, 3))

        def run(threads):
            kernels.set_num_threads(threads)
            solid.internal_force(u)
            t0 = time.perf_counter()
            for _ in range(steps):
                solid.internal_force(u)
            return time.perf_counter() - t0

    prev = kernels.get_num_threads()
    try:
        times = {int(n): run(int(n)) for n in thread_counts}
    finally:
        kernels.set_num_threads(prev)
    return speedup_table(times)


def cpu_count():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def kernel_bench(n_elements=20_000, repeats=5):
    """Best-of-``repeats`` seconds per kernel for each available backend."""
    model = scaling_mesh(n_elements)
    solid = Solid(model, {1: NeoHookean(1000.0, 0.3, 1e-9)})
    g = solid.groups[0]
    rng = np.random.default_rng(1)
    u = 1e-3 * rng.standard_normal((model.n_nodes, 3))
    ne = len(g.conn)
    mu, kappa = np.full(ne, 300.0), np.full(ne, 800.0)
    C = np.ascontiguousarray(NeoHookean(1000.0, 0.3, 1e-9).max_stiffness() * np.eye(6)[None])
    current = kernels.BACKEND
    out = {}
    try:
        for name in kernels.available_backends():
            kernels.use_backend(name)
            cases = {
                "deformation_gradient": lambda: kernels.deformation_gradient(g.dNdX, g.conn, u),
                "elastic_forces": lambda: kernels.elastic_forces(g.dNdX, g.wdetJ, g.conn, u, C),
                "neohookean_forces": lambda: kernels.neohookean_forces(g.dNdX, g.wdetJ, g.conn,
                                                                       u, mu, kappa),
                "internal_force": lambda: solid.internal_force(u),
            }
            res = {}
            for key, fn in cases.items():
                fn()
                best = np.inf
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    fn()
                    best = min(best, time.perf_counter() - t0)
                res[key] = best
            out[name] = res
    finally:
        kernels.use_backend(current)
    return out


def format_scaling(points) -> str:
    lines = ["threads  seconds   speedup  efficiency"]
    lines += [f"{p.threads:7d}  {p.seconds:8.4f}  {p.speedup:7.3f}  {p.efficiency:10.3f}"
              for p in points]
    return "\n".join(lines)
