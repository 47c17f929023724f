import pytest

from pdnimpact import bench, kernels


def test_speedup_definitions():
    pts = bench.speedup_table({1: 8.0, 2: 4.4, 4: 2.5, 8: 1.6})
    assert (pts[0].speedup, pts[0].efficiency) == (1.0, 1.0)
    assert pts[1].speedup == pytest.approx(8.0 / 4.4)
    assert pts[3].efficiency == pytest.approx(8.0 / (1.6 * 8))


def test_efficiency_relative_to_smallest_count():
    pts = bench.speedup_table({2: 5.0, 4: 2.5})
    assert pts[1].efficiency == pytest.approx(1.0)


def test_scale_bench_uses_custom_workload_and_restores_threads():
    prev = kernels.get_num_threads()
    seen = []

    def run(n):
        seen.append((n, kernels.get_num_threads()))
        return 1.0 / n

    pts = bench.scale_bench((1, 2, 4), run=run)
    assert [p.threads for p in pts] == [1, 2, 4]
    assert all(p.efficiency == pytest.approx(1.0) for p in pts)
    assert kernels.get_num_threads() == prev
    assert [s[0] for s in seen] == [1, 2, 4]


def test_default_workload_is_timed():
    pts = bench.scale_bench((1, 2), n_elements=343, steps=2)
    assert all(p.seconds > 0 for p in pts)
    assert bench.scaling_mesh(100_000).n_elements >= 100_000


def test_kernel_bench_reports_every_backend():
    res = bench.kernel_bench(n_elements=125, repeats=1)
    assert set(res) == set(kernels.available_backends())
    for timings in res.values():
        assert set(timings) == {"deformation_gradient", "elastic_forces", "neohookean_forces",
                                "internal_force"}
    assert kernels.BACKEND in res


def test_format_scaling_has_one_line_per_point():
    text = bench.format_scaling(bench.speedup_table({1: 2.0, 2: 1.0}))
    assert len(text.splitlines()) == 3
