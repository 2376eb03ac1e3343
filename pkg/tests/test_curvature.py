import numpy as np
import pytest

from src.plaplab.calculus import carre_du_champ, curvature_lower_bound, gamma2, vertex_curvature, weak_bochner_check
from src.plaplab.space import build_space, cycle, grid, random_graph


def test_two_point_curvature(two_point):
    report = curvature_lower_bound(two_point)
    assert report.global_K == pytest.approx(2.0, abs=1e-10)
    assert np.allclose(report.pointwise_K, 2.0)


@pytest.mark.parametrize("space", [grid(4, 4), cycle(6), random_graph(8, seed=3)])
def test_minimizer_certifies_bound(space):
    report = curvature_lower_bound(space)
    for x in report.vertices:
        u = report.minimizers[x]
        G = carre_du_champ(space, u)[x]
        assert G == pytest.approx(1.0, abs=1e-9)
        assert gamma2(space, u)[x] - report.pointwise_K[x] * G <= 1e-9


def test_bound_is_below_every_ratio(rng):
    space = random_graph(8, seed=9)
    report = curvature_lower_bound(space)
    for _ in range(30):
        u = rng.standard_normal(space.n)
        G = carre_du_champ(space, u)
        ratio = gamma2(space, u) / G
        assert np.all(ratio >= report.pointwise_K - 1e-9)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_conductance_scaling(seed):
    space = random_graph(5, seed=seed)
    base = curvature_lower_bound(space).pointwise_K
    scaled = curvature_lower_bound(space.scaled(conductance=3.0)).pointwise_K
    assert np.allclose(scaled, 3.0 * base, rtol=1e-9, atol=1e-9)


def test_global_bound_passes_bochner(rng):
    space = grid(3, 3)
    K = curvature_lower_bound(space).global_K
    for _ in range(10):
        assert weak_bochner_check(space, rng.standard_normal(space.n), K, tolerance=1e-9).passed


def test_isolated_vertex():
    space = build_space([(0, 1, 1.0)], [1.0, 1.0, 1.0])
    K, u = vertex_curvature(space, 2)
    assert K == float("inf") and u is None
    report = curvature_lower_bound(space)
    assert report.isolated == [2]
    assert report.global_K == pytest.approx(2.0, abs=1e-10)
