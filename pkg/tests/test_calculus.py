import numpy as np
import pytest

from src.plaplab.calculus import (
    carre_du_champ, developed_operator, format_field, gamma, gamma2, gamma_operator, hessian_proxy,
    hessian_proxy_operator, inf_laplacian, laplacian, laplacian_matrix, p_energy, p_energy_gradient,
    p_energy_hessian, p_laplacian, parse_field, read_field, weak_bochner_check, write_field,
)
from src.plaplab.exceptions import FieldError, ProblemSpecError
from src.plaplab.space import build_space, grid, random_graph


@pytest.fixture
def rand_space():
    return random_graph(9, seed=11)

# -----------------------------------------------------------------------------
# Gamma and Delta
# -----------------------------------------------------------------------------

def test_gamma_vanishes_on_constants(rand_space, rng):
    g = rng.standard_normal(rand_space.n)
    assert np.allclose(gamma(rand_space, np.full(rand_space.n, 3.0), g), 0.0)


def test_gamma_on_p3(p3):
    assert np.allclose(carre_du_champ(p3, [0.0, 1.0, 0.0]), [0.5, 1.0, 0.5])


def test_gamma_polarization(rand_space, rng):
    f, g = rng.standard_normal((2, rand_space.n))
    polar = 0.25 * (carre_du_champ(rand_space, f + g) - carre_du_champ(rand_space, f - g))
    assert np.allclose(gamma(rand_space, f, g), polar, atol=1e-12)


def test_laplacian_on_p3(p3):
    assert np.allclose(laplacian(p3, [0.0, 1.0, 0.0]), [1.0, -2.0, 1.0])
    assert np.allclose(laplacian(p3, np.ones(3)), 0.0)


def test_integration_by_parts(rand_space, rng):
    f, phi = rng.standard_normal((2, rand_space.n))
    m = rand_space.measure
    lhs = np.dot(laplacian(rand_space, f) * phi, m)
    rhs = -np.dot(gamma(rand_space, f, phi), m)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_laplacian_matrix_matches_pointwise(rand_space, rng):
    f = rng.standard_normal(rand_space.n)
    assert np.allclose(laplacian_matrix(rand_space) @ f, laplacian(rand_space, f))


def test_gamma_operator_matches_pointwise(rand_space, rng):
    f, g = rng.standard_normal((2, rand_space.n))
    assert np.allclose(gamma_operator(rand_space, f) @ g, gamma(rand_space, f, g))


def test_field_shape_checked(p3):
    with pytest.raises(FieldError):
        laplacian(p3, np.zeros(4))

# -----------------------------------------------------------------------------
# p-Laplacian
# -----------------------------------------------------------------------------

@pytest.mark.parametrize("p, eps", [(1.5, 0.0), (2.0, 0.3), (3.0, 1.0)])
def test_p_laplacian_of_constant(rand_space, p, eps):
    assert np.allclose(p_laplacian(rand_space, np.full(rand_space.n, 2.0), p, eps), 0.0)


@pytest.mark.parametrize("p, eps", [(1.3, 0.0), (2.5, 0.1), (4.0, 2.0)])
def test_p_laplacian_middle_vertex_of_linear_field(p3, p, eps):
    assert p_laplacian(p3, [0.0, 1.0, 2.0], p, eps)[1] == pytest.approx(0.0, abs=1e-14)


def test_p_laplacian_equals_energy_gradient(p3):
    u = np.array([0.0, 1.0, 0.0])
    h = 1e-5
    fd = np.array([(p_energy(p3, u + h * e, 3.0) - p_energy(p3, u - h * e, 3.0)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(p_energy_gradient(p3, u, 3.0), fd, atol=1e-9)
    assert np.allclose(-p3.measure * p_laplacian(p3, u, 3.0), fd, atol=1e-9)


def test_p_laplacian_at_p2_is_laplacian(rand_space, rng):
    u = rng.standard_normal(rand_space.n)
    assert np.allclose(p_laplacian(rand_space, u, 2.0, 0.7), laplacian(rand_space, u))


def test_p_laplacian_rejects_bad_exponent(p3):
    with pytest.raises(ProblemSpecError, match=r"\(1, inf\)"):
        p_laplacian(p3, np.zeros(3), 0.5)
    with pytest.raises(ProblemSpecError):
        p_laplacian(p3, np.zeros(3), 2.0, -1.0)


def test_p_laplacian_degenerate_point_is_finite(p3):
    out = p_laplacian(p3, np.zeros(3), 1.5, 0.0)
    assert np.all(np.isfinite(out)) and np.allclose(out, 0.0)


def test_energy_hessian_matches_finite_differences(rng):
    space = random_graph(7, seed=2)
    u = rng.standard_normal(space.n)
    p, eps, h = 2.7, 0.2, 1e-6
    H = p_energy_hessian(space, u, p, eps).toarray()
    fd = np.column_stack([
        (p_energy_gradient(space, u + h * e, p, eps) - p_energy_gradient(space, u - h * e, p, eps)) / (2 * h)
        for e in np.eye(space.n)
    ])
    assert np.allclose(H, fd, atol=1e-6)

# -----------------------------------------------------------------------------
# Infinity-Laplacian, Hessian proxy, develop identity
# -----------------------------------------------------------------------------

@pytest.mark.parametrize("variant", ["gamma_form", "paper_form"])
def test_inf_laplacian_of_constant(p3, variant):
    assert np.allclose(inf_laplacian(p3, np.ones(3), variant), 0.0)


def test_inf_laplacian_value_on_p3(p3):
    assert inf_laplacian(p3, [0.0, 1.0, 2.0])[0] == pytest.approx(1.0 / 8.0)


def test_inf_laplacian_variants_agree_on_two_points(two_point, rng):
    for _ in range(20):
        u = rng.standard_normal(2)
        assert np.allclose(inf_laplacian(two_point, u, "gamma_form"), inf_laplacian(two_point, u, "paper_form"))


def test_inf_laplacian_unknown_variant(p3):
    with pytest.raises(ProblemSpecError):
        inf_laplacian(p3, np.zeros(3), "other")


def test_hessian_proxy_identities(rand_space, rng):
    U1, U2, w = rng.standard_normal((3, rand_space.n))
    assert np.allclose(hessian_proxy(rand_space, np.ones(rand_space.n), w), 0.0)
    assert np.allclose(hessian_proxy(rand_space, w, w),
                       0.5 * gamma(rand_space, w, carre_du_champ(rand_space, w)), atol=1e-12)
    assert np.allclose(hessian_proxy(rand_space, U1 + U2, w),
                       hessian_proxy(rand_space, U1, w) + hessian_proxy(rand_space, U2, w), atol=1e-12)
    assert np.allclose(hessian_proxy_operator(rand_space, w) @ U1, hessian_proxy(rand_space, U1, w))


def test_developed_operator_at_p2(rand_space, rng):
    u = rng.standard_normal(rand_space.n)
    D, rho = developed_operator(rand_space, u, 2.0, 0.5)
    assert np.allclose(D, laplacian(rand_space, u))
    assert np.allclose(rho, 0.0)


def test_developed_operator_of_constant(p3):
    D, rho = developed_operator(p3, np.ones(3), 2.5, 0.1)
    assert np.allclose(D, 0.0) and np.allclose(rho, 0.0)


def test_developed_residual_on_p3_is_nonzero(p3):
    _, rho = developed_operator(p3, [0.0, 1.0, 2.0], 2.5, 0.1)
    assert np.all(np.isfinite(rho))
    assert np.abs(rho).max() > 1e-6

# -----------------------------------------------------------------------------
# Gamma_2 and Bochner
# -----------------------------------------------------------------------------

def test_gamma2_two_point(two_point):
    assert np.allclose(gamma2(two_point, [0.0, 1.0]), 1.0)
    assert np.allclose(carre_du_champ(two_point, [0.0, 1.0]), 0.5)


def test_gamma2_homogeneity(rand_space, rng):
    u = rng.standard_normal(rand_space.n)
    assert np.allclose(gamma2(rand_space, 2.5 * u), 6.25 * gamma2(rand_space, u))
    assert np.allclose(gamma2(rand_space, np.ones(rand_space.n)), 0.0)


def test_integrated_gamma2_equals_laplacian_energy(rng):
    space = grid(4, 4)
    u = rng.standard_normal(space.n)
    lap = laplacian(space, u)
    assert np.dot(gamma2(space, u), space.measure) == pytest.approx(np.dot(lap * lap, space.measure), rel=1e-10)


def test_weak_bochner_two_point(two_point):
    assert not weak_bochner_check(two_point, [0.0, 1.0], 3.0).passed
    assert weak_bochner_check(two_point, [0.0, 1.0], 3.0).margin < 0
    check = weak_bochner_check(two_point, [0.0, 1.0], 2.0)
    assert check.passed


def test_weak_bochner_constant_field(p3):
    check = weak_bochner_check(p3, np.ones(3), 100.0)
    assert check.passed and check.margin == 0.0

# -----------------------------------------------------------------------------
# Field files
# -----------------------------------------------------------------------------

def test_field_file_round_trip(tmp_path, rng):
    u = rng.standard_normal(5)
    write_field(tmp_path / "u.txt", u)
    assert np.array_equal(read_field(tmp_path / "u.txt", 5), u)


def test_field_parse_errors():
    with pytest.raises(FieldError, match="line 2"):
        parse_field("0 1.0\n1")
    with pytest.raises(FieldError, match="repeated"):
        parse_field("0 1.0\n0 2.0")
    with pytest.raises(FieldError, match="dense"):
        parse_field("0 1.0\n2 2.0")
    with pytest.raises(FieldError):
        parse_field(format_field(np.zeros(3)), n=4)
