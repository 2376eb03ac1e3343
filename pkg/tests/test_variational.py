import itertools

import numpy as np
import pytest
from scipy.optimize import minimize

from src.plaplab.calculus import p_laplacian
from src.plaplab.calculus.fields import write_field
from src.plaplab.exceptions import ProblemSpecError
from src.plaplab.linsolve import solve_dirichlet_linear, solve_zero_mean_poisson
from src.plaplab.space import cycle, grid, path, random_graph, star
from src.plaplab.variational import (
    EigenMode, ProblemKind, make_problem, maximum_principle_check, p_objective, parse_problem, serialize_problem,
    solve, solve_capacity, solve_eigen, solve_poisson_dirichlet, solve_poisson_neumann,
)


def zero_mean(space, rng):
    f = rng.standard_normal(space.n)
    return f - space.mean(f)

# -----------------------------------------------------------------------------
# Problem specs
# -----------------------------------------------------------------------------

def test_exponent_out_of_range_names_interval():
    with pytest.raises(ProblemSpecError) as exc:
        make_problem(kind=ProblemKind.POISSON_NEUMANN, p=0.5)
    assert "(1, inf)" in str(exc.value)


@pytest.mark.parametrize("data", [
    {"kind": "poisson-dirichlet", "p": 2.0},
    {"kind": "eigen", "p": 2.0},
    {"kind": "eigen", "p": 2.0, "mode": "dirichlet"},
    {"kind": "capacity", "p": 2.0, "K": [0], "omega": [1]},
    {"kind": "poisson-dirichlet", "p": 2.0, "boundary": [0, 1], "boundary_values": [1.0]},
])
def test_incomplete_problem_rejected(data):
    with pytest.raises(ProblemSpecError):
        make_problem(**data)


def test_problem_file_round_trip(tmp_path):
    write_field(tmp_path / "f.txt", np.array([0.5, -1.0, 0.5]))
    text = "kind = poisson-dirichlet\np = 2.5\nboundary = [0, 2]\nboundary_values = [0, 1]\nf = f.txt\n"
    spec = parse_problem(text, tmp_path, n=3)
    assert spec.kind == ProblemKind.POISSON_DIRICHLET
    assert spec.boundary == [0, 2]
    assert spec.f == [0.5, -1.0, 0.5]
    assert parse_problem(serialize_problem(spec), tmp_path, n=3) == spec


def test_eigen_problem_with_warm_start_round_trip(tmp_path):
    initial = [0.25, -1.0, 0.5, 0.125]
    spec = make_problem(kind="eigen", p=1.7, mode="neumann", initial=initial)
    text = serialize_problem(spec)
    assert "initial = initial.txt" in text.splitlines()
    write_field(tmp_path / "initial.txt", np.array(initial))
    assert parse_problem(text, tmp_path, n=4) == spec


def test_problem_file_unknown_key():
    with pytest.raises(ProblemSpecError, match="line 2"):
        parse_problem("kind = eigen\ncolour = red\n")

# -----------------------------------------------------------------------------
# Dirichlet p-Poisson
# -----------------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_p3_symmetric_dirichlet(p3, p):
    spec = make_problem(kind="poisson-dirichlet", p=p, boundary=[0, 2], boundary_values=[0.0, 1.0])
    result = solve_poisson_dirichlet(p3, spec)
    assert np.allclose(result.solution, [0.0, 0.5, 1.0], atol=1e-9)
    assert result.kkt_residual <= 1e-8


def test_p2_matches_linear_solver(rng):
    space = grid(3, 3)
    boundary = [0, 1, 2, 3, 5, 6, 7, 8]
    values = rng.standard_normal(len(boundary))
    f = rng.standard_normal(space.n)
    spec = make_problem(kind="poisson-dirichlet", p=2.0, boundary=boundary, boundary_values=values.tolist(),
                        f=f.tolist())
    result = solve_poisson_dirichlet(space, spec)
    assert np.allclose(result.solution, solve_dirichlet_linear(space, boundary, values, f), atol=1e-9)


def test_objective_matches_simplex_search_on_small_random_graph():
    space = random_graph(6, seed=5)
    p = 2.5
    boundary, values = [0, 5], [0.0, 1.0]
    f = 0.5 * np.random.default_rng(11).standard_normal(space.n)
    spec = make_problem(kind="poisson-dirichlet", p=p, boundary=boundary, boundary_values=values, f=f.tolist())
    result = solve_poisson_dirichlet(space, spec)

    free = np.array([1, 2, 3, 4])

    def objective(x):
        u = np.zeros(space.n)
        u[boundary] = values
        u[free] = x
        return p_objective(space, u, p, f, free)

    # coarse grid, then Nelder-Mead polish
    axis = np.linspace(-2.0, 3.0, 6)
    start = min(itertools.product(axis, repeat=free.size), key=objective)
    oracle = minimize(objective, np.array(start), method="Nelder-Mead",
                      options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 50000, "maxfev": 100000})
    assert abs(result.objective_value - oracle.fun) <= 1e-6
    assert result.objective_value <= oracle.fun + 1e-9


def test_dirichlet_solution_is_unique_and_trace_monotone(rng):
    space = grid(3, 3)
    boundary = [0, 2, 6, 8]
    values = [0.0, 1.0, -1.0, 2.0]
    runs = []
    for _ in range(2):
        spec = make_problem(kind="poisson-dirichlet", p=2.5, boundary=boundary, boundary_values=values,
                            initial=rng.standard_normal(space.n).tolist())
        runs.append(solve_poisson_dirichlet(space, spec))
    assert np.allclose(runs[0].solution, runs[1].solution, atol=1e-7)
    for run in runs:
        trace = np.array(run.objective_trace)
        assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace[:-1]).max())


def test_dirichlet_solution_obeys_maximum_principle():
    space = path(6)
    spec = make_problem(kind="poisson-dirichlet", p=1.7, boundary=[0, 5], boundary_values=[-1.0, 3.0])
    result = solve_poisson_dirichlet(space, spec)
    check = maximum_principle_check(space, result.solution, [0, 5])
    assert check.passed
    assert np.all(np.diff(result.solution) > 0)

# -----------------------------------------------------------------------------
# Neumann p-Poisson
# -----------------------------------------------------------------------------

def test_neumann_zero_forcing(p3):
    result = solve_poisson_neumann(p3, make_problem(kind="poisson-neumann", p=1.5))
    assert np.allclose(result.solution, 0.0, atol=1e-12)


def test_neumann_p2_matches_zero_mean_poisson(rng):
    space = grid(4, 3)
    f = zero_mean(space, rng)
    result = solve_poisson_neumann(space, make_problem(kind="poisson-neumann", p=2.0, f=f.tolist()))
    assert np.allclose(result.solution, solve_zero_mean_poisson(space, f), atol=1e-9)


def test_neumann_rejects_nonzero_mean(p3):
    with pytest.raises(ProblemSpecError, match="zero mean"):
        solve_poisson_neumann(p3, make_problem(kind="poisson-neumann", p=2.0, f=[1.0, 1.0, 1.0]))


def test_neumann_minimizer_beats_random_candidates(rng):
    space = cycle(5)
    p = 1.5
    f = zero_mean(space, rng)
    result = solve_poisson_neumann(space, make_problem(kind="poisson-neumann", p=p, f=f.tolist()))
    assert result.kkt_residual < 1e-8
    assert abs(space.integrate(result.solution)) < 1e-10
    assert space.l2_norm(p_laplacian(space, result.solution, p) - f) < 1e-7

    free = np.arange(space.n)
    best = p_objective(space, result.solution, p, f, free)
    for _ in range(2000):
        candidate = result.solution + 0.3 * zero_mean(space, rng)
        assert best <= p_objective(space, candidate, p, f, free) + 1e-12


def test_neumann_solution_independent_of_initial_field(rng):
    space = cycle(6)
    f = zero_mean(space, rng)
    solutions = [
        solve_poisson_neumann(space, make_problem(kind="poisson-neumann", p=2.5, f=f.tolist(),
                                                  initial=rng.standard_normal(space.n).tolist())).solution
        for _ in range(2)
    ]
    assert np.allclose(solutions[0], solutions[1], atol=1e-7)

# -----------------------------------------------------------------------------
# First eigenvalue
# -----------------------------------------------------------------------------

def test_p3_neumann_eigenvalue(p3):
    result = solve_eigen(p3, make_problem(kind="eigen", p=2.0, mode="neumann"))
    assert result.eigenvalue == pytest.approx(1.0, abs=1e-8)
    assert abs(p3.integrate(result.solution)) < 1e-9


def test_p3_dirichlet_eigenvalue(p3):
    result = solve_eigen(p3, make_problem(kind="eigen", p=2.0, mode="dirichlet", boundary=[0, 2]))
    assert result.eigenvalue == pytest.approx(2.0, abs=1e-8)
    assert np.allclose(result.solution, [0.0, 1.0, 0.0])


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_single_interior_vertex_eigenvalue(p3, p):
    # u = indicator of the middle vertex: Gamma = (1/2, 1, 1/2)
    result = solve_eigen(p3, make_problem(kind="eigen", p=p, mode=EigenMode.DIRICHLET, boundary=[0, 2]))
    assert result.eigenvalue == pytest.approx(1.0 + 2.0 ** (1.0 - p / 2.0), rel=1e-9)


def test_eigenvalue_scales_with_conductance():
    p = 3.0
    spec = make_problem(kind="eigen", p=p, mode="dirichlet", boundary=[0, 2])
    base = solve_eigen(path(3), spec).eigenvalue
    scaled = solve_eigen(path(3, conductance=4.0), spec).eigenvalue
    assert scaled == pytest.approx(4.0 ** (p / 2.0) * base, rel=1e-8)


def test_neumann_eigenvalue_p_not_two_converges():
    space = path(5)
    result = solve_eigen(space, make_problem(kind="eigen", p=1.8, mode="neumann"))
    assert result.kkt_residual <= 1e-9
    assert result.eigenvalue > 0

# -----------------------------------------------------------------------------
# Capacity
# -----------------------------------------------------------------------------

def test_star_capacity():
    spec = make_problem(kind="capacity", p=2.0, K=[0], omega=[0])
    result = solve_capacity(star(3), spec)
    assert result.capacity == pytest.approx(3.0, abs=1e-10)
    assert result.comparison_ok


def test_capacity_decreases_on_larger_domain():
    space = path(8)
    caps = [
        solve_capacity(space, make_problem(kind="capacity", p=2.5, K=[0], omega=list(range(k)))).capacity
        for k in (3, 5, 7)
    ]
    assert caps[0] >= caps[1] >= caps[2] > 0


def test_capacity_potential_stays_in_unit_interval():
    result = solve(grid(4, 4), make_problem(kind="capacity", p=1.6, K=[5], omega=[1, 4, 5, 6, 9, 10]))
    assert result.comparison_ok
    assert result.solution.min() >= -1e-10
    assert result.solution.max() <= 1.0 + 1e-10


def test_capacity_needs_proper_domain(p3):
    with pytest.raises(ProblemSpecError):
        solve_capacity(p3, make_problem(kind="capacity", p=2.0, K=[0], omega=[0, 1, 2]))


@pytest.mark.parametrize("p", [1.5, 2.5])
def test_cycle_eigen_euler_lagrange_residual(p):
    result = solve_eigen(cycle(6), make_problem(kind="eigen", p=p, mode="neumann"))
    assert result.kkt_residual <= 1e-8


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_seeded_dirichlet_instances_respect_comparison(p):
    rng = np.random.default_rng(7)
    space = grid(4, 4)
    for _ in range(50):
        boundary = sorted(rng.choice(space.n, size=5, replace=False).tolist())
        values = rng.uniform(-1.0, 1.0, size=5)
        spec = make_problem(kind="poisson-dirichlet", p=p, boundary=boundary, boundary_values=values.tolist())
        check = maximum_principle_check(space, solve_poisson_dirichlet(space, spec).solution, boundary)
        assert check.within_bounds
        assert not check.strict_interior_extrema
