import numpy as np
import pytest

from src.plaplab.calculus import developed_operator, laplacian, p_laplacian
from src.plaplab.exceptions import ConvergenceError, ProblemSpecError
from src.plaplab.fixedpoint import (
    TRACE_COLUMNS, epsilon_continuation, format_trace_table, frozen_operator, frozen_operator_matrix, inner_solve,
    inner_solve_direct, outer_solve, trace_rows, w1p_norm,
)
from src.plaplab.linsolve import solve_zero_mean_poisson
from src.plaplab.schemas import FixedPointOptions, SolverConfig
from src.plaplab.space import cycle, from_generator_string, grid, path
from src.plaplab.variational import make_problem, solve_poisson_neumann


def zero_mean(space, rng):
    f = rng.standard_normal(space.n)
    return f - space.mean(f)


def config_with(**fixedpoint):
    return SolverConfig(fixedpoint=FixedPointOptions(**fixedpoint))

# -----------------------------------------------------------------------------
# Frozen operator
# -----------------------------------------------------------------------------

def test_frozen_operator_is_laplacian_at_p2(rng):
    space = grid(3, 3)
    U, w = rng.standard_normal(space.n), rng.standard_normal(space.n)
    assert np.allclose(frozen_operator(space, U, w, 2.0, 0.1), laplacian(space, U))


def test_frozen_operator_on_itself_is_developed_operator(rng):
    space = cycle(6)
    w = rng.standard_normal(space.n)
    for p in (1.5, 2.5):
        assert np.allclose(frozen_operator(space, w, w, p, 0.3), developed_operator(space, w, p, 0.3).values,
                           atol=1e-12)


def test_frozen_operator_linear_in_U(rng):
    space = grid(3, 4)
    U, V, w = (rng.standard_normal(space.n) for _ in range(3))
    left = frozen_operator(space, 2.0 * U - 3.0 * V, w, 1.7, 0.2)
    right = 2.0 * frozen_operator(space, U, w, 1.7, 0.2) - 3.0 * frozen_operator(space, V, w, 1.7, 0.2)
    assert np.allclose(left, right, atol=1e-12)


def test_frozen_operator_matrix_matches(rng):
    space = grid(3, 3)
    U, w = rng.standard_normal(space.n), rng.standard_normal(space.n)
    assert np.allclose(frozen_operator_matrix(space, w, 2.5, 0.4) @ U, frozen_operator(space, U, w, 2.5, 0.4))


def test_frozen_operator_needs_positive_epsilon(p3):
    with pytest.raises(ProblemSpecError):
        frozen_operator(p3, np.zeros(3), np.zeros(3), 2.5, 0.0)

# -----------------------------------------------------------------------------
# Inner solve
# -----------------------------------------------------------------------------

def test_inner_p2_is_one_poisson_solve(p3):
    f = np.array([1.0, 0.0, -1.0])
    U, trace = inner_solve(p3, f, np.zeros(3), 2.0, 1.0)
    assert trace.iterations == 1
    assert np.allclose(U, solve_zero_mean_poisson(p3, f), atol=1e-12)


def test_inner_contraction_on_p3(p3):
    f = np.array([1.0, 0.0, -1.0])
    U, trace = inner_solve(p3, f, [0.0, 1.0, 2.0], 2.5, 1.0)
    assert all(r <= 0.6 for r in trace.contraction_ratios[1:])
    assert trace.bound_check
    assert abs(p3.integrate(U)) < 1e-12
    assert trace.final_equation_residual < 1e-9


def test_inner_picard_agrees_with_direct(rng):
    space = grid(3, 3)
    f, w = zero_mean(space, rng), rng.standard_normal(space.n)
    picard, _ = inner_solve(space, f, w, 1.6, 0.5)
    direct, trace = inner_solve_direct(space, f, w, 1.6, 0.5)
    assert trace.method == "direct"
    assert np.allclose(picard, direct, atol=1e-8)


@pytest.mark.parametrize("p", [1.0, 3.0, 4.5])
def test_pipeline_rejects_exponent(p3, p):
    with pytest.raises(ProblemSpecError):
        inner_solve(p3, np.zeros(3), np.zeros(3), p, 1.0)


def test_pipeline_rejects_nonzero_mean(p3):
    with pytest.raises(ProblemSpecError, match="zero mean"):
        outer_solve(p3, [1.0, 1.0, 1.0], 2.5, 1.0)

# -----------------------------------------------------------------------------
# Outer solve
# -----------------------------------------------------------------------------

def test_outer_zero_forcing(p3):
    w, trace = outer_solve(p3, np.zeros(3), 2.5, 0.5)
    assert np.array_equal(w, np.zeros(3))
    assert trace.iterations == 0
    assert trace.converged


def test_outer_matches_regularized_minimizer(rng):
    space = grid(3, 3)
    p, eps = 2.5, 0.5
    f = zero_mean(space, rng)
    w, trace = outer_solve(space, f, p, eps)
    assert space.l2_norm(p_laplacian(space, w, p, eps) - f) < 1e-9
    assert trace.lambda_u_vanishes
    direct = solve_poisson_neumann(space, make_problem(kind="poisson-neumann", p=p, epsilon=eps, f=f.tolist()))
    assert np.allclose(w, direct.solution, atol=1e-6)


def test_outer_damping_and_residual_trace(rng):
    space = cycle(5)
    f = zero_mean(space, rng)
    _, trace = outer_solve(space, f, 1.5, 0.2)
    assert len(trace.damping_used) == trace.iterations == len(trace.residual_trace)
    assert all(0 < theta <= 1 for theta in trace.damping_used)
    assert trace.residual_trace[-1] < trace.initial_residual


def test_inner_cap_falls_back_to_direct_solve(p3):
    f = np.array([1.0, 0.0, -1.0])
    w, trace = outer_solve(p3, f, 2.5, 0.5, config_with(max_inner_iterations=1))
    assert trace.fallbacks > 0
    assert p3.l2_norm(p_laplacian(p3, w, 2.5, 0.5) - f) < 1e-9


def test_inner_cap_without_fallback_raises(p3):
    f = np.array([1.0, 0.0, -1.0])
    with pytest.raises(ConvergenceError) as exc:
        outer_solve(p3, f, 2.5, 0.5, config_with(max_inner_iterations=1, inner_fallback=False))
    assert "outer_trace" in exc.value.context

# -----------------------------------------------------------------------------
# Continuation
# -----------------------------------------------------------------------------

def test_continuation_p2_single_stage(rng):
    space = grid(3, 3)
    f = zero_mean(space, rng)
    u, trace = epsilon_continuation(space, f, 2.0)
    assert len(trace.stages) == 1
    assert trace.stop_reason == "single stage"
    assert np.allclose(u, solve_zero_mean_poisson(space, f), atol=1e-9)


def test_continuation_on_short_path_matches_variational():
    space = path(3)
    f = np.array([1.0, 0.0, -1.0])
    u, trace = epsilon_continuation(space, f, 1.5)
    direct = solve_poisson_neumann(space, make_problem(kind="poisson-neumann", p=1.5, f=f.tolist()))
    assert np.allclose(u, direct.solution, atol=1e-6)
    assert trace.final_plap_residual < 1e-8
    assert trace.epsilon_schedule == sorted(trace.epsilon_schedule, reverse=True)


@pytest.mark.parametrize("p", [1.5, 2.0, 2.5])
def test_continuation_agrees_with_direct_method(rng, p):
    space = cycle(6)
    f = zero_mean(space, rng)
    u, trace = epsilon_continuation(space, f, p)
    direct = solve_poisson_neumann(space, make_problem(kind="poisson-neumann", p=p, f=f.tolist()))
    assert np.allclose(u, direct.solution, atol=1e-6)
    assert abs(w1p_norm(space, u, p) - w1p_norm(space, direct.solution, p)) < 1e-6
    assert trace.final_surrogate is not None


def test_trace_table_layout(rng):
    space = cycle(5)
    f = zero_mean(space, rng)
    _, trace = epsilon_continuation(space, f, 2.5)
    table = format_trace_table(trace).splitlines()
    assert table[0].split("\t") == list(TRACE_COLUMNS)
    assert len(table) == 1 + len(trace_rows(trace))
    assert len(table) - 1 == sum(len(stage.residual_trace) for stage in trace.stages)
    for line in table[1:]:
        assert len(line.split("\t")) == len(TRACE_COLUMNS)


REGRESSION_SPACES = ["path:5", "cycle:6", "star:4", "grid:3x3", "random:10:1", "random:12:2"]


def regression_forcing(space):
    f = np.random.default_rng(42).standard_normal(space.n)
    return f - space.mean(f)


def inner_traces(trace):
    return [inner for stage in trace.stages for inner in stage.inner]


@pytest.mark.parametrize("generator", REGRESSION_SPACES)
@pytest.mark.parametrize("p", [1.5, 2.0, 2.5])
def test_oracle_equivalence_on_regression_spaces(generator, p):
    space = from_generator_string(generator)
    f = regression_forcing(space)
    u, trace = epsilon_continuation(space, f, p)
    v = solve_poisson_neumann(space, make_problem(kind="poisson-neumann", p=p, f=f.tolist())).solution
    assert np.abs(u - v).max() <= 1e-6
    for w in (u, v):
        assert space.l2_norm(p_laplacian(space, w, p) - f) <= 1e-8

    # step accounting is complete
    inners = inner_traces(trace)
    kinds = [kind for stage in trace.stages for kind in stage.step_kinds]
    assert len(inners) == len(kinds) == trace.outer_iterations
    assert trace.fallbacks == sum(inner.method == "direct" for inner in inners)
    assert trace.newton_corrections == kinds.count("newton")
    assert trace.newton_corrections <= trace.slow_steps
    if p == 2.0:
        assert trace.step_counts() == {"outer_iterations": 1, "inner_fallbacks": 0, "newton_corrections": 0,
                                       "slow_steps": 0}

    # inner bound wherever the observed ratios stayed within |p - 2|
    kappa = abs(p - 2.0)
    for inner in inners:
        if inner.method == "picard" and all(r <= kappa for r in inner.contraction_ratios):
            assert inner.solution_laplacian_norm <= inner.rhs_norm / (1.0 - kappa) + 1e-9
            assert inner.bound_check


@pytest.mark.parametrize("generator", REGRESSION_SPACES)
@pytest.mark.parametrize("p", [1.5, 2.5])
def test_damped_pipeline_without_outer_fallback(generator, p):
    space = from_generator_string(generator)
    f = regression_forcing(space)
    try:
        u, trace = epsilon_continuation(space, f, p, config_with(outer_fallback=False))
    except ConvergenceError as e:
        # failure is raised with the accounting attached, never hidden
        trace = e.context["continuation_trace"]
        assert e.context["newton_corrections"] == 0
        assert trace.newton_corrections == 0
        assert "best_iterate" in e.context
        return
    assert trace.newton_corrections == 0
    assert all(kind == "damped" for stage in trace.stages for kind in stage.step_kinds)
    assert trace.final_plap_residual < 1e-8
    v = solve_poisson_neumann(space, make_problem(kind="poisson-neumann", p=p, f=f.tolist())).solution
    assert np.abs(u - v).max() <= 1e-6


def test_direct_inner_share_is_recorded():
    space = from_generator_string("star:4")
    f = regression_forcing(space)
    _, trace = epsilon_continuation(space, f, 1.5)
    rows = trace_rows(trace)
    assert len(rows) == trace.outer_iterations
    assert sum(row["inner"] == "direct" for row in rows) == trace.fallbacks
    assert sum(row["step"] == "newton" for row in rows) == trace.newton_corrections
    share = trace.fallbacks / trace.outer_iterations
    assert 0.0 <= share <= 1.0
    for inner in inner_traces(trace):
        assert inner.method in ("picard", "direct")
        if inner.method == "direct":
            assert inner.iterations == 1 and not inner.contraction_ratios


def test_trace_table_reports_inner_method_and_step_kind(rng):
    space = cycle(5)
    f = zero_mean(space, rng)
    _, trace = epsilon_continuation(space, f, 1.5)
    table = [line.split("\t") for line in format_trace_table(trace).splitlines()]
    inner_col, step_col = TRACE_COLUMNS.index("inner"), TRACE_COLUMNS.index("step")
    assert {row[inner_col] for row in table[1:]} <= {"picard", "direct"}
    assert {row[step_col] for row in table[1:]} <= {"damped", "newton"}
    assert sum(row[step_col] == "newton" for row in table[1:]) == trace.newton_corrections


@pytest.mark.parametrize("generator", REGRESSION_SPACES)
def test_p2_outer_solve_is_linear_at_every_epsilon(generator):
    space = from_generator_string(generator)
    f = regression_forcing(space)
    expected = solve_zero_mean_poisson(space, f)
    for eps in FixedPointOptions().schedule():
        w, trace = outer_solve(space, f, 2.0, eps)
        assert np.abs(w - expected).max() <= 1e-10, eps
        assert trace.iterations == 1


@pytest.mark.parametrize("generator", ["path:5", "cycle:6", "star:4", "grid:3x3"])
@pytest.mark.parametrize("p", [1.5, 2.5])
def test_continuation_is_stable_near_the_end(generator, p):
    space = from_generator_string(generator)
    f = regression_forcing(space)
    _, trace = epsilon_continuation(space, f, p)
    increment_tolerance = FixedPointOptions().increment_tolerance

    increments = trace.W1p_increments[-4:]
    assert all(b <= a + increment_tolerance for a, b in zip(increments, increments[1:]))

    surrogates = trace.surrogates[-3:]
    assert len(surrogates) == 3
    spread = (max(surrogates) - min(surrogates)) / max(surrogates)
    assert spread < 0.1
