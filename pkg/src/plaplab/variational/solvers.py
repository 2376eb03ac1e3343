import logging
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from src.plaplab.calculus.gamma import carre_du_champ, check_exponent, p_laplacian
from src.plaplab.exceptions import ConvergenceError, LinearSolveError, ProblemSpecError
from src.plaplab.linsolve.cg import (
    boundary_arrays, check_boundary_contact, interior_of, solve_dirichlet_linear, solve_zero_mean_poisson,
)
from src.plaplab.linsolve.spectrum import dense_dirichlet_spectrum, dense_spectrum
from src.plaplab.schemas import SolverConfig
from src.plaplab.space.mms import DiscreteMMS
from src.plaplab.variational.newton import EnergyProblem, Minimization, minimize_energy
from src.plaplab.variational.problems import EigenMode, ProblemKind, ProblemSpec, VariationalResult

logger = logging.getLogger(__name__)

MEAN_TOLERANCE = 1e-10
COMPARISON_TOLERANCE = 1e-10


def phi_p(u: np.ndarray, p: float) -> np.ndarray:
    """u |u|^(p-2)."""
    return np.sign(u) * np.abs(u) ** (p - 1.0)


def p_objective(space: DiscreteMMS, u: np.ndarray, p: float, f: np.ndarray, free: np.ndarray,
                eps: float = 0.0) -> float:
    """The functional the Poisson solvers minimize: p-energy plus sum over free vertices of f u m."""
    return EnergyProblem(space, p, eps, f, free).objective(u)


def _require_mean_free(space: DiscreteMMS, f: np.ndarray) -> np.ndarray:
    mass = float(np.dot(f, space.measure))
    scale = float(np.dot(np.abs(f), space.measure))
    if scale > 0 and abs(mass) > MEAN_TOLERANCE * scale:
        raise ProblemSpecError(f"Neumann data must have zero mean: sum f m = {mass:.3e}",
                               {"integral": mass})
    return f - mass / float(space.measure.sum())


def _require_connected(space: DiscreteMMS) -> None:
    if not space.is_connected:
        raise ProblemSpecError("Problem needs a connected space", {"components": space.component_count})

# -----------------------------------------------------------------------------
# Array-level cores
# -----------------------------------------------------------------------------

def dirichlet_core(space: DiscreteMMS, p: float, eps: float, f: np.ndarray, B: np.ndarray, values: np.ndarray,
                   config: SolverConfig, initial: Optional[np.ndarray] = None) -> Minimization:
    I = interior_of(space, B)
    if I.size == 0:
        u = np.zeros(space.n)
        u[B] = values
        F = p_objective(space, u, p, f, I, eps)
        return Minimization(u, F, 0.0, 0, [F])
    check_boundary_contact(space, B, I)
    if initial is None:
        u0 = solve_dirichlet_linear(space, B, values, f, config.linear)
    else:
        u0 = np.array(initial, dtype=float)
        u0[B] = values
    return minimize_energy(EnergyProblem(space, p, eps, f, I), u0, config.variational)


def neumann_core(space: DiscreteMMS, p: float, eps: float, f: np.ndarray, config: SolverConfig,
                 initial: Optional[np.ndarray] = None) -> Minimization:
    _require_connected(space)
    f = _require_mean_free(space, f)
    if initial is None:
        u0 = solve_zero_mean_poisson(space, f, config.linear)
    else:
        u0 = np.array(initial, dtype=float)
        u0 -= space.mean(u0)
    result = minimize_energy(EnergyProblem(space, p, eps, f, np.arange(space.n), neumann=True), u0,
                             config.variational)
    u = result.solution - space.mean(result.solution)
    return result._replace(solution=u)

# -----------------------------------------------------------------------------
# Poisson
# -----------------------------------------------------------------------------

def solve_poisson_dirichlet(space: DiscreteMMS, spec: ProblemSpec, config: Optional[SolverConfig] = None) -> VariationalResult:
    config = config or SolverConfig()
    p = check_exponent(spec.p)
    try:
        B, values = boundary_arrays(space, spec.boundary, spec.values_array())
    except LinearSolveError as e:
        raise ProblemSpecError(str(e), e.context) from e
    f = spec.f_array(space.n)
    initial = None if spec.initial is None else space.field(spec.initial, "initial")
    run = dirichlet_core(space, p, spec.epsilon, f, B, values, config, initial)
    logger.info(f"poisson-dirichlet p={p}: objective {run.objective:.12g}, KKT {run.kkt_residual:.3e} "
                f"after {run.iterations} iterations")
    return VariationalResult(kind=spec.kind, p=p, solution=run.solution, objective_value=run.objective,
                             kkt_residual=run.kkt_residual, iterations=run.iterations,
                             objective_trace=run.objective_trace)


def solve_poisson_neumann(space: DiscreteMMS, spec: ProblemSpec, config: Optional[SolverConfig] = None) -> VariationalResult:
    config = config or SolverConfig()
    p = check_exponent(spec.p)
    f = spec.f_array(space.n)
    initial = None if spec.initial is None else space.field(spec.initial, "initial")
    run = neumann_core(space, p, spec.epsilon, f, config, initial)
    logger.info(f"poisson-neumann p={p}: objective {run.objective:.12g}, KKT {run.kkt_residual:.3e} "
                f"after {run.iterations} iterations")
    return VariationalResult(kind=spec.kind, p=p, solution=run.solution, objective_value=run.objective,
                             kkt_residual=run.kkt_residual, iterations=run.iterations,
                             objective_trace=run.objective_trace)

# -----------------------------------------------------------------------------
# First eigenvalue
# -----------------------------------------------------------------------------

def rayleigh_quotient(space: DiscreteMMS, u: np.ndarray, p: float) -> float:
    num = float(np.dot(carre_du_champ(space, u) ** (p / 2.0), space.measure))
    den = float(np.dot(np.abs(u) ** p, space.measure))
    return num / den


def _p_normalise(space: DiscreteMMS, u: np.ndarray, p: float) -> np.ndarray:
    return u / space.lp_norm(u, p)


def _retract(space: DiscreteMMS, u: np.ndarray, p: float) -> np.ndarray:
    """Shift u by the constant c with sum phi_p(u - c) m = 0."""
    lo, hi = float(u.min()), float(u.max())
    if hi - lo == 0.0:
        return u - lo
    if p == 2.0:
        return u - space.mean(u)
    c = brentq(lambda c: float(np.dot(phi_p(u - c, p), space.measure)), lo, hi, xtol=1e-15, rtol=4e-16)
    return u - c


def _sign_normalise(u: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(u)))
    return -u if u[k] < 0 else u


def solve_eigen(space: DiscreteMMS, spec: ProblemSpec, config: Optional[SolverConfig] = None) -> VariationalResult:
    """
    Inverse power iteration: each step solves Delta_p v = -phi_p(u), then
    renormalises to unit L^p(m) norm (Neumann: after the constant-shift retraction).
    """
    config = config or SolverConfig()
    opts = config.variational
    p = check_exponent(spec.p)
    neumann = spec.mode == EigenMode.NEUMANN

    if neumann:
        _require_connected(space)
        if space.n < 2:
            raise ProblemSpecError("Neumann eigenproblem needs at least two vertices", {"n": space.n})
        B = np.zeros(0, dtype=np.int64)
        support = np.arange(space.n)
        u = dense_spectrum(space).eigenfields[:, 1].copy()
        u = _retract(space, u, p)
    else:
        B = space.check_vertices(spec.boundary)
        support = interior_of(space, B)
        if support.size == 0:
            raise ProblemSpecError("Dirichlet eigenproblem has no interior vertex", {"boundary": B.tolist()})
        check_boundary_contact(space, B, support)
        u = dense_dirichlet_spectrum(space, B).eigenfields[:, 0].copy()
    if spec.initial is not None:
        u = space.field(spec.initial, "initial").copy()
        u[B] = 0.0
        if neumann:
            u = _retract(space, u, p)
    u = _p_normalise(space, u, p)
    lam = rayleigh_quotient(space, u, p)

    def euler_lagrange(u: np.ndarray, lam: float) -> float:
        r = (p_laplacian(space, u, p, 0.0) + lam * phi_p(u, p))[support]
        return float(np.sqrt(np.dot(r * r, space.measure[support])))

    res = euler_lagrange(u, lam)
    trace = [lam]
    iterations = 0
    while res > opts.eigen_tolerance:
        if iterations >= opts.eigen_max_iterations:
            raise ConvergenceError(f"Eigen iteration did not converge (Euler-Lagrange residual {res:.3e})",
                                   {"eigenvalue": lam, "residual": res, "best_iterate": u, "trace": trace})
        iterations += 1
        rhs = -phi_p(u, p)
        warm = u * lam ** (-1.0 / (p - 1.0))
        if neumann:
            v = neumann_core(space, p, 0.0, rhs - space.mean(rhs), config, warm).solution
            v = _retract(space, v, p)
        else:
            v = dirichlet_core(space, p, 0.0, rhs, B, np.zeros(B.size), config, warm).solution
        u = _p_normalise(space, v, p)
        lam = rayleigh_quotient(space, u, p)
        res = euler_lagrange(u, lam)
        trace.append(lam)
        logger.debug(f"eigen iter {iterations}: lambda={lam:.15g} residual={res:.3e}")

    u = _sign_normalise(u)
    logger.info(f"eigen ({'neumann' if neumann else 'dirichlet'}) p={p}: lambda_1 = {lam:.12g}, "
                f"residual {res:.3e} after {iterations} iterations")
    return VariationalResult(kind=spec.kind, p=p, solution=u, objective_value=lam, kkt_residual=res,
                             iterations=iterations, objective_trace=trace, eigenvalue=lam)

# -----------------------------------------------------------------------------
# Capacity
# -----------------------------------------------------------------------------

def capacity_boundary(space: DiscreteMMS, K, omega) -> Tuple[np.ndarray, np.ndarray]:
    K = space.check_vertices(K)
    omega = space.check_vertices(omega)
    if K.size == 0:
        raise ProblemSpecError("Capacity needs a nonempty compact set K")
    if not np.isin(K, omega).all():
        raise ProblemSpecError("Capacity needs K contained in omega", {"outside": np.setdiff1d(K, omega).tolist()})
    exterior = np.setdiff1d(np.arange(space.n), omega)
    if exterior.size == 0:
        raise ProblemSpecError("Capacity needs omega to be a proper subset of the vertices")
    B = np.concatenate([K, exterior])
    values = np.concatenate([np.ones(K.size), np.zeros(exterior.size)])
    order = np.argsort(B)
    return B[order], values[order]


def solve_capacity(space: DiscreteMMS, spec: ProblemSpec, config: Optional[SolverConfig] = None) -> VariationalResult:
    """p-electrostatic potential: 1 on K, 0 off omega, p-harmonic in between. Cap_p = sum Gamma^(p/2) m."""
    config = config or SolverConfig()
    p = check_exponent(spec.p)
    B, values = capacity_boundary(space, spec.K, spec.omega)
    initial = None if spec.initial is None else space.field(spec.initial, "initial")
    run = dirichlet_core(space, p, 0.0, np.zeros(space.n), B, values, config, initial)
    u = run.solution
    cap = float(np.dot(carre_du_champ(space, u) ** (p / 2.0), space.measure))
    ok = bool(u.min() >= -COMPARISON_TOLERANCE and u.max() <= 1.0 + COMPARISON_TOLERANCE)
    notes = []
    if not ok:
        logger.warning(f"Capacity potential leaves [0, 1]: range [{u.min():.3e}, {u.max():.3e}]")
        notes.append("comparison principle violated")
    logger.info(f"capacity p={p}: Cap_p = {cap:.12g}")
    return VariationalResult(kind=spec.kind, p=p, solution=u, objective_value=cap / p, kkt_residual=run.kkt_residual,
                             iterations=run.iterations, objective_trace=run.objective_trace, capacity=cap,
                             comparison_ok=ok, notes=notes)


SOLVERS = {
    ProblemKind.POISSON_DIRICHLET: solve_poisson_dirichlet,
    ProblemKind.POISSON_NEUMANN: solve_poisson_neumann,
    ProblemKind.EIGEN: solve_eigen,
    ProblemKind.CAPACITY: solve_capacity,
}


def solve(space: DiscreteMMS, spec: ProblemSpec, config: Optional[SolverConfig] = None) -> VariationalResult:
    return SOLVERS[spec.kind](space, spec, config)
