"""
Epsilon-regularized fixed-point pipeline for Delta_p u = f.

inner_solve    Picard iteration for the frozen-coefficient equation L_{w,eps} U = g - mean
outer_solve    damped iteration w <- (1 - theta) w + theta U(w) until Delta_{p,eps} w = f
epsilon_continuation   warm-started outer solves along eps_k = eps0 rho^k, certified at eps = 0
"""
import logging
import warnings
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from src.plaplab.calculus.gamma import (
    carre_du_champ, check_epsilon, check_exponent, developed_operator, hessian_proxy, hessian_proxy_operator,
    laplacian, laplacian_matrix, p_energy_hessian, p_laplacian,
)
from src.plaplab.exceptions import (
    CertificationError, ConvergenceError, InnerDivergenceError, PlapLabError, ProblemSpecError, StagnationError,
)
from src.plaplab.fixedpoint.traces import ContinuationTrace, InnerTrace, OuterTrace
from src.plaplab.linsolve.cg import solve_zero_mean_poisson
from src.plaplab.schemas import SolverConfig
from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)

MEAN_TOLERANCE = 1e-10


def _check_problem(space: DiscreteMMS, f, p: float) -> Tuple[np.ndarray, float]:
    p = check_exponent(p)
    if not p < 3.0:
        raise ProblemSpecError(f"The fixed-point pipeline needs p in (1, 3), got {p}", {"p": p, "constraint": "(1, 3)"})
    if not space.is_connected:
        raise ProblemSpecError("The fixed-point pipeline needs a connected space",
                               {"components": space.component_count})
    f = space.field(f, "f")
    mass = float(np.dot(f, space.measure))
    scale = float(np.dot(np.abs(f), space.measure))
    if scale > 0 and abs(mass) > MEAN_TOLERANCE * scale:
        raise ProblemSpecError(f"Right-hand side must have zero mean: sum f m = {mass:.3e}", {"integral": mass})
    return f - mass / float(space.measure.sum()), p


def w1p_norm(space: DiscreteMMS, u, p: float) -> float:
    """(sum |u|^p m + sum Gamma(u,u)^(p/2) m)^(1/p)."""
    u = space.field(u, "u")
    total = np.dot(np.abs(u) ** p, space.measure) + np.dot(carre_du_champ(space, u) ** (p / 2.0), space.measure)
    return float(total ** (1.0 / p))


def second_order_surrogate(space: DiscreteMMS, u, p: float, eps: float = 0.0) -> float:
    """sum Gamma(s, s) m with s = (Gamma(u,u) + eps)^((p-1)/2)."""
    s = (carre_du_champ(space, u) + eps) ** ((p - 1.0) / 2.0)
    return float(np.dot(carre_du_champ(space, s), space.measure))


def empirical_constant(space: DiscreteMMS, u, p: float, f, surrogate: float) -> Optional[float]:
    rhs = space.l2_norm(f) ** 2 + float(np.dot(carre_du_champ(space, u) ** ((p - 1.0) / 2.0), space.measure))
    return surrogate / rhs if rhs > 0 else None

# -----------------------------------------------------------------------------
# Frozen operator
# -----------------------------------------------------------------------------

def frozen_operator(space: DiscreteMMS, U, w, p: float, eps: float) -> np.ndarray:
    """L_{w,eps}(U) = Delta U + (p-2) H_U[w] / (Gamma(w,w) + eps)."""
    eps = check_epsilon(eps, strict=True)
    U = space.field(U, "U")
    return laplacian(space, U) + (p - 2.0) * hessian_proxy(space, U, w) / (carre_du_champ(space, w) + eps)


def frozen_operator_matrix(space: DiscreteMMS, w, p: float, eps: float) -> sparse.csr_matrix:
    eps = check_epsilon(eps, strict=True)
    L = laplacian_matrix(space)
    if p == 2.0:
        return L
    scale = sparse.diags((p - 2.0) / (carre_du_champ(space, w) + eps))
    return (L + scale @ hessian_proxy_operator(space, w)).tocsr()


def inner_rhs(space: DiscreteMMS, f: np.ndarray, w: np.ndarray, p: float, eps: float,
              develop_correction: bool = True) -> np.ndarray:
    """
    g = f (Gamma(w,w) + eps)^(-(p-2)/2); with the develop correction the
    develop-identity residual of w is subtracted from f first.
    """
    G = carre_du_champ(space, w)
    if develop_correction and p != 2.0:
        f = f - developed_operator(space, w, p, eps).residual
    return f * (G + eps) ** (-(p - 2.0) / 2.0)


def _inner_finish(space: DiscreteMMS, U: np.ndarray, g: np.ndarray, w: np.ndarray, p: float, eps: float,
                  trace: InnerTrace) -> InnerTrace:
    LU = frozen_operator(space, U, w, p, eps)
    lam = space.mean(g - LU)
    defect = LU - (g - lam)
    trace.final_equation_residual = space.l2_norm(defect)
    trace.mean_correction = lam
    trace.rhs_norm = space.l2_norm(g)
    trace.solution_laplacian_norm = space.l2_norm(laplacian(space, U))
    kappa = abs(p - 2.0)
    trace.bound_check = bool(trace.solution_laplacian_norm <= trace.rhs_norm / (1.0 - kappa) + 1e-9)
    return trace

# -----------------------------------------------------------------------------
# Inner solve
# -----------------------------------------------------------------------------

def inner_solve(space: DiscreteMMS, f, w, p: float, eps: float, config: Optional[SolverConfig] = None,
                g: Optional[np.ndarray] = None) -> Tuple[np.ndarray, InnerTrace]:
    """
    Picard iteration U_{k+1} = Delta^{-1}(q_k - mean q_k), q_k = g - (p-2) H_{U_k}[w] / (Gamma(w,w) + eps),
    from U_0 = 0. Stops when ||Delta(U_{k+1} - U_k)|| drops below the inner tolerance
    (scaled by max(1, ||g||)). Raises InnerDivergenceError after `divergence_window`
    consecutive ratios above 1.
    """
    config = config or SolverConfig()
    opts = config.fixedpoint
    f, p = _check_problem(space, f, p)
    eps = check_epsilon(eps, strict=True)
    w = space.field(w, "w")
    if g is None:
        g = inner_rhs(space, f, w, p, eps, opts.develop_correction)
    linear = config.inner_linear()
    tol = opts.resolved_inner_tolerance * max(1.0, space.l2_norm(g))
    kappa = abs(p - 2.0)
    trace = InnerTrace()

    if p == 2.0:
        U = solve_zero_mean_poisson(space, g - space.mean(g), linear)
        trace.iterations = 1
        return U, _inner_finish(space, U, g, w, p, eps, trace)

    H = hessian_proxy_operator(space, w)
    scale = (p - 2.0) / (carre_du_champ(space, w) + eps)
    U = np.zeros(space.n)
    previous = None
    above = 0
    while True:
        if trace.iterations >= opts.max_inner_iterations:
            raise ConvergenceError(f"Inner iteration hit its cap ({opts.max_inner_iterations})",
                                   {"inner_trace": trace, "best_iterate": U})
        q = g - scale * (H @ U)
        U_next = solve_zero_mean_poisson(space, q - space.mean(q), linear, x0=U)
        step = space.l2_norm(laplacian(space, U_next - U))
        trace.iterations += 1
        trace.increments.append(step)
        if previous is not None and previous > 0:
            ratio = step / previous
            trace.contraction_ratios.append(ratio)
            above = above + 1 if ratio > 1.0 else 0
            if above >= opts.divergence_window:
                raise InnerDivergenceError(
                    f"Inner iteration diverging: contraction ratio above 1 for {above} consecutive steps",
                    {"inner_trace": trace, "best_iterate": U},
                )
        U, previous = U_next, step
        if step < tol:
            break

    if trace.contraction_ratios[1:] and max(trace.contraction_ratios[1:]) > kappa:
        trace.ratios_within_reference = False
        logger.debug(f"Inner contraction ratio {max(trace.contraction_ratios[1:]):.3f} exceeds |p-2| = {kappa:.3f}")
    return U, _inner_finish(space, U, g, w, p, eps, trace)


def inner_solve_direct(space: DiscreteMMS, f, w, p: float, eps: float, config: Optional[SolverConfig] = None,
                       g: Optional[np.ndarray] = None) -> Tuple[np.ndarray, InnerTrace]:
    """Bordered sparse solve of L_{w,eps} U + lambda = g, sum U m = 0."""
    config = config or SolverConfig()
    f, p = _check_problem(space, f, p)
    eps = check_epsilon(eps, strict=True)
    w = space.field(w, "w")
    if g is None:
        g = inner_rhs(space, f, w, p, eps, config.fixedpoint.develop_correction)
    L = frozen_operator_matrix(space, w, p, eps)
    ones = sparse.csr_matrix(np.ones((space.n, 1)))
    mass = sparse.csr_matrix(space.measure.reshape(1, -1))
    A = sparse.bmat([[L, ones], [mass, None]], format="csc")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MatrixRankWarning)
        sol = spsolve(A, np.concatenate([g, [0.0]]))
    U = np.asarray(sol[:space.n])
    if not np.all(np.isfinite(U)):
        raise InnerDivergenceError("Frozen-coefficient operator is singular", {"epsilon": eps, "p": p})
    U = U - space.mean(U)
    trace = InnerTrace(method="direct", iterations=1)
    return U, _inner_finish(space, U, g, w, p, eps, trace)

# -----------------------------------------------------------------------------
# Outer solve
# -----------------------------------------------------------------------------

def energy_newton_correction(space: DiscreteMMS, w: np.ndarray, f: np.ndarray, p: float, eps: float,
                             max_halvings: int = 40) -> Optional[np.ndarray]:
    """
    One Newton step on the eps-regularized energy with zero-mean border, halved until
    ||Delta_{p,eps} w - f|| decreases. Returns None when no halving helps.
    """
    r = p_laplacian(space, w, p, eps) - f
    res = space.l2_norm(r)
    H = p_energy_hessian(space, w, p, eps)
    border = sparse.csr_matrix(space.measure.reshape(-1, 1))
    A = sparse.bmat([[H, border], [border.T, None]], format="csc")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MatrixRankWarning)
        sol = spsolve(A, np.concatenate([space.measure * r, [0.0]]))
    d = np.asarray(sol[:space.n])
    if not np.all(np.isfinite(d)):
        return None
    t = 1.0
    for _ in range(max_halvings):
        candidate = w + t * d
        if space.l2_norm(p_laplacian(space, candidate, p, eps) - f) < res:
            return candidate - space.mean(candidate)
        t *= 0.5
    return None


def outer_solve(space: DiscreteMMS, f, p: float, eps: float, config: Optional[SolverConfig] = None,
                initial=None) -> Tuple[np.ndarray, OuterTrace]:
    """
    Damped fixed-point loop for Delta_{p,eps} u = f. theta is halved (retrying from the
    same w) while the residual does not decrease and reset to 1 after an accepted step.
    A step that stagnates or improves the residual by less than `slow_ratio` is counted as
    slow. With `outer_fallback` it is replaced by one Newton correction on the eps-energy;
    without it the damped step is kept and a stagnated one raises StagnationError. Inner
    fallbacks, slow steps and Newton corrections are all counted in the trace.
    """
    config = config or SolverConfig()
    opts = config.fixedpoint
    f, p = _check_problem(space, f, p)
    eps = check_epsilon(eps, strict=True)

    def residual(v: np.ndarray) -> float:
        return space.l2_norm(p_laplacian(space, v, p, eps) - f)

    w = np.zeros(space.n) if initial is None else space.field(initial, "initial").copy()
    w -= space.mean(w)
    res = residual(w)
    trace = OuterTrace(epsilon=eps, initial_residual=res)

    while res >= opts.outer_tolerance:
        if trace.iterations >= opts.max_outer_iterations:
            raise ConvergenceError(f"Outer iteration hit its cap ({opts.max_outer_iterations}) at residual {res:.3e}",
                                   {"outer_trace": trace, "best_iterate": w})
        try:
            U, inner = inner_solve(space, f, w, p, eps, config)
        except (InnerDivergenceError, ConvergenceError) as e:
            if not opts.inner_fallback:
                e.context.setdefault("outer_trace", trace)
                raise
            logger.debug(f"Inner iteration failed at eps={eps:.3g} ({e}); using the direct frozen solve")
            U, inner = inner_solve_direct(space, f, w, p, eps, config)
            trace.fallbacks += 1

        theta = 1.0
        candidate, r = None, None
        while True:
            trial = (1.0 - theta) * w + theta * U
            r_trial = residual(trial)
            if p == 2.0 or r_trial < res:
                candidate, r = trial, r_trial
                break
            theta *= 0.5
            if theta < opts.theta_min:
                break

        slow = p != 2.0 and (candidate is None or r > opts.slow_ratio * res)
        kind = "damped"
        if slow:
            trace.slow_steps += 1
        if slow and opts.outer_fallback:
            corrected = energy_newton_correction(space, w, f, p, eps)
            if corrected is not None:
                candidate, r = corrected, residual(corrected)
                kind = "newton"
                trace.newton_corrections += 1
                logger.debug(f"eps={eps:.3g}: Newton correction taken at outer iteration {trace.iterations + 1}")
        if candidate is None:
            raise StagnationError(f"Outer damping fell below {opts.theta_min} at residual {res:.3e}",
                                  {"outer_trace": trace, "best_iterate": w, "slow_steps": trace.slow_steps})

        w, res = candidate, r
        trace.iterations += 1
        trace.damping_used.append(theta)
        trace.residual_trace.append(res)
        trace.inner.append(inner)
        trace.step_kinds.append(kind)
        logger.debug(f"outer eps={eps:.3g} iter {trace.iterations}: residual {res:.3e} theta {theta:g}")
        if p == 2.0:
            break

    w = w - space.mean(w)
    a = (carre_du_champ(space, w) + eps) ** ((p - 2.0) / 2.0)
    g = inner_rhs(space, f, w, p, eps, opts.develop_correction)
    trace.lambda_u = space.mean(g - frozen_operator(space, w, w, p, eps))
    trace.lambda_u_vanishes = bool(abs(trace.lambda_u) <= 10.0 * max(res, opts.outer_tolerance) / float(a.min()))
    if not trace.lambda_u_vanishes:
        logger.warning(f"Mean correction lambda_u = {trace.lambda_u:.3e} does not vanish at eps={eps:.3g}")
    trace.develop_residual_norm = space.l2_norm(developed_operator(space, w, p, eps).residual)
    trace.second_order_surrogate = second_order_surrogate(space, w, p, eps)
    if trace.residual_trace:
        trace.residual_trace[-1] = residual(w)
    trace.converged = True
    return w, trace

# -----------------------------------------------------------------------------
# Continuation
# -----------------------------------------------------------------------------

def epsilon_continuation(space: DiscreteMMS, f, p: float, config: Optional[SolverConfig] = None,
                         initial=None) -> Tuple[np.ndarray, ContinuationTrace]:
    """
    Outer solves along eps_k = eps0 rho^k with warm starts. Stops below eps_min, or once the
    W^{1,p} increment is under `increment_tolerance` and the eps = 0 residual is already certified.
    """
    config = config or SolverConfig()
    opts = config.fixedpoint
    f, p = _check_problem(space, f, p)
    schedule = opts.schedule()
    if p == 2.0:
        schedule = schedule[:1]
    trace = ContinuationTrace(p=p)

    def certify(v: np.ndarray) -> float:
        return space.l2_norm(p_laplacian(space, v, p, 0.0) - f)

    u = initial
    for eps in schedule:
        try:
            u_next, outer = outer_solve(space, f, p, eps, config, initial=u)
        except PlapLabError as e:
            e.context["continuation_trace"] = trace
            e.context.update(trace.step_counts())
            logger.error(f"Continuation failed at eps={eps:.3g}: {e}")
            raise
        trace.epsilon_schedule.append(eps)
        trace.stages.append(outer)
        trace.surrogates.append(outer.second_order_surrogate)
        trace.empirical_constants.append(empirical_constant(space, u_next, p, f, outer.second_order_surrogate))
        increment = None
        if u is not None:
            increment = w1p_norm(space, u_next - u, p)
            trace.W1p_increments.append(increment)
        u = u_next
        logger.info(f"eps={eps:.3e}: {outer.iterations} outer iterations, residual {outer.residual_trace[-1]:.3e}"
                    + (f", W1p increment {increment:.3e}" if increment is not None else ""))
        if increment is not None and increment < opts.increment_tolerance and certify(u) < opts.final_tolerance:
            trace.stop_reason = "increment stalled"
            break
    else:
        trace.stop_reason = "single stage" if p == 2.0 else "schedule exhausted"

    trace.final_plap_residual = certify(u)
    s0 = second_order_surrogate(space, u, p, 0.0)
    trace.final_surrogate = s0
    trace.final_empirical_constant = empirical_constant(space, u, p, f, s0)
    counts = trace.step_counts()
    if counts["newton_corrections"] or counts["inner_fallbacks"]:
        logger.warning(f"Continuation used {counts['newton_corrections']} Newton corrections and "
                       f"{counts['inner_fallbacks']} direct inner solves in {counts['outer_iterations']} outer steps")
    if not trace.final_plap_residual < opts.final_tolerance:
        raise CertificationError(
            f"Continuation result fails certification: ||Delta_p u - f|| = {trace.final_plap_residual:.3e}",
            {"continuation_trace": trace, "best_iterate": u, **counts},
        )
    logger.info(f"Continuation certified at residual {trace.final_plap_residual:.3e} ({trace.stop_reason})")
    return u, trace
