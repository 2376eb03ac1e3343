"""
Damped Newton minimization of the discrete p-energy

    F(u) = (1/p) sum (Gamma(u,u) + eps)^(p/2) m + sum_free f u m

over the free vertices, with the remaining vertices held fixed (Dirichlet)
or with the zero-mean constraint enforced through a bordered system (Neumann).
Stationarity is Delta_{p,eps} u = f on the free set.
"""
import logging
import warnings
from typing import List, NamedTuple, Optional

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from src.plaplab.calculus.gamma import p_energy, p_energy_hessian, p_laplacian
from src.plaplab.exceptions import ConvergenceError
from src.plaplab.schemas import VariationalOptions
from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)

ROUNDOFF = 1e-13


class Minimization(NamedTuple):
    solution: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    objective_trace: List[float]


class EnergyProblem:
    def __init__(self, space: DiscreteMMS, p: float, eps: float, f: np.ndarray,
                 free: np.ndarray, neumann: bool = False):
        self.space = space
        self.p = p
        self.eps = eps
        self.f = f
        self.free = free
        self.neumann = neumann
        self.m_free = space.measure[free]

    def objective(self, u: np.ndarray) -> float:
        return p_energy(self.space, u, self.p, self.eps) + float(np.dot(self.f[self.free] * u[self.free], self.m_free))

    def defect(self, u: np.ndarray) -> np.ndarray:
        """(Delta_{p,eps} u - f) on the free set."""
        return (p_laplacian(self.space, u, self.p, self.eps) - self.f)[self.free]

    def kkt_residual(self, u: np.ndarray) -> float:
        d = self.defect(u)
        return float(np.sqrt(np.dot(d * d, self.m_free)))

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return -self.m_free * self.defect(u)

    def newton_direction(self, u: np.ndarray, g: np.ndarray) -> Optional[np.ndarray]:
        H = p_energy_hessian(self.space, u, self.p, self.eps)
        H = H[self.free][:, self.free]
        k = self.free.shape[0]
        if self.neumann:
            border = sparse.csr_matrix(self.m_free.reshape(-1, 1))
            A = sparse.bmat([[H, border], [border.T, None]], format="csc")
            rhs = np.concatenate([-g, [0.0]])
        else:
            A, rhs = H.tocsc(), -g
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MatrixRankWarning)
            try:
                sol = spsolve(A, rhs)
            except RuntimeError:
                return None
        d = np.atleast_1d(sol)[:k]
        if not np.all(np.isfinite(d)):
            return None
        return d

    def gradient_direction(self, g: np.ndarray) -> np.ndarray:
        return -g / self.m_free


def minimize_energy(problem: EnergyProblem, u0: np.ndarray, opts: VariationalOptions) -> Minimization:
    """Newton with Armijo backtracking; gradient steps where Newton fails to descend."""
    u = np.array(u0, dtype=float)
    F = problem.objective(u)
    res = problem.kkt_residual(u)
    trace = [F]
    iterations = 0

    def armijo(direction: np.ndarray, g: np.ndarray) -> Optional[tuple]:
        slope = float(np.dot(g, direction))
        if not slope < 0:
            return None
        t = 1.0
        for _ in range(opts.max_backtracks):
            trial = u.copy()
            trial[problem.free] += t * direction
            F_t = problem.objective(trial)
            if np.isfinite(F_t) and F_t <= F + opts.armijo_c * t * slope:
                return trial, F_t
            t *= opts.backtrack
        return None

    def relaxed(directions: list) -> Optional[tuple]:
        # Objective differences are below roundoff: accept any non-increasing step that lowers the residual.
        slack = ROUNDOFF * max(1.0, abs(F))
        for direction in directions:
            t = 1.0
            for _ in range(opts.max_backtracks):
                trial = u.copy()
                trial[problem.free] += t * direction
                F_t = problem.objective(trial)
                if np.isfinite(F_t) and F_t <= F + slack and problem.kkt_residual(trial) < res:
                    return trial, F_t
                t *= opts.backtrack
        return None

    while res > opts.tolerance:
        if iterations >= opts.max_iterations:
            raise ConvergenceError(
                f"Energy minimization did not converge in {opts.max_iterations} iterations "
                f"(KKT residual {res:.3e})",
                {"best_objective": F, "gradient_norm": res, "best_iterate": u, "objective_trace": trace},
            )
        iterations += 1
        g = problem.gradient(u)
        grad_dir = problem.gradient_direction(g)
        newton_dir = problem.newton_direction(u, g)
        step = armijo(newton_dir, g) if newton_dir is not None else None
        if step is None:
            logger.debug(f"Newton step rejected at iteration {iterations}; trying gradient descent")
            step = armijo(grad_dir, g)
        if step is None:
            step = relaxed([d for d in (newton_dir, grad_dir) if d is not None])
        if step is None:
            raise ConvergenceError(
                f"Line search failed at iteration {iterations} (KKT residual {res:.3e})",
                {"best_objective": F, "gradient_norm": res, "best_iterate": u, "objective_trace": trace},
            )
        u, F = step
        res = problem.kkt_residual(u)
        trace.append(F)
        logger.debug(f"iter {iterations}: F={F:.16g} residual={res:.3e}")

    return Minimization(u, F, res, iterations, trace)
