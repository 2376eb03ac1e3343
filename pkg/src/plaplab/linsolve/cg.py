"""
Conjugate gradients in the measure inner product <f, g> = sum f g m.

-Delta is symmetric positive semidefinite for this inner product, so the
classical recurrence applies once the right-hand side is mean-free.
"""
import logging
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse.csgraph as csgraph

from src.plaplab.calculus.gamma import laplacian, stiffness_matrix
from src.plaplab.exceptions import LinearSolveError
from src.plaplab.schemas import LinearSolveOptions
from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)

MEAN_TOLERANCE = 1e-10


def _conjugate_gradient(apply: Callable[[np.ndarray], np.ndarray], b: np.ndarray, weights: np.ndarray,
                        opts: LinearSolveOptions, project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                        x0: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Solve apply(x) = b for a weights-self-adjoint PSD operator.
    Restarts from the true residual every max(50, n) steps; `project`
    (if given) is applied to the iterate and residual at each restart.
    """
    def dot(f, g):
        return float(np.dot(f * g, weights))

    project = project or (lambda v: v)
    n = b.shape[0]
    b_norm = np.sqrt(dot(b, b))
    x = np.zeros(n) if x0 is None else project(np.array(x0, dtype=float))
    if b_norm == 0.0:
        return x
    target = opts.tolerance * b_norm
    restart = max(50, n)

    best_x, best_res = x.copy(), np.inf
    iterations = 0
    while iterations < opts.max_iterations:
        x = project(x)
        r = project(b - apply(x))
        res = np.sqrt(dot(r, r))
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= target:
            logger.debug(f"CG converged in {iterations} iterations, relative residual {res / b_norm:.3e}")
            return x
        d = r.copy()
        rr = res * res
        for _ in range(restart):
            if iterations >= opts.max_iterations:
                break
            iterations += 1
            Ad = apply(d)
            dAd = dot(d, Ad)
            if dAd <= 0.0:
                break
            alpha = rr / dAd
            x = x + alpha * d
            r = r - alpha * Ad
            rr_new = dot(r, r)
            if np.sqrt(rr_new) <= 0.5 * target:
                break
            d = r + (rr_new / rr) * d
            rr = rr_new

    x = project(x)
    res = np.sqrt(dot(project(b - apply(x)), project(b - apply(x))))
    if res <= target:
        return x
    best_res = min(best_res, res)
    raise LinearSolveError(
        f"CG hit the iteration cap ({opts.max_iterations}) at relative residual {best_res / b_norm:.3e}",
        {"best_residual": best_res / b_norm, "tolerance": opts.tolerance, "best_iterate": best_x},
    )


def _mean_free(space: DiscreteMMS) -> Callable[[np.ndarray], np.ndarray]:
    total = float(space.measure.sum())
    return lambda v: v - float(np.dot(v, space.measure)) / total

# -----------------------------------------------------------------------------
# Public solvers
# -----------------------------------------------------------------------------

def solve_zero_mean_poisson(space: DiscreteMMS, h, opts: Optional[LinearSolveOptions] = None,
                            x0: Optional[np.ndarray] = None) -> np.ndarray:
    """U with Delta U = h and sum U m = 0, for mean-free h on a connected space."""
    opts = opts or LinearSolveOptions()
    h = space.field(h, "h")
    if not space.is_connected:
        raise LinearSolveError("Zero-mean Poisson needs a connected space",
                               {"components": space.component_count})
    mass = float(np.dot(h, space.measure))
    scale = float(np.dot(np.abs(h), space.measure))
    if scale == 0.0:
        return np.zeros(space.n)
    if abs(mass) > MEAN_TOLERANCE * scale:
        raise LinearSolveError(f"Right-hand side has nonzero mean: sum h m = {mass:.3e}",
                               {"mean": mass / float(space.measure.sum()), "integral": mass})
    project = _mean_free(space)
    b = -project(h)
    U = _conjugate_gradient(lambda v: -laplacian(space, v), b, space.measure, opts, project, x0)
    return project(U)


def boundary_arrays(space: DiscreteMMS, boundary: Sequence[int],
                    values: Union[Sequence[float], Dict[int, float], np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted boundary indices with their prescribed values; values align with `boundary` order."""
    boundary = [space.check_vertex(x) for x in boundary]
    if isinstance(values, dict):
        vals = [float(values[x]) for x in boundary]
    else:
        vals = [float(v) for v in np.asarray(values, dtype=float).ravel()]
        if len(vals) == space.n and len(boundary) != space.n:
            vals = [vals[x] for x in boundary]
    if len(vals) != len(boundary):
        raise LinearSolveError(f"{len(boundary)} boundary vertices but {len(vals)} boundary values",
                               {"boundary": boundary})
    pairs: Dict[int, float] = {}
    for x, v in zip(boundary, vals):
        if x in pairs and pairs[x] != v:
            raise LinearSolveError(f"Boundary vertex {x} given two values", {"vertex": x})
        pairs[x] = v
    idx = np.array(sorted(pairs), dtype=np.int64)
    return idx, np.array([pairs[x] for x in idx], dtype=float)


def interior_of(space: DiscreteMMS, boundary: np.ndarray) -> np.ndarray:
    mask = np.ones(space.n, dtype=bool)
    mask[boundary] = False
    return np.flatnonzero(mask)


def check_boundary_contact(space: DiscreteMMS, boundary: np.ndarray, interior: np.ndarray) -> None:
    W = space.weight_matrix
    count, labels = csgraph.connected_components(W[interior][:, interior], directed=False)
    touching = np.asarray(W[interior][:, boundary].sum(axis=1)).ravel() > 0
    for c in range(count):
        if not touching[labels == c].any():
            lost = interior[labels == c]
            raise LinearSolveError("Interior component has no boundary contact",
                                   {"component": lost.tolist()[:20]})


def solve_dirichlet_linear(space: DiscreteMMS, boundary: Sequence[int], boundary_values, h=None,
                           opts: Optional[LinearSolveOptions] = None) -> np.ndarray:
    """U equal to boundary_values on the boundary with Delta U = h on the interior."""
    opts = opts or LinearSolveOptions()
    if len(boundary) == 0:
        raise LinearSolveError("Dirichlet problem needs a nonempty boundary")
    B, values = boundary_arrays(space, boundary, boundary_values)
    h = np.zeros(space.n) if h is None else space.field(h, "h")
    U = np.zeros(space.n)
    U[B] = values
    I = interior_of(space, B)
    if I.size == 0:
        return U
    check_boundary_contact(space, B, I)

    S = stiffness_matrix(space)
    S_II = S[I][:, I]
    S_IB = S[I][:, B]
    m_I = space.measure[I]
    b = -h[I] + (S_IB @ values) / m_I
    U[I] = _conjugate_gradient(lambda v: -(S_II @ v) / m_I, b, m_I, opts)
    return U
