import logging
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel

from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)


class MaxPrincipleCheck(BaseModel):
    lower: float
    upper: float
    worst_violation: float
    within_bounds: bool
    strict_interior_extrema: List[int]
    passed: bool


def maximum_principle_check(space: DiscreteMMS, u, boundary: Sequence[int],
                            tolerance: float = 1e-10) -> MaxPrincipleCheck:
    """
    Comparison check for a field that is p-harmonic off `boundary`: values stay in
    [min, max] of the boundary values and no interior vertex is a strict local extremum.
    """
    u = space.field(u, "u")
    B = space.check_vertices(boundary)
    interior = np.setdiff1d(np.arange(space.n), B)
    lower, upper = float(u[B].min()), float(u[B].max())
    violation = float(max(0.0, lower - u.min(), u.max() - upper))

    W = space.weight_matrix
    extrema = []
    for x in interior:
        nbrs = W.indices[W.indptr[x]:W.indptr[x + 1]]
        if nbrs.size == 0:
            continue
        gaps = u[x] - u[nbrs]
        if np.all(gaps > tolerance) or np.all(gaps < -tolerance):
            extrema.append(int(x))
    within = violation <= tolerance
    if not within or extrema:
        logger.warning(f"Maximum principle violated: excess {violation:.3e}, strict extrema at {extrema[:5]}")
    return MaxPrincipleCheck(lower=lower, upper=upper, worst_violation=violation, within_bounds=within,
                             strict_interior_extrema=extrema, passed=within and not extrema)
