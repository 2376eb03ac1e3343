import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.plaplab.calculus.gamma import carre_du_champ
from src.plaplab.exceptions import FieldError, InsufficientDataError
from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)

MIN_PAIRS = 10
ZERO_DIFFERENCE = 1e-14


class HolderFit(BaseModel):
    alpha: Optional[float] = None
    constant: Optional[float] = None
    fit_residual: Optional[float] = None
    pairs_used: int = 0
    degenerate: bool = False
    level_exponents: List[Optional[float]] = Field(default_factory=list)


class LipschitzEstimate(BaseModel):
    constant: float
    max_gradient_modulus: float


def _pair_samples(space: DiscreteMMS, u: np.ndarray, region: np.ndarray):
    """log-distance / log-difference samples over unordered pairs of `region`."""
    scale = max(1.0, float(np.abs(u).max(initial=0.0)))
    xs, ys, total = [], [], 0
    for k, a in enumerate(region[:-1]):
        rest = region[k + 1:]
        d = space.distances_from(int(a))[rest]
        du = np.abs(u[rest] - u[a])
        usable = np.isfinite(d) & (d > 0)
        total += int(usable.sum())
        usable &= du > ZERO_DIFFERENCE * scale
        xs.append(np.log(d[usable]))
        ys.append(np.log(du[usable]))
    if not xs:
        return np.empty(0), np.empty(0), 0
    return np.concatenate(xs), np.concatenate(ys), total


def _fit(x: np.ndarray, y: np.ndarray):
    A = np.column_stack([np.ones_like(x), x])
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    residual = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[1]), float(np.exp(coef[0])), residual


def holder_exponent_fit(spaces: Sequence[DiscreteMMS], fields: Sequence[np.ndarray],
                        regions: Optional[Sequence[Optional[Sequence[int]]]] = None) -> HolderFit:
    """
    Least-squares fit log|u(x) - u(y)| = log C + alpha log d(x, y) over vertex pairs of the
    region at the finest level (last entry). Coarser levels get their own exponent in
    `level_exponents` when they have enough pairs.
    """
    if not spaces or len(spaces) != len(fields):
        raise FieldError("Need one field per refinement level", {"spaces": len(spaces), "fields": len(fields)})
    regions = list(regions) if regions is not None else [None] * len(spaces)

    level_exponents: List[Optional[float]] = []
    finest = None
    for level, (space, u, region) in enumerate(zip(spaces, fields, regions)):
        u = space.field(u, f"u[{level}]")
        members = np.arange(space.n) if region is None else space.check_vertices(region)
        x, y, total = _pair_samples(space, u, members)
        if x.size >= MIN_PAIRS and np.ptp(x) > 0:
            level_exponents.append(_fit(x, y)[0])
        else:
            level_exponents.append(None)
        finest = (x, y, total)

    x, y, total = finest
    if total > 0 and x.size == 0:
        logger.info("Field is constant on the region; Holder fit is degenerate")
        return HolderFit(pairs_used=0, degenerate=True, level_exponents=level_exponents)
    if x.size < MIN_PAIRS:
        raise InsufficientDataError(f"Only {x.size} usable vertex pairs, need at least {MIN_PAIRS}",
                                    {"pairs": int(x.size), "required": MIN_PAIRS})
    if np.ptp(x) == 0:
        raise InsufficientDataError("All usable pairs sit at one distance; the exponent is not identifiable",
                                    {"pairs": int(x.size)})
    alpha, constant, residual = _fit(x, y)
    logger.info(f"Holder fit over {x.size} pairs: alpha = {alpha:.4f}, C = {constant:.4g}")
    return HolderFit(alpha=alpha, constant=constant, fit_residual=residual, pairs_used=int(x.size),
                     level_exponents=level_exponents)


def lipschitz_constant(space: DiscreteMMS, u) -> LipschitzEstimate:
    """max over edges of |u(y) - u(x)| / length, with max sqrt(Gamma(u,u)) alongside."""
    u = space.field(u, "u")
    if space.edge_count == 0:
        return LipschitzEstimate(constant=0.0, max_gradient_modulus=0.0)
    slopes = np.abs(u[space.heads] - u[space.tails]) / space.length
    modulus = np.sqrt(carre_du_champ(space, u))
    return LipschitzEstimate(constant=float(slopes.max()), max_gradient_modulus=float(modulus.max()))
