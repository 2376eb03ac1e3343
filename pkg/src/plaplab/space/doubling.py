import logging
from typing import Optional, Sequence

import numpy as np
import scipy.sparse.csgraph as csgraph
from pydantic import BaseModel, Field

from src.plaplab.config import BALL_SLACK, DEFAULT_SEED, DOUBLING_SAMPLE_CAP
from src.plaplab.exceptions import SpaceError
from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)


class DoublingReport(BaseModel):
    radius_cap: float
    radii: list
    centers_used: int
    constant_CD: float = Field(ge=1.0)
    fitted_dimension_s: Optional[float] = None
    constant_c_R: Optional[float] = None
    fit_residual: float = Field(default=0.0, ge=0.0)
    pairs_used: int = 0
    degenerate_fit: bool = False


def sample_centers(n: int, seed: int = DEFAULT_SEED, cap: int = DOUBLING_SAMPLE_CAP) -> np.ndarray:
    if n <= cap:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=cap, replace=False))


def doubling_estimates(space: DiscreteMMS, radius_cap: float, radii: Sequence[float],
                       centers: Optional[Sequence[int]] = None, seed: int = DEFAULT_SEED) -> DoublingReport:
    """
    Doubling constant C_D (max of m(B_2r)/m(B_r) over centers and radii r < R)
    and the growth exponent s fitted by least squares of
    log m(B_r1)/m(B_r2) = log c_R + s log(r1/r2) over pairs r1 < r2 <= R.
    """
    grid = sorted({float(r) for r in radii if r > 0})
    if not grid:
        raise SpaceError("Radius grid must contain a positive radius", {"radii": list(radii)})

    if space.edge_count == 0:
        logger.info("Space has no edges; every ball is a single vertex")
        return DoublingReport(radius_cap=float(radius_cap), radii=grid, centers_used=space.n,
                              constant_CD=1.0, degenerate_fit=True)

    resolution = float(space.length.min())
    if radius_cap <= resolution:
        raise SpaceError(f"Radius cap {radius_cap} must exceed the smallest edge length {resolution}",
                         {"radius_cap": radius_cap, "resolution": resolution})
    usable = [r for r in grid if r >= resolution - BALL_SLACK and r <= radius_cap + BALL_SLACK]
    if not usable:
        raise SpaceError("Every radius in the grid is below the edge-length resolution or above the cap",
                         {"radii": grid, "resolution": resolution, "radius_cap": radius_cap})

    if centers is None:
        chosen = sample_centers(space.n, seed)
    else:
        chosen = space.check_vertices(centers)
    limit = 2.0 * max(usable) + 2.0 * BALL_SLACK
    D = csgraph.dijkstra(space.length_matrix, directed=False, indices=chosen, limit=limit)
    D = np.atleast_2d(D)

    def ball_masses(r: float) -> np.ndarray:
        return ((D <= r + BALL_SLACK) * space.measure[None, :]).sum(axis=1)

    constant = 1.0
    for r in usable:
        if r < radius_cap:
            ratio = ball_masses(2.0 * r) / ball_masses(r)
            constant = max(constant, float(ratio.max()))

    masses = {r: ball_masses(r) for r in usable}
    xs, ys = [], []
    for a, r1 in enumerate(usable):
        for r2 in usable[a + 1:]:
            xs.append(np.full(len(chosen), np.log(r1 / r2)))
            ys.append(np.log(masses[r1] / masses[r2]))

    report = DoublingReport(radius_cap=float(radius_cap), radii=usable, centers_used=len(chosen),
                            constant_CD=constant)
    if not xs:
        logger.info("Fewer than two usable radii; dimension fit skipped")
        report.degenerate_fit = True
        return report

    x = np.concatenate(xs)
    y = np.concatenate(ys)
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    residual = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    s = float(coef[1])
    report.pairs_used = int(x.shape[0])
    report.fit_residual = residual
    if not s > 0:
        logger.warning(f"Fitted growth exponent {s:.4g} is not positive; fit flagged degenerate")
        report.degenerate_fit = True
        return report
    report.fitted_dimension_s = s
    report.constant_c_R = float(np.exp(coef[0]))
    logger.info(f"Doubling: C_D={constant:.4g}, s={s:.4g} over {report.pairs_used} samples")
    return report

