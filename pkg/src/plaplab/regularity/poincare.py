import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.plaplab.calculus.gamma import carre_du_champ, check_exponent
from src.plaplab.config import DEFAULT_SEED, DENSE_CAP
from src.plaplab.exceptions import DomainTooSmallError, ProblemSpecError
from src.plaplab.linsolve.spectrum import dense_dirichlet_spectrum, dense_spectrum
from src.plaplab.regularity.reports import EstimateReport, make_report, space_context
from src.plaplab.schemas import SolverConfig
from src.plaplab.space.mms import DiscreteMMS
from src.plaplab.variational.problems import EigenMode, ProblemKind, make_problem
from src.plaplab.variational.solvers import solve_eigen

logger = logging.getLogger(__name__)

CROSS_CHECK_TOLERANCE = 1e-8
PROBE_EIGENFIELDS = 8
PROBE_RANDOM_FIELDS = 8


class PoincareResult(BaseModel):
    mode: EigenMode
    p: float
    constant: float
    eigenvalue: float
    eigenfield: np.ndarray
    dense_eigenvalue: Optional[float] = None
    cross_check_gap: Optional[float] = None
    notes: List[str] = Field(default_factory=list)

    model_config = ConfigDict(arbitrary_types_allowed=True)


def poincare_constant(space: DiscreteMMS, p: float, mode: EigenMode = EigenMode.NEUMANN,
                      boundary: Sequence[int] = (), config: Optional[SolverConfig] = None) -> PoincareResult:
    """Sharp Poincare constant 1/lambda_1 in the given mode; p = 2 is cross-checked densely."""
    mode = EigenMode(mode)
    spec = make_problem(kind=ProblemKind.EIGEN, p=p, mode=mode, boundary=list(boundary))
    result = solve_eigen(space, spec, config)
    lam = float(result.eigenvalue)

    dense_value, gap, notes = None, None, []
    if spec.p == 2.0 and space.n <= DENSE_CAP:
        if mode == EigenMode.NEUMANN:
            dense_value = float(dense_spectrum(space).eigenvalues[1])
        else:
            dense_value = float(dense_dirichlet_spectrum(space, boundary).eigenvalues[0])
        gap = abs(dense_value - lam)
        if gap > CROSS_CHECK_TOLERANCE * max(1.0, dense_value):
            message = f"cross-check disagreement: eigen solver {lam:.12g} vs dense {dense_value:.12g} (gap {gap:.3e})"
            notes.append(message)
            logger.warning(f"Poincare {message}")
    logger.info(f"Poincare constant ({mode.value}, p={spec.p}): {1.0 / lam:.12g}")
    return PoincareResult(mode=mode, p=spec.p, constant=1.0 / lam, eigenvalue=lam, eigenfield=result.solution,
                          dense_eigenvalue=dense_value, cross_check_gap=gap, notes=notes)

# -----------------------------------------------------------------------------
# Local Sobolev probe
# -----------------------------------------------------------------------------

def sobolev_exponent(p: float, s: float) -> float:
    p = check_exponent(p)
    if not p < s:
        raise ProblemSpecError(f"Sobolev probe needs p < s, got p={p}, s={s}", {"p": p, "s": s})
    return p * s / (s - p)


def _average(values: np.ndarray, m: np.ndarray, members: np.ndarray) -> float:
    return float(np.dot(values[members], m[members]) / m[members].sum())


def _sobolev_sides(space: DiscreteMMS, u: np.ndarray, p: float, p_star: float, inner: np.ndarray,
                   outer: np.ndarray, r: float):
    m = space.measure
    lhs = _average(np.abs(u) ** p_star, m, inner) ** (p / p_star)
    rhs = _average(r ** p * carre_du_champ(space, u) ** (p / 2.0) + np.abs(u) ** p, m, outer)
    return lhs, rhs


def _balls(space: DiscreteMMS, center: int, r: float, dilation: float):
    center = space.check_vertex(center)
    enlarged = 2.0 * dilation * r
    ecc = space.eccentricity(center)
    if enlarged > ecc:
        raise DomainTooSmallError(
            f"Enlarged ball of radius {enlarged:g} around vertex {center} exceeds the space (eccentricity {ecc:g})",
            {"vertex": center, "radius": enlarged, "eccentricity": ecc},
        )
    return space.ball_members(center, r), space.ball_members(center, enlarged)


def sobolev_ratio(space: DiscreteMMS, u, p: float, s: float, center: int, r: float, dilation: float = 1.0) -> float:
    """(avg_{B_r} |u|^p*)^(p/p*) / avg_{B_2lr}(r^p Gamma^(p/2) + |u|^p), p* = ps/(s-p)."""
    p_star = sobolev_exponent(p, s)
    inner, outer = _balls(space, center, r, dilation)
    lhs, rhs = _sobolev_sides(space, space.field(u, "u"), p, p_star, inner, outer, r)
    return lhs / rhs if rhs > 0 else float("nan")


def probe_fields(space: DiscreteMMS, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Columns: the constant field, the lowest Neumann eigenfields, then seeded random fields."""
    columns = [np.ones(space.n)]
    if space.n <= DENSE_CAP:
        spectrum = dense_spectrum(space)
        columns.extend(spectrum.eigenfields[:, k] for k in range(1, min(space.n, PROBE_EIGENFIELDS + 1)))
    rng = np.random.default_rng(seed)
    columns.extend(rng.standard_normal(space.n) for _ in range(PROBE_RANDOM_FIELDS))
    return np.column_stack(columns)


def sobolev_probe(space: DiscreteMMS, p: float, s: float, center: int, r: float, dilation: float = 1.0,
                  seed: int = DEFAULT_SEED) -> EstimateReport:
    """Largest Sobolev ratio over the probe set; the report carries the worst field's two sides."""
    p_star = sobolev_exponent(p, s)
    inner, outer = _balls(space, center, r, dilation)
    best = None
    fields = probe_fields(space, seed)
    for k in range(fields.shape[1]):
        lhs, rhs = _sobolev_sides(space, fields[:, k], p, p_star, inner, outer, r)
        if rhs <= 0:
            continue
        if best is None or lhs / rhs > best[0] / best[1]:
            best = (lhs, rhs, k)
    context = space_context(space, estimate="sobolev", p=p, s=s, center=int(center), radius=r,
                            dilation=dilation, seed=seed, probes=int(fields.shape[1]))
    if best is None:
        return make_report("sobolev", 0.0, 0.0, context, notes=["no probe field is nonzero on the enlarged ball"])
    report = make_report("sobolev", best[0], best[1], context, notes=[f"worst probe {best[2]}", f"p* = {p_star:.6g}"])
    logger.info(f"Sobolev probe at vertex {center}, r={r}: constant {report.empirical_constant:.6g}")
    return report
