"""
Empirical Harnack constants for sub- and supersolutions of
Delta_p u = f + g |u|^(p-2) u on a ball.

Both checks certify the differential inequality first, vertex by vertex (the
indicator of each ball vertex is a non-negative test field supported in the
ball), then measure both sides with the measure renormalised so that the
unit ball has mass 1. Constants are reported, never asserted.
"""
import logging
from typing import Tuple, Union

import numpy as np

from src.plaplab.calculus.gamma import check_exponent, p_laplacian
from src.plaplab.exceptions import DomainTooSmallError, HypothesisError, ProblemSpecError
from src.plaplab.regularity.reports import EstimateReport, make_report, space_context
from src.plaplab.schemas import HarnackOptions
from src.plaplab.space.mms import DiscreteMMS

logger = logging.getLogger(__name__)

SUPER_ENLARGEMENT = 35.0
RIGIDITY_TOLERANCE = 1e-10

Data = Union[float, np.ndarray]


def _data(space: DiscreteMMS, v: Data, name: str) -> np.ndarray:
    if np.ndim(v) == 0:
        return np.full(space.n, float(v))
    return space.field(v, name)


def fitted_scale(space: DiscreteMMS, x: int, needed: float, options: HarnackOptions) -> float:
    """Factor applied to every radius so that the largest ball used (radius `needed`) fits."""
    ecc = space.eccentricity(x)
    if needed <= ecc:
        return 1.0
    if not options.scale_to_fit:
        raise DomainTooSmallError(
            f"Ball of radius {needed:g} around vertex {x} exceeds the space (eccentricity {ecc:g})",
            {"vertex": x, "radius": needed, "eccentricity": ecc},
        )
    scale = ecc / needed
    logger.info(f"Scaling Harnack radii by {scale:.4g} to fit eccentricity {ecc:g} at vertex {x}")
    return scale


def certify_inequality(space: DiscreteMMS, u: np.ndarray, p: float, f: np.ndarray, g: np.ndarray,
                       support: np.ndarray, direction: int, tolerance: float) -> None:
    """
    Check direction * (Delta_p u - f - g |u|^(p-2) u) >= 0 against every vertex indicator
    supported in `support`; raises HypothesisError naming the first violating test field.
    """
    lap = p_laplacian(space, u, p, 0.0)
    forcing = f + g * np.sign(u) * np.abs(u) ** (p - 1.0)
    defect = direction * (lap - forcing)[support]
    scale = 1.0 + float(np.max(np.abs(lap[support]), initial=0.0)) + float(np.max(np.abs(forcing[support]), initial=0.0))
    bad = np.flatnonzero(defect < -tolerance * scale)
    if bad.size:
        y = int(support[bad[0]])
        kind = "subsolution" if direction > 0 else "supersolution"
        raise HypothesisError(
            f"u is not a {kind} on the ball: the indicator test field of vertex {y} fails by {-defect[bad[0]]:.3e}",
            {"test_field": f"indicator of vertex {y}", "vertex": y, "defect": float(-defect[bad[0]]),
             "violations": int(bad.size)},
        )


def _normalised_measure(space: DiscreteMMS, unit_ball: np.ndarray) -> np.ndarray:
    return space.measure / float(space.measure[unit_ball].sum())


def _lq(values: np.ndarray, m: np.ndarray, members: np.ndarray, q: float) -> float:
    return float(np.dot(np.abs(values[members]) ** q, m[members]) ** (1.0 / q))


def _forcing_term(f: np.ndarray, m: np.ndarray, members: np.ndarray, p: float, q: float) -> float:
    return _lq(f, m, members, q) ** (1.0 / (p - 1.0))


def _prepare(space: DiscreteMMS, u, x: int, p: float, q: float, f: Data, g: Data
             ) -> Tuple[np.ndarray, int, float, np.ndarray, np.ndarray]:
    u = space.field(u, "u")
    x = space.check_vertex(x)
    p = check_exponent(p)
    if not q >= 1.0:
        raise ProblemSpecError(f"Lebesgue exponent q must be >= 1, got {q}", {"q": q})
    return u, x, p, _data(space, f, "f"), _data(space, g, "g")


def harnack_subsolution(space: DiscreteMMS, u, x: int, p: float, q: float = 2.0, f: Data = 0.0, g: Data = 0.0,
                        options: HarnackOptions = None) -> EstimateReport:
    """
    lhs = max of u over B_{R/2}(x); rhs = ||u+||_{L1(B_R)} + ||f||_{Lq(B_R)}^(1/(p-1)),
    norms taken with m(B_R) = 1.
    """
    options = options or HarnackOptions()
    u, x, p, f, g = _prepare(space, u, x, p, q, f, g)
    scale = fitted_scale(space, x, options.radius, options)
    R = options.radius * scale
    unit_ball = space.ball_members(x, R)
    half_ball = space.ball_members(x, R / 2.0)

    certify_inequality(space, u, p, f, g, unit_ball, +1, options.tolerance)

    m = _normalised_measure(space, unit_ball)
    lhs = float(u[half_ball].max())
    positive_part = float(np.dot(np.maximum(u[unit_ball], 0.0), m[unit_ball]))
    rhs = positive_part + _forcing_term(f, m, unit_ball, p, q)

    context = space_context(space, estimate="harnack-sub", vertex=x, p=p, q=q, radius=R, scale=scale,
                            f_norm=float(np.abs(f).max()), g_norm=float(np.abs(g).max()))
    notes = [f"radius scale {scale:.6g}"] if scale != 1.0 else []
    report = make_report("harnack-sub", lhs, rhs, context, ceiling=options.ceiling, notes=notes)
    logger.info(f"Harnack subsolution at vertex {x}: C1 = {report.empirical_constant}")
    return report


def harnack_supersolution(space: DiscreteMMS, u, x: int, p: float, q: float = 2.0, f: Data = 0.0, g: Data = 0.0,
                          options: HarnackOptions = None) -> EstimateReport:
    """
    lhs = ||u||_{L^m(B_R)} (m = options.lebesgue_exponent); rhs = min of u over B_{R/2}(x)
    + ||f||_{Lq(B_R)}^(1/(p-1)). The inequality is certified on the 35-lambda enlargement.

    When u touches 0 inside the ball and f = g = 0, u must vanish on the whole ball;
    a report whose rigidity check fails is marked as not passed.
    """
    options = options or HarnackOptions()
    u, x, p, f, g = _prepare(space, u, x, p, q, f, g)
    if u.min() < -options.tolerance:
        y = int(np.argmin(u))
        raise HypothesisError(f"Supersolution estimate needs u >= 0; u({y}) = {u[y]:.3e}",
                              {"vertex": y, "value": float(u[y])})

    enlargement = SUPER_ENLARGEMENT * options.dilation
    scale = fitted_scale(space, x, enlargement * options.radius, options)
    R = options.radius * scale
    certified = space.ball_members(x, enlargement * R)
    unit_ball = space.ball_members(x, R)
    half_ball = space.ball_members(x, R / 2.0)

    certify_inequality(space, u, p, f, g, certified, -1, options.tolerance)

    m = _normalised_measure(space, unit_ball)
    lhs = _lq(u, m, unit_ball, options.lebesgue_exponent)
    minimum = float(u[half_ball].min())
    rhs = minimum + _forcing_term(f, m, unit_ball, p, q)

    notes = []
    if scale != 1.0:
        notes.append(f"radius scale {scale:.6g}")
    passed = None
    if minimum <= RIGIDITY_TOLERANCE and not np.any(f[certified]) and not np.any(g[certified]):
        peak = float(u[unit_ball].max())
        rigid = peak <= RIGIDITY_TOLERANCE
        notes.append(f"rigidity {'holds' if rigid else 'violated'}: max on ball {peak:.3e}")
        if not rigid:
            logger.warning(f"Rigidity violated at vertex {x}: supersolution touches 0 but max is {peak:.3e}")
            passed = False

    context = space_context(space, estimate="harnack-super", vertex=x, p=p, q=q, radius=R, scale=scale,
                            dilation=options.dilation, lebesgue_exponent=options.lebesgue_exponent,
                            f_norm=float(np.abs(f).max()), g_norm=float(np.abs(g).max()))
    report = make_report("harnack-super", lhs, rhs, context, ceiling=options.ceiling, notes=notes, passed=passed)
    if report.empirical_constant:
        report.notes.append(f"C2 = {1.0 / report.empirical_constant:.17g}")
    logger.info(f"Harnack supersolution at vertex {x}: lhs/rhs = {report.empirical_constant}")
    return report
