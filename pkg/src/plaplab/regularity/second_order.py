import logging
from typing import Optional, Sequence

import numpy as np

from src.plaplab.calculus.curvature import curvature_lower_bound
from src.plaplab.calculus.gamma import (
    carre_du_champ, check_epsilon, check_exponent, gamma2, hessian_proxy, laplacian, p_laplacian,
    weak_bochner_check,
)
from src.plaplab.exceptions import CertificationError
from src.plaplab.regularity.reports import EstimateReport, make_report, space_context
from src.plaplab.space.mms import DiscreteMMS
from src.plaplab.variational.checks import MaxPrincipleCheck, maximum_principle_check

logger = logging.getLogger(__name__)

CERTIFICATION_TOLERANCE = 1e-8
SURROGATE_NOTE = "scalar surrogate: Gamma(s,s) with s = Gamma(u,u)^((p-1)/2)"


def second_order_check(space: DiscreteMMS, u, p: float, f=None,
                       certification_tolerance: float = CERTIFICATION_TOLERANCE) -> EstimateReport:
    """
    lhs = sum Gamma(s,s) m with s = Gamma(u,u)^((p-1)/2);
    rhs = ||f||^2_{L2(m)} + ||Gamma(u,u)^((p-1)/2)||_{L1(m)}.
    u must solve Delta_p u = f to `certification_tolerance` in L2(m).
    """
    u = space.field(u, "u")
    p = check_exponent(p)
    f = np.zeros(space.n) if f is None else space.field(f, "f")
    residual = space.l2_norm(p_laplacian(space, u, p, 0.0) - f)
    if residual > certification_tolerance:
        raise CertificationError(f"u does not solve Delta_p u = f: residual {residual:.3e} "
                                 f"above {certification_tolerance:.1e}",
                                 {"residual": residual, "tolerance": certification_tolerance})

    s = carre_du_champ(space, u) ** ((p - 1.0) / 2.0)
    lhs = float(np.dot(carre_du_champ(space, s), space.measure))
    rhs = space.l2_norm(f) ** 2 + float(np.dot(s, space.measure))
    context = space_context(space, estimate="second-order", p=p, residual=residual)
    report = make_report("second-order", lhs, rhs, context, notes=[SURROGATE_NOTE])
    logger.info(f"Second-order estimate p={p}: lhs {lhs:.6g}, rhs {rhs:.6g}, C = {report.empirical_constant}")
    return report


def bochner_energy_check(space: DiscreteMMS, u, K: float, tolerance: float = 1e-10) -> EstimateReport:
    """
    Integrated Bochner inequality K sum Gamma(u,u) m <= sum (Delta u)^2 m.
    On a finite graph sum Gamma_2(u) m equals sum (Delta u)^2 m; the gap is recorded.
    """
    u = space.field(u, "u")
    lap = laplacian(space, u)
    lhs = float(K) * float(np.dot(carre_du_champ(space, u), space.measure))
    rhs = float(np.dot(lap * lap, space.measure))
    identity_gap = abs(float(np.dot(gamma2(space, u), space.measure)) - rhs)
    passed = lhs <= rhs + tolerance * max(1.0, abs(rhs))
    context = space_context(space, estimate="bochner-energy", K=float(K))
    report = make_report("bochner-energy", lhs, rhs, context, ceiling=1.0, passed=passed,
                         notes=[f"integrated Gamma_2 identity gap {identity_gap:.3e}"])
    if not passed:
        logger.warning(f"Integrated Bochner inequality fails for K={K}: {lhs:.6g} > {rhs:.6g}")
    return report


def bochner_report(space: DiscreteMMS, K: Optional[float] = None, fields: Optional[np.ndarray] = None,
                   tolerance: float = 1e-10) -> EstimateReport:
    """
    Pointwise weak Bochner check Gamma_2(u) >= K Gamma(u,u) over the columns of `fields`
    (default: the vertex indicators). K = None uses the curvature lower bound of the space.
    The report carries K Gamma(u,u) and Gamma_2(u) at the tightest vertex.
    """
    notes = []
    if K is None:
        K = curvature_lower_bound(space).global_K
        notes.append(f"K from curvature pencil: {K:.17g}")
    if fields is None:
        fields = np.eye(space.n)
    worst = None
    for k in range(fields.shape[1]):
        check = weak_bochner_check(space, fields[:, k], K, tolerance)
        if worst is None or check.margin < worst[0].margin:
            worst = (check, k)
    context = space_context(space, estimate="bochner", K=float(K), fields=int(fields.shape[1]))
    if worst is None:
        return make_report("bochner", 0.0, 0.0, context, passed=True, notes=notes + ["no probe fields"])
    check, k = worst
    u = fields[:, k]
    lhs = float(K) * float(carre_du_champ(space, u)[check.worst_vertex])
    rhs = float(gamma2(space, u)[check.worst_vertex])
    notes.append(f"tightest field {k} at vertex {check.worst_vertex}, margin {check.margin:.3e}")
    report = make_report("bochner", lhs, rhs, context, passed=check.passed, notes=notes)
    if not check.passed:
        logger.warning(f"Weak Bochner inequality fails for K={K}: margin {check.margin:.3e}")
    return report


def calderon_zygmund_probe(space: DiscreteMMS, U, w, eps: float) -> EstimateReport:
    """||H_U[w] / (Gamma(w,w) + eps)||_{L2(m)} against ||Delta U||_{L2(m)}."""
    eps = check_epsilon(eps, strict=True)
    U = space.field(U, "U")
    w = space.field(w, "w")
    lhs = space.l2_norm(hessian_proxy(space, U, w) / (carre_du_champ(space, w) + eps))
    rhs = space.l2_norm(laplacian(space, U))
    context = space_context(space, estimate="calderon-zygmund", epsilon=eps)
    return make_report("calderon-zygmund", lhs, rhs, context)


def maximum_principle_report(space: DiscreteMMS, u, boundary: Sequence[int],
                             tolerance: float = 1e-10) -> EstimateReport:
    """Range of u against the range of its boundary values; passes iff the comparison check does."""
    u = space.field(u, "u")
    check: MaxPrincipleCheck = maximum_principle_check(space, u, boundary, tolerance)
    lhs = float(u.max() - u.min())
    rhs = check.upper - check.lower
    notes = [f"worst violation {check.worst_violation:.3e}"]
    if check.strict_interior_extrema:
        notes.append(f"strict interior extrema at {check.strict_interior_extrema[:10]}")
    context = space_context(space, estimate="max-principle", boundary=sorted(int(b) for b in boundary))
    return make_report("max-principle", lhs, rhs, context, passed=check.passed, notes=notes)
