from .reports import EstimateReport, format_reports, make_report, sort_reports, space_context
from .harnack import certify_inequality, harnack_subsolution, harnack_supersolution
from .holder import HolderFit, LipschitzEstimate, holder_exponent_fit, lipschitz_constant
from .poincare import PoincareResult, poincare_constant, probe_fields, sobolev_exponent, sobolev_probe, sobolev_ratio
from .second_order import (
    bochner_energy_check, bochner_report, calderon_zygmund_probe, maximum_principle_check,
    maximum_principle_report, second_order_check,
)

__all__ = [
    "EstimateReport", "format_reports", "make_report", "sort_reports", "space_context",
    "certify_inequality", "harnack_subsolution", "harnack_supersolution",
    "HolderFit", "LipschitzEstimate", "holder_exponent_fit", "lipschitz_constant",
    "PoincareResult", "poincare_constant", "probe_fields", "sobolev_exponent", "sobolev_probe", "sobolev_ratio",
    "bochner_energy_check", "bochner_report", "calderon_zygmund_probe", "maximum_principle_check",
    "maximum_principle_report", "second_order_check",
]
