from .gamma import (
    BochnerCheck, Developed, carre_du_champ, developed_operator, gamma, gamma2, gamma_operator,
    hessian_proxy, hessian_proxy_operator, inf_laplacian, laplacian, laplacian_matrix, p_coefficient,
    p_energy, p_energy_gradient, p_energy_hessian, p_laplacian, stiffness_matrix, weak_bochner_check,
)
from .curvature import CurvatureReport, curvature_lower_bound, vertex_curvature
from .fields import format_field, parse_field, read_field, write_field

__all__ = [
    "BochnerCheck", "Developed", "carre_du_champ", "developed_operator", "gamma", "gamma2", "gamma_operator",
    "hessian_proxy", "hessian_proxy_operator", "inf_laplacian", "laplacian", "laplacian_matrix", "p_coefficient",
    "p_energy", "p_energy_gradient", "p_energy_hessian", "p_laplacian", "stiffness_matrix", "weak_bochner_check",
    "CurvatureReport", "curvature_lower_bound", "vertex_curvature",
    "format_field", "parse_field", "read_field", "write_field",
]
