from .traces import TRACE_COLUMNS, ContinuationTrace, InnerTrace, OuterTrace, format_trace_table, trace_rows
from .pipeline import (
    empirical_constant, energy_newton_correction, epsilon_continuation, frozen_operator, frozen_operator_matrix,
    inner_rhs, inner_solve, inner_solve_direct, outer_solve, second_order_surrogate, w1p_norm,
)

__all__ = [
    "TRACE_COLUMNS", "ContinuationTrace", "InnerTrace", "OuterTrace", "format_trace_table", "trace_rows",
    "empirical_constant", "energy_newton_correction", "epsilon_continuation", "frozen_operator",
    "frozen_operator_matrix", "inner_rhs", "inner_solve", "inner_solve_direct", "outer_solve",
    "second_order_surrogate", "w1p_norm",
]
