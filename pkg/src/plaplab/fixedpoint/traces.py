# traces.py
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

TRACE_COLUMNS = ("stage", "epsilon", "index", "residual", "ratio", "theta", "inner", "step", "surrogate")

# -----------------------------------------------------------------------------
# 1. Inner frozen-coefficient solve
# -----------------------------------------------------------------------------
class InnerTrace(BaseModel):
    method: str = "picard"
    iterations: int = 0
    contraction_ratios: List[float] = Field(default_factory=list)
    increments: List[float] = Field(default_factory=list)
    final_equation_residual: float = 0.0
    mean_correction: float = 0.0
    rhs_norm: float = 0.0
    solution_laplacian_norm: float = 0.0
    bound_check: bool = True
    ratios_within_reference: bool = True

    @property
    def max_ratio(self) -> Optional[float]:
        return max(self.contraction_ratios) if self.contraction_ratios else None

# -----------------------------------------------------------------------------
# 2. Outer damped fixed-point loop
# -----------------------------------------------------------------------------
class OuterTrace(BaseModel):
    epsilon: float
    iterations: int = 0
    initial_residual: Optional[float] = None
    damping_used: List[float] = Field(default_factory=list)
    residual_trace: List[float] = Field(default_factory=list)
    inner: List[InnerTrace] = Field(default_factory=list)
    # "damped" or "newton", one per accepted outer step
    step_kinds: List[str] = Field(default_factory=list)
    fallbacks: int = 0
    newton_corrections: int = 0
    slow_steps: int = 0
    lambda_u: Optional[float] = None
    lambda_u_vanishes: Optional[bool] = None
    develop_residual_norm: Optional[float] = None
    second_order_surrogate: Optional[float] = None
    converged: bool = False

# -----------------------------------------------------------------------------
# 3. Epsilon continuation
# -----------------------------------------------------------------------------
class ContinuationTrace(BaseModel):
    p: float
    epsilon_schedule: List[float] = Field(default_factory=list)
    stages: List[OuterTrace] = Field(default_factory=list)
    W1p_increments: List[float] = Field(default_factory=list)
    surrogates: List[float] = Field(default_factory=list)
    empirical_constants: List[float] = Field(default_factory=list)
    final_surrogate: Optional[float] = None
    final_empirical_constant: Optional[float] = None
    final_plap_residual: Optional[float] = None
    stop_reason: str = ""

    @property
    def outer_iterations(self) -> int:
        return sum(stage.iterations for stage in self.stages)

    @property
    def fallbacks(self) -> int:
        return sum(stage.fallbacks for stage in self.stages)

    @property
    def newton_corrections(self) -> int:
        return sum(stage.newton_corrections for stage in self.stages)

    @property
    def slow_steps(self) -> int:
        return sum(stage.slow_steps for stage in self.stages)

    def step_counts(self) -> Dict[str, int]:
        """Outer-step accounting written next to every fixed-point result."""
        return {
            "outer_iterations": self.outer_iterations,
            "inner_fallbacks": self.fallbacks,
            "newton_corrections": self.newton_corrections,
            "slow_steps": self.slow_steps,
        }


def trace_rows(trace: ContinuationTrace) -> List[Dict[str, object]]:
    """One record per outer iteration, in schedule order."""
    rows = []
    for stage, outer in enumerate(trace.stages):
        surrogate = outer.second_order_surrogate
        for k, residual in enumerate(outer.residual_trace):
            inner = outer.inner[k] if k < len(outer.inner) else None
            rows.append({
                "stage": stage,
                "epsilon": outer.epsilon,
                "index": k,
                "residual": residual,
                "ratio": inner.max_ratio if inner is not None else None,
                "theta": outer.damping_used[k] if k < len(outer.damping_used) else None,
                "inner": inner.method if inner is not None else None,
                "step": outer.step_kinds[k] if k < len(outer.step_kinds) else None,
                "surrogate": surrogate,
            })
    return rows


def _cell(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def format_trace_table(trace: ContinuationTrace) -> str:
    """Tab-separated, header row, columns as in TRACE_COLUMNS; missing values are 'nan'."""
    lines = ["\t".join(TRACE_COLUMNS)]
    for row in trace_rows(trace):
        lines.append("\t".join(_cell(row[c]) for c in TRACE_COLUMNS))
    return "\n".join(lines) + "\n"
