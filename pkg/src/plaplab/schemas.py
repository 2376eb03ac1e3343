# schemas.py
from pathlib import Path
from typing import Any, Dict, Optional
from pydantic import BaseModel, Field, ConfigDict, model_validator

# -----------------------------------------------------------------------------
# 1. Linear solves
# -----------------------------------------------------------------------------
class LinearSolveOptions(BaseModel):
    tolerance: float = Field(default=1e-12, gt=0.0, lt=1.0, description="relative residual")
    max_iterations: int = Field(default=20000, gt=0)

    model_config = ConfigDict(frozen=True)

# -----------------------------------------------------------------------------
# 2. Direct-method (variational) solves
# -----------------------------------------------------------------------------
class VariationalOptions(BaseModel):
    tolerance: float = Field(default=1e-10, gt=0.0, lt=1.0, description="KKT residual in L2(m)")
    max_iterations: int = Field(default=200, gt=0)
    armijo_c: float = Field(default=1e-4, gt=0.0, lt=0.5)
    backtrack: float = Field(default=0.5, gt=0.0, lt=1.0)
    max_backtracks: int = Field(default=60, gt=0)
    eigen_tolerance: float = Field(default=1e-9, gt=0.0, lt=1.0)
    eigen_max_iterations: int = Field(default=500, gt=0)

    model_config = ConfigDict(frozen=True)

# -----------------------------------------------------------------------------
# 3. Fixed-point pipeline
# -----------------------------------------------------------------------------
class FixedPointOptions(BaseModel):
    eps0: float = Field(default=1.0, gt=0.0)
    rho: float = Field(default=0.3, gt=0.0, lt=1.0)
    eps_min: float = Field(default=1e-10, gt=0.0)
    final_tolerance: float = Field(default=1e-8, gt=0.0)
    outer_tolerance: float = Field(default=1e-11, gt=0.0)
    inner_tolerance: Optional[float] = Field(default=None, gt=0.0)
    increment_tolerance: float = Field(default=1e-9, ge=0.0)
    max_outer_iterations: int = Field(default=300, gt=0)
    max_inner_iterations: int = Field(default=500, gt=0)
    theta_min: float = Field(default=1e-6, gt=0.0, lt=1.0)
    divergence_window: int = Field(default=5, gt=0)
    develop_correction: bool = True
    inner_fallback: bool = True
    outer_fallback: bool = True
    slow_ratio: float = Field(default=0.99, gt=0.0, lt=1.0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_schedule(self) -> "FixedPointOptions":
        if self.eps_min > self.eps0:
            raise ValueError("eps_min must not exceed eps0")
        return self

    @property
    def resolved_inner_tolerance(self) -> float:
        return self.inner_tolerance if self.inner_tolerance is not None else self.outer_tolerance / 10.0

    def schedule(self) -> list:
        """Strictly decreasing eps_k = eps0 * rho**k, stopping before eps_min."""
        eps, out = self.eps0, []
        while eps >= self.eps_min:
            out.append(eps)
            eps *= self.rho
        return out

# -----------------------------------------------------------------------------
# 4. Bundled solver configuration
# -----------------------------------------------------------------------------
class SolverConfig(BaseModel):
    linear: LinearSolveOptions = Field(default_factory=LinearSolveOptions)
    variational: VariationalOptions = Field(default_factory=VariationalOptions)
    fixedpoint: FixedPointOptions = Field(default_factory=FixedPointOptions)
    seed: int = 42

    model_config = ConfigDict(frozen=True)

    def inner_linear(self) -> LinearSolveOptions:
        """Linear options for solves nested in the inner iteration."""
        tol = max(1e-13, min(self.linear.tolerance, self.fixedpoint.resolved_inner_tolerance / 10.0))
        return self.linear.model_copy(update={"tolerance": tol})

# -----------------------------------------------------------------------------
# 5. Regularity harness
# -----------------------------------------------------------------------------
class HarnackOptions(BaseModel):
    radius: float = Field(default=1.0, gt=0.0)
    dilation: float = Field(default=1.0, ge=1.0, description="dilation constant lambda")
    lebesgue_exponent: float = Field(default=1.0, ge=1.0, description="L^m exponent of the supersolution estimate")
    scale_to_fit: bool = True
    ceiling: float = Field(default=1e6, gt=0.0)
    tolerance: float = Field(default=1e-10, ge=0.0)

    model_config = ConfigDict(frozen=True)

# -----------------------------------------------------------------------------
# 6. Command-line run
# -----------------------------------------------------------------------------
class RunConfig(BaseModel):
    command: str
    action: Optional[str] = None
    space: Optional[str] = Field(default=None, description="generator string")
    space_file: Optional[Path] = None
    problem_file: Optional[Path] = None
    output_dir: Path
    seed: int = 42
    solver: SolverConfig = Field(default_factory=SolverConfig)
    harnack: HarnackOptions = Field(default_factory=HarnackOptions)
    options: Dict[str, Any] = Field(default_factory=dict, description="command-specific flags")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def one_space_source(self) -> "RunConfig":
        if self.command == "sweep":
            return self
        if (self.space is None) == (self.space_file is None):
            raise ValueError("exactly one of --space and --space-file is required")
        return self

    def manifest(self) -> Dict[str, Any]:
        """Resolved configuration echoed to manifest.txt."""
        data = self.model_dump(mode="json")
        data.update(data.pop("options"))
        return data
