# problems.py
import logging
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.plaplab.calculus.fields import read_field
from src.plaplab.exceptions import ProblemSpecError

logger = logging.getLogger(__name__)

# -----------------------------------------------------------------------------
# 1. Problem kinds
# -----------------------------------------------------------------------------
class ProblemKind(str, Enum):
    POISSON_DIRICHLET = "poisson-dirichlet"
    POISSON_NEUMANN = "poisson-neumann"
    EIGEN = "eigen"
    CAPACITY = "capacity"


class EigenMode(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"

# -----------------------------------------------------------------------------
# 2. Problem specification
# -----------------------------------------------------------------------------
class ProblemSpec(BaseModel):
    kind: ProblemKind
    p: float = Field(description="exponent in (1, inf)")
    epsilon: float = Field(default=0.0, ge=0.0)
    f: Optional[List[float]] = None
    boundary: List[int] = Field(default_factory=list)
    boundary_values: List[float] = Field(default_factory=list)
    mode: Optional[EigenMode] = None
    K: List[int] = Field(default_factory=list)
    omega: List[int] = Field(default_factory=list)
    initial: Optional[List[float]] = None

    model_config = ConfigDict(frozen=True, use_enum_values=False)

    @field_validator("p")
    @classmethod
    def finite_p(cls, v: float) -> float:
        if not (np.isfinite(v) and v > 1.0):
            raise ValueError("p must lie in (1, inf)")
        return v

    @model_validator(mode="after")
    def check_kind_data(self) -> "ProblemSpec":
        if self.kind == ProblemKind.POISSON_DIRICHLET:
            if not self.boundary:
                raise ValueError("poisson-dirichlet needs a nonempty boundary")
            if len(self.boundary_values) not in (0, len(self.boundary)):
                raise ValueError("boundary_values must match boundary in length")
        if self.kind == ProblemKind.EIGEN:
            if self.mode is None:
                raise ValueError("eigen needs mode = dirichlet | neumann")
            if self.mode == EigenMode.DIRICHLET and not self.boundary:
                raise ValueError("dirichlet eigen needs a nonempty boundary")
        if self.kind == ProblemKind.CAPACITY:
            if not self.K:
                raise ValueError("capacity needs a nonempty compact set K")
            if not set(self.K) <= set(self.omega):
                raise ValueError("capacity needs K contained in omega")
        return self

    def f_array(self, n: int) -> np.ndarray:
        if self.f is None:
            return np.zeros(n)
        f = np.asarray(self.f, dtype=float)
        if f.shape != (n,):
            raise ProblemSpecError(f"f has {f.shape[0]} entries, space has {n} vertices", {"n": n})
        return f

    def values_array(self) -> np.ndarray:
        if not self.boundary_values:
            return np.zeros(len(self.boundary))
        return np.asarray(self.boundary_values, dtype=float)


def make_problem(**data) -> ProblemSpec:
    """Build a ProblemSpec, turning validation failures into ProblemSpecError."""
    try:
        return ProblemSpec(**data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first.get("loc", ())) or "problem"
        raise ProblemSpecError(f"{where}: {first.get('msg')}", {"errors": e.errors()}) from e

# -----------------------------------------------------------------------------
# 3. ProblemSpec file
# -----------------------------------------------------------------------------
LIST_KEYS = {"boundary": int, "boundary_values": float, "K": int, "omega": int}


def _parse_list(raw: str, cast, key: str, line_number: int) -> list:
    raw = raw.strip()
    if not (raw.startswith("[") and raw.endswith("]")):
        raise ProblemSpecError(f"line {line_number}: {key} must be a [list]", {"line_number": line_number})
    body = raw[1:-1].strip()
    if not body:
        return []
    try:
        return [cast(tok) for tok in body.replace(",", " ").split()]
    except ValueError as e:
        raise ProblemSpecError(f"line {line_number}: {e}", {"line_number": line_number}) from e


def parse_problem(text: str, base_dir: Union[str, Path] = ".", n: Optional[int] = None) -> ProblemSpec:
    """
    `key = value` lines: kind, p, epsilon, mode, boundary, boundary_values, K, omega
    (lists in brackets) and f / initial (paths to field files, relative to base_dir).
    """
    data = {}
    for line_number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProblemSpecError(f"line {line_number}: expected 'key = value'", {"line_number": line_number})
        key, value = (s.strip() for s in line.split("=", 1))
        if key in LIST_KEYS:
            data[key] = _parse_list(value, LIST_KEYS[key], key, line_number)
        elif key in ("f", "initial"):
            data[key] = read_field(Path(base_dir) / value, n).tolist()
        elif key in ("kind", "mode"):
            data[key] = value
        elif key in ("p", "epsilon"):
            data[key] = value
        else:
            raise ProblemSpecError(f"line {line_number}: unknown key '{key}'", {"line_number": line_number})
    return make_problem(**data)


def serialize_problem(spec: ProblemSpec, f_file: str = "f.txt", initial_file: str = "initial.txt") -> str:
    """Inverse of parse_problem; the f and initial fields are referenced by file name, written by the caller."""
    def lst(xs):
        return "[" + ", ".join(format(x, ".17g") if isinstance(x, float) else str(x) for x in xs) + "]"

    lines = [f"kind = {spec.kind.value}", f"p = {format(spec.p, '.17g')}"]
    if spec.epsilon:
        lines.append(f"epsilon = {format(spec.epsilon, '.17g')}")
    if spec.mode is not None:
        lines.append(f"mode = {spec.mode.value}")
    for key in ("boundary", "boundary_values", "K", "omega"):
        if getattr(spec, key):
            lines.append(f"{key} = {lst(getattr(spec, key))}")
    if spec.f is not None:
        lines.append(f"f = {f_file}")
    if spec.initial is not None:
        lines.append(f"initial = {initial_file}")
    return "\n".join(lines) + "\n"

# -----------------------------------------------------------------------------
# 4. Results
# -----------------------------------------------------------------------------
class VariationalResult(BaseModel):
    kind: ProblemKind
    p: float
    solution: np.ndarray
    objective_value: float
    kkt_residual: float
    iterations: int
    objective_trace: List[float] = Field(default_factory=list)
    eigenvalue: Optional[float] = None
    capacity: Optional[float] = None
    comparison_ok: Optional[bool] = None
    notes: List[str] = Field(default_factory=list)

    model_config = ConfigDict(arbitrary_types_allowed=True)
