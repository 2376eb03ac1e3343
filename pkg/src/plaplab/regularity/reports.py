# reports.py
import hashlib
import json
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from src.plaplab.space.mms import DiscreteMMS
from src.plaplab.space.parser import serialize_space

RECORD_FIELDS = ("name", "lhs", "rhs", "constant", "pass", "degenerate", "digest")


class EstimateReport(BaseModel):
    name: str
    lhs: float
    rhs: float
    empirical_constant: Optional[float] = None
    passed: bool = False
    degenerate: bool = False
    ceiling: Optional[float] = None
    context: Dict[str, Any] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)

    @property
    def digest(self) -> str:
        blob = json.dumps(self.context, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_record(self) -> str:
        """Tab-separated key=value record; floats at 17 significant digits."""
        values = {
            "name": self.name,
            "lhs": format(self.lhs, ".17g"),
            "rhs": format(self.rhs, ".17g"),
            "constant": "nan" if self.empirical_constant is None else format(self.empirical_constant, ".17g"),
            "pass": str(self.passed).lower(),
            "degenerate": str(self.degenerate).lower(),
            "digest": self.digest,
        }
        record = "\t".join(f"{k}={values[k]}" for k in RECORD_FIELDS)
        if self.notes:
            record += "\tnotes=" + "; ".join(self.notes)
        return record


def make_report(name: str, lhs: float, rhs: float, context: Dict[str, Any], ceiling: Optional[float] = None,
                notes: Optional[List[str]] = None, passed: Optional[bool] = None) -> EstimateReport:
    """empirical_constant = lhs / rhs when rhs > 0; otherwise the report is flagged degenerate."""
    lhs, rhs = float(lhs), float(rhs)
    degenerate = not rhs > 0
    constant = None if degenerate else lhs / rhs
    if passed is None:
        passed = (not degenerate) and (ceiling is None or constant <= ceiling)
    return EstimateReport(name=name, lhs=lhs, rhs=rhs, empirical_constant=constant, passed=bool(passed),
                          degenerate=degenerate, ceiling=ceiling, context=context, notes=list(notes or []))


def space_context(space: DiscreteMMS, **extra) -> Dict[str, Any]:
    digest = hashlib.sha256(serialize_space(space).encode("utf-8")).hexdigest()[:16]
    context = {"space": digest, "n": space.n, "edges": space.edge_count}
    for k, v in extra.items():
        context[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return context


def sort_reports(reports: Iterable[EstimateReport]) -> List[EstimateReport]:
    """Deterministic aggregation order: report name, then context digest."""
    return sorted(reports, key=lambda r: (r.name, r.digest))


def format_reports(reports: Iterable[EstimateReport]) -> str:
    return "".join(r.to_record() + "\n" for r in sort_reports(reports))
