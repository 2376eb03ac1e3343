from typing import Optional


class PlapLabError(Exception):
    """
    Base error for every failure the laboratory reports.

    `context` carries the diagnostics a caller needs to act on the failure:
    the offending entry, the best residual reached, partial traces.
    """
    def __init__(self, message: str, context: Optional[dict] = None):
        super().__init__(message)
        self.context = context or {}


# -----------------------------------------------------------------------------
# Inputs
# -----------------------------------------------------------------------------

class SpaceError(PlapLabError):
    """Invalid space data: non-positive weights, bad indices, asymmetric edges."""


class SpaceParseError(SpaceError):
    def __init__(self, message: str, line_number: int, context: Optional[dict] = None):
        super().__init__(f"line {line_number}: {message}", context)
        self.line_number = line_number
        self.context.setdefault("line_number", line_number)


class FieldError(PlapLabError):
    """Field does not live on the given space, or a field file is malformed."""


class ProblemSpecError(PlapLabError):
    """Inconsistent problem data (e.g. nonzero-mean f for a Neumann problem)."""


class UsageError(PlapLabError):
    """Bad command-line input. Maps to exit status 2."""


# -----------------------------------------------------------------------------
# Solvers
# -----------------------------------------------------------------------------

class LinearSolveError(PlapLabError):
    """Linear solve failed: disconnected space, nonzero mean, or iteration cap."""


class ConvergenceError(PlapLabError):
    """A nonlinear iteration hit its cap without meeting tolerance."""


class InnerDivergenceError(ConvergenceError):
    """Inner frozen-coefficient iteration stopped contracting."""


class StagnationError(ConvergenceError):
    """Outer damping fell below its floor."""


class CertificationError(ConvergenceError):
    """A returned field failed its a-posteriori residual check."""


# -----------------------------------------------------------------------------
# Verification
# -----------------------------------------------------------------------------

class HypothesisError(PlapLabError):
    """The input field does not satisfy the hypothesis of the estimate being measured."""


class DomainTooSmallError(PlapLabError):
    """A required ball enlargement does not fit inside the space."""


class InsufficientDataError(PlapLabError):
    """Not enough usable samples to fit or measure."""
