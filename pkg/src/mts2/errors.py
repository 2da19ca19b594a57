"""Exception hierarchy.

Validation errors mean the inputs are unusable; solver errors mean a valid
input could not be solved. The CLI maps the two families to distinct exit
codes.
"""


class MTSError(Exception):
    """Base class for every error raised by this package."""

    code = "error"


class ValidationError(MTSError):
    code = "validation"


class StabilityViolation(ValidationError):
    code = "StabilityViolation"


class NonpositiveMargin(ValidationError):
    code = "NonpositiveMargin"


class NonpositiveRate(ValidationError):
    code = "NonpositiveRate"


class IndexOutOfRange(ValidationError):
    code = "IndexOutOfRange"


class DegenerateConfig(ValidationError):
    code = "DegenerateConfig"


class SolverError(MTSError):
    code = "solver"


class NoConvergence(SolverError):
    code = "NoConvergence"


class NotAnEquilibrium(SolverError):
    code = "NotAnEquilibrium"

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class EmptyFeasibleRegion(SolverError):
    code = "EmptyFeasibleRegion"
