"""Exception hierarchy and structured warnings shared across the package."""

from dataclasses import dataclass, field


class LongfuseError(Exception):
    """Base class for all package errors."""


class ValidationError(LongfuseError):
    """Input data, schema, or configuration violates a precondition."""


class EstimationError(LongfuseError):
    """An estimator could not produce a value from otherwise valid input."""


class PositivityError(EstimationError):
    """A required cell is empty or a required conditioning event has zero mass."""


class RankError(EstimationError):
    """Design matrix is rank deficient; carries the offending column names."""

    def __init__(self, message: str, columns: tuple[str, ...] = ()):
        super().__init__(message)
        self.columns = columns


class NotFittedError(LongfuseError):
    """Estimator attribute accessed before fit()."""


@dataclass(frozen=True)
class WarningRecord:
    """Structured warning surfaced in reports: machine-readable code plus context."""

    code: str
    message: str
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "context": dict(self.context)}
