"""Exception types shared across the package.

Argument misuse raises plain ``ValueError``; the classes below mark
failures rooted in the data or the model, which the CLI maps to a
different exit code.
"""


class ContinuumMetricsError(Exception):
    """Base class for data- and model-level failures."""


class TraceParseError(ContinuumMetricsError):
    """A trace line is not valid JSON; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no


class TraceValidationError(ContinuumMetricsError):
    """A record violates a trace invariant (raised by strict loading)."""

    def __init__(self, message: str, line_no: int | None = None, field: str | None = None):
        super().__init__(message)
        self.line_no = line_no
        self.field = field


class DataError(ContinuumMetricsError):
    """The data cannot support the requested computation."""


class InsufficientDataError(DataError):
    """Series too short for the requested model order."""


class UnidentifiableModelError(DataError):
    """Observations carry no information about the model parameter."""


class InfeasibleProblemError(ContinuumMetricsError):
    """Constraint set admits no grid point; names the binding constraint."""

    def __init__(self, message: str, binding: tuple[str, ...] = ()):
        super().__init__(message)
        self.binding = tuple(binding)


class IndependenceDeclarationError(ContinuumMetricsError):
    """A metric's declared input set disagrees with its observed behaviour."""
