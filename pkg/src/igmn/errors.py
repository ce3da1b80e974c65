"""Exception hierarchy shared by the learners, inference and tooling."""


class IGMNError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(IGMNError, ValueError):
    """Invalid hyperparameter, flag combination or shape mismatch."""


class ParseError(IGMNError, ValueError):
    """Malformed input file.

    ``row`` and ``column`` locate the offending cell when known (1-based row
    counting the header as row 1).
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class DegenerateComponent(IGMNError, ArithmeticError):
    """A component's covariance or precision is no longer positive definite."""


class SingularUpdate(IGMNError, ArithmeticError):
    """Sherman-Morrison denominator too close to zero."""

    def __init__(self, g, message=None):
        super().__init__(message or f"rank-one update denominator {g!r} is singular")
        self.g = g


class SkippedUpdate(IGMNError):
    """The guarded covariance/precision update was rejected for this step.

    Raised by the component-level update operations; the step functions catch
    it, leave the matrix and determinant untouched and count the skip.
    """

    def __init__(self, g, message=None):
        super().__init__(message or f"update skipped, guard value {g!r}")
        self.g = g
