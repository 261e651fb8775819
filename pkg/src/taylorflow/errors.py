"""Exception types raised across the package."""


class FlowError(Exception):
    """Base class for all package errors."""


class DecodeError(FlowError, ValueError):
    """Malformed or truncated encoded image. ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DimensionError(FlowError, ValueError):
    pass


class ParameterError(FlowError, ValueError):
    pass


class ShapeError(FlowError, ValueError):
    pass


class FormatError(FlowError, ValueError):
    pass


class TruncationError(FormatError):
    pass


class RangeError(FlowError, ValueError):
    pass


class EmptyEvaluationError(FlowError):
    """The estimate and ground-truth validity masks do not overlap."""
