"""
Error hierarchy shared by every bfp_lab app.
"""


class BfpError(Exception):
    """Base class for bfp_lab errors."""


class ShapeMismatchError(BfpError, ValueError):
    """Operand extents do not fit together."""

    def __init__(self, operation, expected, actual):
        self.operation = operation
        self.expected = tuple(expected) if expected is not None else None
        self.actual = tuple(actual) if actual is not None else None
        super().__init__(
            f"{operation}: expected shape {self.expected}, got {self.actual}"
        )


class ConfidenceRangeError(BfpError, ValueError):
    """A confidence map holds values outside [0, 1]."""


class LabelValueError(BfpError, ValueError):
    """A label map holds a class index the operation cannot accept."""


class MissingStateError(BfpError, RuntimeError):
    """A backward pass was requested without the forward state it needs."""


class DivergenceError(BfpError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, step, loss):
        self.step = step
        self.loss = loss
        super().__init__(f"Non-finite loss {loss!r} at step {step}")


class TensorFormatError(BfpError, ValueError):
    """A portable tensor or label file is malformed."""
