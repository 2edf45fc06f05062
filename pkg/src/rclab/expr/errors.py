"""Exception types for the expression toolchain.

Every error carries a byte offset into the original source string (-1 when
no location is known), so diagnostics can point at the offending token even
when the failure happens long after parsing.
"""


class ExprError(ValueError):
    """Base class for expression failures with a source location."""

    def __init__(self, message: str, offset: int = -1):
        self.offset = int(offset)
        self.bare_message = message
        if self.offset >= 0:
            message = f"{message} at offset {self.offset}"
        super().__init__(message)


class ExprSyntaxError(ExprError):
    """The source does not match the expression grammar."""


class UnknownIdentifierError(ExprError):
    """An identifier is neither a coordinate, a velocity, a parameter, nor pi."""


class ArityError(ExprError):
    """A function was applied to the wrong number of arguments."""


class DomainEvalError(ExprError):
    """Evaluation left the domain (log of non-positive, division by zero, ...)."""
