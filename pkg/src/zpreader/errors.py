"""Exception hierarchy shared across the pipeline.

``InputError`` subclasses mark problems with user-supplied files or
flags; the CLI reports them with exit code 2.  Everything else is
treated as an internal failure (exit code 1).
"""


class ZPReaderError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ZPReaderError):
    """A problem with user-provided data or configuration."""


class ParseError(InputError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ValidationError(InputError):
    """Structurally valid input that violates a model invariant."""


class FingerprintError(InputError):
    """Vocabulary fingerprint mismatch between pipeline stages."""


class UnkOverflowError(ZPReaderError):
    """A sample has more distinct unknown forms than available slots."""

    def __init__(self, needed, available):
        super().__init__(
            f"sample needs {needed} unknown-word slots, only {available} available"
        )
        self.needed = needed
        self.available = available
        self.overflow = needed - available


class UnrecoverableTokenError(ZPReaderError):
    """A predicted placeholder id has no surface form in this sample."""


class ShapeError(ZPReaderError):
    """Tensor operands with incompatible shapes; names both shapes."""


class NonFiniteError(ZPReaderError):
    """An operation produced NaN or infinity."""
