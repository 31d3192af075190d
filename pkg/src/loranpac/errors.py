"""Exception types shared across the package."""


class LoRanPacError(Exception):
    """Base class for all package errors."""


class InvalidInputError(LoRanPacError, ValueError):
    """Input violates a precondition (non-finite entries, bad shapes, bad args)."""


class NumericError(LoRanPacError, ArithmeticError):
    """A numerical routine failed to converge or produced unusable output."""


class IllConditionedStateError(NumericError):
    """Classifier formation hit singular values below the conditioning floor.

    Typically signals running with zeta=0 on ill-conditioned streams.
    """


class SizeCapError(LoRanPacError):
    """A dense diagnostic was requested above the materialization cap."""


class FormatError(LoRanPacError):
    """Feature-file parsing failed (bad magic, version, or checksum)."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
