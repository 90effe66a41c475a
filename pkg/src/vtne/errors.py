"""Exception types shared across the package."""

from __future__ import annotations


class VTNEError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(VTNEError, ValueError):
    """Tensor index dimensions do not line up."""


class CapacityError(VTNEError, ValueError):
    """A dense (exponential-size) object was requested for too many qubits."""


class NumericalIntegrityError(VTNEError, ArithmeticError):
    """A computed quantity is NaN/Inf or violates a hard numerical invariant."""


class ConfigError(VTNEError, ValueError):
    """Invalid run configuration or malformed input file."""


class CheckpointError(ConfigError):
    """A checkpoint file could not be parsed or does not match its config.

    ``offset`` is the byte offset of a parse failure, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
