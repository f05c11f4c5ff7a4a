"""
Exception hierarchy shared by every package.
"""

from typing import Optional


class PPTError(Exception):
    """Base class for all errors raised by this project."""


class DimensionError(PPTError):
    """Tensor shapes do not fit the operation."""

    def __init__(self, message: str, *shapes):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = shapes


class NumericDomainError(PPTError):
    """A NaN or infinite value appeared where finite reals are required."""


class DegenerateVectorError(PPTError):
    """A zero-norm vector was given to a normalizing operation."""


class ContractError(PPTError):
    """A caller violated an operation's precondition."""


class ArgumentError(PPTError, ValueError):
    """An argument value is outside the accepted range."""


class ConfigurationError(PPTError):
    """Invalid configuration, including violations of the freezing contract."""


class DataError(PPTError):
    """Dataset content cannot satisfy the request."""


class ParseError(PPTError):
    """Malformed input file. `line` is 1-based."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CheckpointError(PPTError):
    """Checkpoint file is unreadable, corrupt, or incompatible."""
