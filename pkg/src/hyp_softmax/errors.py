"""Exception hierarchy for hyp-softmax."""
from typing import Optional, Tuple


class HypSoftmaxError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HypSoftmaxError, ValueError):
    """Input outside the domain of a geometric operation."""


class ArgumentError(HypSoftmaxError, ValueError):
    """Inconsistent shapes, out-of-range labels or invalid parameters."""


class DegenerateInputError(HypSoftmaxError, ValueError):
    """A vector that must be normalized has zero norm."""


class FormatError(HypSoftmaxError, ValueError):
    """A text file does not follow the expected line format."""

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        location = ''
        if path is not None:
            location = f"{path}:{line_number}: " if line_number is not None else f"{path}: "
        elif line_number is not None:
            location = f"line {line_number}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line_number = line_number


class MissingScoreError(HypSoftmaxError, KeyError):
    """A trial has no matching entry in the score file."""

    def __init__(self, pair: Tuple[str, str]):
        super().__init__(f"No score for trial {pair[0]} {pair[1]}")
        self.pair = pair

    def __str__(self) -> str:
        return self.args[0]


class ConfigError(HypSoftmaxError, ValueError):
    """Invalid experiment configuration; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DivergenceError(HypSoftmaxError, RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, epoch: Optional[int] = None, batch: Optional[int] = None):
        location = ""
        if epoch is not None:
            location = f" (epoch {epoch}, batch {batch})" if batch is not None else f" (epoch {epoch})"
        super().__init__(f"{message}{location}")
        self.message = message
        self.epoch = epoch
        self.batch = batch
