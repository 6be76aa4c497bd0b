"""Exception types raised across the package."""


class NCTorusError(Exception):
    """Base class for every error raised by nctorus."""


class AlphaMismatch(NCTorusError, ValueError):
    """Operands live in noncommutative tori with different deformation."""


class AliasingError(NCTorusError, ValueError):
    """Sample grid too coarse to follow the argument of a circle map."""


class TailTooLarge(NCTorusError, ValueError):
    """A Fourier truncation would discard more than the allowed tail."""


class TruncationError(NCTorusError, ValueError):
    """Transfer-matrix truncation is too small for the symbol's bandwidth."""


class ConsistencyError(NCTorusError, RuntimeError):
    """Two independent computations of the same object disagree."""


class ConfigError(NCTorusError, ValueError):
    """Experiment configuration failed validation."""


class ParseError(NCTorusError, ValueError):
    """A textual spec could not be parsed.

    ``position`` is the 0-based character offset where parsing failed.
    """

    def __init__(self, message: str, text: str = "", position: int = 0):
        super().__init__(f"{message} (at position {position} in {text!r})")
        self.text = text
        self.position = position


class ExperimentError(NCTorusError, RuntimeError):
    """A module error surfaced while running an experiment."""
