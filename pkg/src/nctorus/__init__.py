"""Numerics for the noncommutative 2-torus and skew-product automorphisms on it."""

from .algebra import NCPoly, adjoint, mul, parse_ncpoly, trace
from .anzai import AnzaiMap, Weight, apply, apply_iter, cesaro
from .circle import TrigPoly, WindingMap
from .errors import (AlphaMismatch, AliasingError, ConfigError, ConsistencyError, ExperimentError,
                     NCTorusError, ParseError, TailTooLarge, TruncationError)

__version__ = "0.1.0"

__all__ = [
    "NCPoly", "adjoint", "mul", "parse_ncpoly", "trace",
    "AnzaiMap", "Weight", "apply", "apply_iter", "cesaro",
    "TrigPoly", "WindingMap",
    "AlphaMismatch", "AliasingError", "ConfigError", "ConsistencyError", "ExperimentError",
    "NCTorusError", "ParseError", "TailTooLarge", "TruncationError",
]
