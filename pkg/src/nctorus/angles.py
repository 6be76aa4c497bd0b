"""Exact range reduction for angles that are integer multiples of a double.

Every double is a dyadic rational, so ``k * theta`` is an exact rational
number; reducing it modulo 2*pi against a 320-bit fixed-point copy of 2*pi
gives the phase of ``exp(i k theta)`` correct to the last bit even for
``k`` in the billions.  Raw angles are never reduced before this point.
"""

from __future__ import annotations

import math
from typing import Iterable

import mpmath
import numpy as np

_PREC = 320
with mpmath.workprec(_PREC + 64):
    _TWO_PI_FIXED = int(mpmath.floor(2 * mpmath.pi * mpmath.mpf(2) ** _PREC))
_HALF = _TWO_PI_FIXED // 2
_SCALE = 1 << _PREC

TWO_PI = 2.0 * math.pi
GOLDEN_THETA = math.pi * (math.sqrt(5.0) - 1.0)


def _split(theta: float) -> tuple[int, int]:
    num, den = float(theta).as_integer_ratio()
    return num, den.bit_length() - 1


def mul_angle(k: int, theta: float) -> float:
    """Return ``k * theta`` reduced to ``[-pi, pi)``, exactly rounded."""
    num, d = _split(theta)
    x = int(k) * num
    if d <= _PREC:
        x <<= _PREC - d
    else:
        x >>= d - _PREC
    r = x % _TWO_PI_FIXED
    if r >= _HALF:
        r -= _TWO_PI_FIXED
    return r / _SCALE


def mul_angles(ks: Iterable[int] | np.ndarray, theta: float) -> np.ndarray:
    """Vectorised :func:`mul_angle` over integer multipliers."""
    num, d = _split(theta)
    out = []
    if d <= _PREC:
        sh = _PREC - d
        for k in np.asarray(ks, dtype=object).ravel():
            r = ((int(k) * num) << sh) % _TWO_PI_FIXED
            out.append((r - _TWO_PI_FIXED if r >= _HALF else r) / _SCALE)
    else:
        out = [mul_angle(int(k), theta) for k in np.asarray(ks, dtype=object).ravel()]
    return np.asarray(out, dtype=float).reshape(np.shape(ks))


def reduce_angle(x: float) -> float:
    return mul_angle(1, x)


def reduce_angles(xs: np.ndarray) -> np.ndarray:
    """Reduce raw doubles to ``(-pi, pi]``.

    libm reduces the argument of sin/cos exactly, so going through the unit
    circle loses nothing beyond the final atan2 rounding.
    """
    xs = np.asarray(xs, dtype=float)
    return np.angle(np.exp(1j * xs))


def phase(k: int, theta: float) -> complex:
    """``exp(i k theta)`` with exact reduction of the argument."""
    a = mul_angle(k, theta)
    return complex(math.cos(a), math.sin(a))


def phases(ks, theta: float) -> np.ndarray:
    return np.exp(1j * mul_angles(ks, theta))


def frac_turns(k: int, x: float) -> float:
    """Fractional part of ``k * x`` in ``[-1/2, 1/2)``, exactly rounded."""
    num, den = float(x).as_integer_ratio()
    r = (int(k) * num) % den
    if 2 * r >= den:
        r -= den
    return r / den


def turn_phase(k: int, x: float) -> complex:
    """``exp(2 pi i k x)`` for a raw (unreduced) number of turns ``x``."""
    a = TWO_PI * frac_turns(k, x)
    return complex(math.cos(a), math.sin(a))


def grid_phases(freqs: np.ndarray, size: int) -> np.ndarray:
    """Table ``exp(i m t_j)`` for ``t_j = 2 pi j / size``; shape (len(freqs), size).

    Exact, since ``m j mod size`` is integer arithmetic.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    j = np.arange(size, dtype=np.int64)
    idx = np.mod(np.mod(freqs, size)[:, None] * j[None, :], size)
    base = np.exp(2j * np.pi * np.arange(size) / size)
    return base[idx]


def point_phases(freqs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Table ``exp(i m t)`` for arbitrary angles ``t``; shape (len(freqs), len(points))."""
    freqs = np.asarray(freqs, dtype=np.int64)
    points = np.asarray(points, dtype=float)
    out = np.empty((freqs.size, points.size), dtype=complex)
    for j, t in enumerate(points):
        out[:, j] = phases(freqs.astype(object), float(t))
    return out


def dirichlet(ks: np.ndarray, y: float) -> np.ndarray:
    """``sum_{j<k} exp(i j y)`` for each ``k`` in ``ks``; ``y`` is a reduced angle."""
    ks = np.asarray(ks, dtype=float)
    if y == 0.0:
        return ks.astype(complex)
    s = math.sin(0.5 * y)
    return np.exp(0.5j * (ks - 1.0) * y) * np.sin(0.5 * ks * y) / s
