"""Classical skew-products ``(s, t) -> (s + theta, t + h(s))`` on the 2-torus, and processes.

Coordinates are kept unreduced in double-double form, so an orbit of a
million steps still knows ``s_k = s_0 + k theta`` to far below a rounding
error; reduction happens only when a character is evaluated.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .algebra import NCPoly
from .angles import TWO_PI, mul_angle
from .anzai import AnzaiMap, as_weight, cesaro
from .circle import TrigPoly, WindingMap
from .errors import AlphaMismatch


def _two_sum(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def _dd_add(hi, lo, x):
    """Add a double ``x`` to the double-double ``(hi, lo)``."""
    s, e = _two_sum(hi, x)
    e = e + lo
    return _two_sum(s, e)


def _mul_reduce(p: int, hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """``p * (hi + lo)`` reduced mod 2 pi; the ``hi`` part exactly."""
    hi = np.atleast_1d(hi)
    lo = np.atleast_1d(lo)
    if p == 0:
        return np.zeros(hi.shape)
    red = np.fromiter((mul_angle(p, float(x)) for x in hi.ravel()), dtype=float, count=hi.size)
    return red.reshape(hi.shape) + p * lo


@dataclass(frozen=True)
class TorusPoint:
    """A point ``(s, t)`` held as unreduced double-doubles."""

    s: float
    t: float
    s_lo: float = 0.0
    t_lo: float = 0.0

    def reduced(self) -> tuple[float, float]:
        return (float(_mul_reduce(1, np.array([self.s]), np.array([self.s_lo]))[0]),
                float(_mul_reduce(1, np.array([self.t]), np.array([self.t_lo]))[0]))

    def character(self, p: int, q: int) -> complex:
        a = _mul_reduce(p, np.array([self.s]), np.array([self.s_lo]))[0] + \
            _mul_reduce(q, np.array([self.t]), np.array([self.t_lo]))[0]
        return complex(math.cos(a), math.sin(a))


def circle_function(h) -> Callable[[np.ndarray], np.ndarray]:
    """Real-valued ``h(s)`` (mod 2 pi) from a WindingMap ``f = e^{ih}``, a real TrigPoly, or a callable.

    The argument is a reduced angle.
    """
    if isinstance(h, WindingMap):
        w, ph = h.winding, h.phase
        return lambda s: w * s + (ph.at(s).real if len(ph) else 0.0)
    if isinstance(h, TrigPoly):
        return lambda s: h.at(s).real
    if h is None:
        return lambda s: np.zeros_like(s)
    return h


def anzai_step(theta: float, h, p: TorusPoint) -> TorusPoint:
    """``(s + theta, t + h(s))``."""
    hf = circle_function(h)
    s_red = p.reduced()[0]
    s, s_lo = _dd_add(p.s, p.s_lo, theta)
    t, t_lo = _dd_add(p.t, p.t_lo, float(np.asarray(hf(np.array([s_red])))[0]))
    return TorusPoint(s, t, s_lo, t_lo)


def anzai_step_inverse(theta: float, h, p: TorusPoint) -> TorusPoint:
    """``(s - theta, t - h(s - theta))``."""
    hf = circle_function(h)
    s, s_lo = _dd_add(p.s, p.s_lo, -theta)
    s_red = float(_mul_reduce(1, np.array([s]), np.array([s_lo]))[0])
    t, t_lo = _dd_add(p.t, p.t_lo, -float(np.asarray(hf(np.array([s_red])))[0]))
    return TorusPoint(s, t, s_lo, t_lo)


@dataclass
class Orbit:
    s: np.ndarray      # (N, P) high parts
    s_lo: np.ndarray
    t: np.ndarray
    t_lo: np.ndarray

    def phases(self, p: int, q: int) -> np.ndarray:
        """``p s_k + q t_k`` reduced, shape (N, P)."""
        return _mul_reduce(p, self.s, self.s_lo) + _mul_reduce(q, self.t, self.t_lo)

    def to_csv(self, j: int = 0) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "s_k", "t_k"])
        for k in range(self.s.shape[0]):
            w.writerow([k, "%.17g" % (self.s[k, j] + self.s_lo[k, j]),
                        "%.17g" % (self.t[k, j] + self.t_lo[k, j])])
        return buf.getvalue()


def orbit(theta: float, h, starts: Sequence[TorusPoint], N: int) -> Orbit:
    """Points ``T^k(start)`` for ``k < N``, all starts advanced together."""
    hf = circle_function(h)
    P = len(starts)
    S = np.empty((N, P))
    SL = np.empty((N, P))
    Tt = np.empty((N, P))
    TL = np.empty((N, P))
    s = np.array([p.s for p in starts], dtype=float)
    sl = np.array([p.s_lo for p in starts], dtype=float)
    t = np.array([p.t for p in starts], dtype=float)
    tl = np.array([p.t_lo for p in starts], dtype=float)
    for k in range(N):
        S[k], SL[k], Tt[k], TL[k] = s, sl, t, tl
        s_red = np.angle(np.exp(1j * s)) + sl
        inc = np.asarray(hf(s_red), dtype=float)
        s, sl = _dd_add(s, sl, theta)
        t, tl = _dd_add(t, tl, inc)
    return Orbit(S, SL, Tt, TL)


def _weights(lam, theta: float, N: int) -> np.ndarray:
    w = as_weight(lam, theta)
    if w.angle == 0.0:
        return np.ones(N, dtype=complex)
    ang = np.array([-mul_angle(k, w.angle) for k in range(N)])
    return np.exp(1j * ang)


def _checkpoint_means(terms: np.ndarray, checkpoints: Sequence[int]) -> list[complex]:
    """Compensated means of ``terms[:N]`` (rows) for each checkpoint."""
    out = []
    for N in checkpoints:
        col = terms[:N]
        out.append(complex(math.fsum(col.real), math.fsum(col.imag)) / N)
    return out


def _dyadics(N: int) -> list[int]:
    ks = []
    m = 1
    while m < N:
        ks.append(m)
        m *= 2
    ks.append(N)
    return ks


def birkhoff(theta: float, h, start: TorusPoint, character: tuple[int, int], lam, N: int
             ) -> tuple[complex, list[tuple[int, complex]]]:
    """``(1/N) sum_{k<N} lambda^{-k} e^{i(p s_k + q t_k)}`` with dyadic checkpoints."""
    if N < 1:
        raise ValueError("N must be positive")
    p, q = character
    orb = orbit(theta, h, [start], N)
    terms = _weights(lam, theta, N) * np.exp(1j * orb.phases(p, q)[:, 0])
    cps = _dyadics(N)
    means = _checkpoint_means(terms, cps)
    return means[-1], list(zip(cps, means))


def eval_alpha0(x: NCPoly, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """The function ``sum c_{m,n} e^{i(m s + n t)}`` of a commutative element."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(s.shape, dtype=complex)
    for n, p in x.modes.items():
        out += p.at(s) * np.exp(1j * _mul_reduce(n, t, np.zeros_like(t)))
    return out


def crosscheck_alpha0(A: AnzaiMap, a: NCPoly, N: int, sample_points: Sequence[TorusPoint],
                      average: NCPoly | None = None) -> float:
    """Largest gap between the algebraic Cesaro mean and the orbit average at ``alpha = 0``.

    Route one computes ``M_{a,1}(N)`` in the algebra and evaluates it as a
    function on the torus; route two averages ``a`` along classical orbits.
    """
    if A.alpha != 0.0 or a.alpha != 0.0:
        raise AlphaMismatch("crosscheck needs alpha = 0")
    if average is None:
        average = cesaro(A, a, 1.0, [N]).checkpoints[-1].average
    pts = list(sample_points)
    red = [p.reduced() for p in pts]
    s0 = np.array([r[0] for r in red])
    t0 = np.array([r[1] for r in red])
    nc = eval_alpha0(average, s0, t0)
    orb = orbit(A.theta, A.f, pts, N)
    terms = np.zeros(orb.s.shape, dtype=complex)
    for (m, n), c in a.coeffs.items():
        terms += c * np.exp(1j * orb.phases(m, n))
    cl = np.array([complex(math.fsum(terms[:, j].real), math.fsum(terms[:, j].imag)) / N
                   for j in range(len(pts))])
    return float(np.max(np.abs(nc - cl)))


def averages_csv(rows: Sequence[tuple[int, complex]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "re", "im"])
    for N, v in rows:
        w.writerow([N, "%.17g" % v.real, "%.17g" % v.imag])
    return buf.getvalue()


# -- processes on the torus ------------------------------------------------------------

@dataclass
class ProcessSystem:
    """``T(x, z) = (T_o x, f(x) z)`` over a base system with invariant measure sampler."""

    base_step: Callable
    base_sampler: Callable[[np.random.Generator, int], np.ndarray]
    fiber: Callable
    name: str = ""


def process_step(P: ProcessSystem, state: tuple) -> tuple:
    x, z = state
    z2 = complex(P.fiber(x)) * complex(z)
    return P.base_step(x), z2 / abs(z2)


def process_orbit(P: ProcessSystem, state: tuple, N: int) -> list[tuple]:
    out = [state]
    for _ in range(N - 1):
        state = process_step(P, state)
        out.append(state)
    return out


def rotation_system(theta: float, f: WindingMap | None = None) -> ProcessSystem:
    """Irrational rotation base on the circle; fiber ``f(e^{ix})``."""
    f = f if f is not None else WindingMap.one()

    def step(x):
        return float(np.angle(np.exp(1j * (x + theta))))

    def sampler(rng, n):
        return rng.uniform(-math.pi, math.pi, n)

    return ProcessSystem(step, sampler, lambda x: complex(f.at(np.array([x]))[0]), "rotation")


def product_rotation_system(theta1: float, theta2: float, f: WindingMap | None = None) -> ProcessSystem:
    """Rotation by ``(theta1, theta2)`` on the 2-torus; the fiber sees the first coordinate."""
    f = f if f is not None else WindingMap.identity()

    def step(x):
        return (float(np.angle(np.exp(1j * (x[0] + theta1)))),
                float(np.angle(np.exp(1j * (x[1] + theta2)))))

    def sampler(rng, n):
        return rng.uniform(-math.pi, math.pi, (n, 2))

    return ProcessSystem(step, sampler, lambda x: complex(f.at(np.array([x[0]]))[0]), "product-rotation")


def sample_points(rng: np.random.Generator, n: int) -> list[TorusPoint]:
    v = rng.uniform(0.0, TWO_PI, (n, 2))
    return [TorusPoint(float(a), float(b)) for a, b in v]
