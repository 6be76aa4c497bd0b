"""Functions on the unit circle: trigonometric polynomials, log-form circle maps, grids.

Angles follow the convention ``z = exp(i t)``.  A :class:`WindingMap` stores a
continuous map into the circle as ``exp(i (w t + h(t)))`` with ``w`` an integer
and ``h`` a real trigonometric polynomial, so pointwise products are additions.
"""

from __future__ import annotations

import math
from typing import Mapping, Union

import numpy as np
from scipy.signal import fftconvolve

from .angles import TWO_PI, frac_turns, mul_angle, mul_angles, point_phases
from .errors import AliasingError, TailTooLarge

Number = Union[int, float, complex]

# below this many coefficients we use direct convolution
_DIRECT_CONV = 64
# dense convolution is used while the combined span stays below this
_DENSE_SPAN = 1 << 22


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def _reduce(x: float) -> float:
    """Reduce a moderate raw angle to ``[-pi, pi]``."""
    if -math.pi <= x <= math.pi:
        return x
    return math.remainder(x, TWO_PI) if abs(x) < 64.0 else mul_angle(1, x)


class TrigPoly:
    """Finite sum ``sum_k c_k z^k`` stored as sorted frequency/amplitude arrays.

    Frequencies may be huge (the Liouville construction uses frequencies near
    ``2**31``) so the storage is sparse; :meth:`dense` gives a contiguous view
    when the span allows it.
    """

    __slots__ = ("freqs", "vals")

    def __init__(self, coeffs: Mapping[int, Number] | None = None, *, real: bool = False,
                 drop: float = 0.0):
        if coeffs:
            ks = np.fromiter((int(k) for k in coeffs), dtype=np.int64, count=len(coeffs))
            vs = np.fromiter((complex(v) for v in coeffs.values()), dtype=complex, count=len(coeffs))
        else:
            ks = np.zeros(0, dtype=np.int64)
            vs = np.zeros(0, dtype=complex)
        self._set(ks, vs, drop)
        if real and not self.is_real():
            raise ValueError("coefficients are not Hermitian-symmetric")

    def _set(self, ks: np.ndarray, vs: np.ndarray, drop: float) -> None:
        order = np.argsort(ks, kind="stable")
        ks, vs = ks[order], vs[order]
        keep = np.abs(vs) > drop
        self.freqs = ks[keep]
        self.vals = vs[keep]
        self.freqs.flags.writeable = False
        self.vals.flags.writeable = False

    @classmethod
    def from_arrays(cls, freqs, vals, *, drop: float = 0.0, summed: bool = True) -> "TrigPoly":
        """Build from parallel arrays; repeated frequencies are added unless ``summed`` is False."""
        freqs = np.asarray(freqs, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=complex).ravel()
        if summed and freqs.size:
            uniq, inv = np.unique(freqs, return_inverse=True)
            if uniq.size != freqs.size:
                acc = np.zeros(uniq.size, dtype=complex)
                np.add.at(acc, inv, vals)
                freqs, vals = uniq, acc
        out = cls.__new__(cls)
        out._set(freqs, vals, drop)
        return out

    @classmethod
    def from_dense(cls, lo: int, arr, *, drop: float = 0.0) -> "TrigPoly":
        arr = np.asarray(arr, dtype=complex)
        return cls.from_arrays(lo + np.arange(arr.size, dtype=np.int64), arr, drop=drop, summed=False)

    @classmethod
    def constant(cls, c: Number) -> "TrigPoly":
        return cls({0: c})

    @classmethod
    def monomial(cls, k: int, c: Number = 1.0) -> "TrigPoly":
        return cls({k: c})

    @classmethod
    def zero(cls) -> "TrigPoly":
        return cls()

    # -- views ---------------------------------------------------------------
    @property
    def coeffs(self) -> dict[int, complex]:
        return {int(k): complex(v) for k, v in zip(self.freqs, self.vals)}

    def __len__(self) -> int:
        return int(self.freqs.size)

    def __getitem__(self, k: int) -> complex:
        i = np.searchsorted(self.freqs, k)
        if i < self.freqs.size and self.freqs[i] == k:
            return complex(self.vals[i])
        return 0j

    def is_zero(self) -> bool:
        return self.freqs.size == 0

    def span(self) -> tuple[int, int]:
        if self.is_zero():
            return 0, 0
        return int(self.freqs[0]), int(self.freqs[-1])

    @property
    def degree(self) -> int:
        """Largest ``|k|`` in the support."""
        if self.is_zero():
            return 0
        return int(max(-self.freqs[0], self.freqs[-1]))

    def dense(self) -> tuple[int, np.ndarray]:
        lo, hi = self.span()
        arr = np.zeros(hi - lo + 1, dtype=complex)
        arr[self.freqs - lo] = self.vals
        return lo, arr

    def norm2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.vals) ** 2)))

    def l1(self) -> float:
        return float(np.sum(np.abs(self.vals)))

    def is_real(self, tol: float = 1e-12) -> bool:
        """True when ``c_{-k} = conj(c_k)``, i.e. the function is real-valued."""
        return self.max_diff(self.conj()) <= tol

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other: "TrigPoly | Number") -> "TrigPoly":
        if not isinstance(other, TrigPoly):
            other = TrigPoly.constant(other)
        return TrigPoly.from_arrays(np.concatenate([self.freqs, other.freqs]),
                                    np.concatenate([self.vals, other.vals]))

    __radd__ = __add__

    def __neg__(self) -> "TrigPoly":
        return TrigPoly.from_arrays(self.freqs, -self.vals, summed=False)

    def __sub__(self, other: "TrigPoly | Number") -> "TrigPoly":
        if not isinstance(other, TrigPoly):
            other = TrigPoly.constant(other)
        return self + (-other)

    def __rsub__(self, other: Number) -> "TrigPoly":
        return TrigPoly.constant(other) - self

    def __mul__(self, other: "TrigPoly | Number") -> "TrigPoly":
        if isinstance(other, TrigPoly):
            return poly_mul(self, other)
        return TrigPoly.from_arrays(self.freqs, self.vals * complex(other), summed=False)

    __rmul__ = __mul__

    def __truediv__(self, c: Number) -> "TrigPoly":
        return self * (1.0 / complex(c))

    def conj(self) -> "TrigPoly":
        """Pointwise complex conjugate on the circle."""
        return TrigPoly.from_arrays(-self.freqs[::-1], np.conj(self.vals[::-1]), summed=False)

    def shift(self, s: int) -> "TrigPoly":
        """Multiply by ``z**s``."""
        return TrigPoly.from_arrays(self.freqs + s, self.vals, summed=False)

    def prune(self, drop: float) -> "TrigPoly":
        return TrigPoly.from_arrays(self.freqs, self.vals, drop=drop, summed=False)

    def max_diff(self, other: "TrigPoly") -> float:
        """Largest coefficientwise difference."""
        d = self - other
        return float(np.max(np.abs(d.vals))) if len(d) else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrigPoly):
            return NotImplemented
        return (np.array_equal(self.freqs, other.freqs)
                and np.array_equal(self.vals, other.vals))

    def __hash__(self):
        return hash((self.freqs.tobytes(), self.vals.tobytes()))

    def __repr__(self) -> str:
        if len(self) > 6:
            lo, hi = self.span()
            return f"TrigPoly(<{len(self)} terms in [{lo}, {hi}]>)"
        return f"TrigPoly({self.coeffs})"

    # -- evaluation ----------------------------------------------------------
    def at(self, t) -> np.ndarray:
        """Evaluate at angles ``t`` (radians)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.is_zero():
            return np.zeros(t.shape, dtype=complex)
        if self.degree * float(np.max(np.abs(t))) <= 1024.0:
            tab = np.exp(1j * np.multiply.outer(self.freqs.astype(float), t.ravel()))
        else:
            tab = point_phases(self.freqs, t.ravel())
        return (self.vals @ tab).reshape(t.shape)

    def __call__(self, z) -> np.ndarray:
        """Evaluate at points ``z`` on the unit circle."""
        return self.at(np.angle(np.asarray(z, dtype=complex)))

    def on_grid(self, G: int) -> np.ndarray:
        """Samples at ``t_j = 2 pi j / G``.  Exact bucketing, no aliasing error."""
        buf = np.zeros(G, dtype=complex)
        np.add.at(buf, np.mod(self.freqs, G), self.vals)
        return np.fft.ifft(buf) * G


def poly_mul(p: TrigPoly, q: TrigPoly, drop: float = 0.0) -> TrigPoly:
    """Product of two trigonometric polynomials (convolution of coefficients)."""
    if p.is_zero() or q.is_zero():
        return TrigPoly()
    (plo, phi), (qlo, qhi) = p.span(), q.span()
    if (phi - plo) + (qhi - qlo) < _DENSE_SPAN:
        _, a = p.dense()
        _, b = q.dense()
        return TrigPoly.from_dense(plo + qlo, convolve(a, b), drop=drop)
    ks = np.add.outer(p.freqs, q.freqs).ravel()
    vs = np.multiply.outer(p.vals, q.vals).ravel()
    return TrigPoly.from_arrays(ks, vs, drop=drop)


def convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if min(a.size, b.size) <= _DIRECT_CONV:
        return np.convolve(a, b)
    return fftconvolve(a, b)


def rotation_phases(freqs: np.ndarray, beta: float, times: int = 1) -> np.ndarray:
    """``exp(i k times beta)`` for each frequency, with exact argument reduction."""
    freqs = np.asarray(freqs, dtype=np.int64)
    if times == 1:
        return np.exp(1j * mul_angles(freqs, beta))
    return np.exp(1j * mul_angles(freqs.astype(object) * int(times), beta))


def turn_phases(freqs: np.ndarray, x: float, times: int = 1) -> np.ndarray:
    """``exp(2 pi i k times x)`` for raw turn count ``x``, reduced exactly."""
    num, den = float(x).as_integer_ratio()
    out = np.empty(len(freqs), dtype=float)
    for i, k in enumerate(np.asarray(freqs, dtype=object)):
        r = (int(k) * int(times) * num) % den
        if 2 * r >= den:
            r -= den
        out[i] = r / den
    return np.exp(2j * np.pi * out)


class WindingMap:
    """Continuous map ``T -> T`` written ``exp(i (w t + h(t)))``.

    ``phase`` is a real :class:`TrigPoly`; its constant term is kept reduced
    to ``[-pi, pi]`` so long products do not drift.
    """

    __slots__ = ("winding", "phase")

    def __init__(self, winding: int, phase: TrigPoly | None = None, *, check: bool = True):
        self.winding = int(winding)
        if phase is None:
            phase = TrigPoly()
        if check and not phase.is_real(1e-12 * max(1.0, phase.l1())):
            raise ValueError("phase series of a WindingMap must be real")
        h0 = phase[0]
        if h0 != 0 and (h0.imag != 0.0 or abs(h0.real) > math.pi):
            rest = phase - TrigPoly.constant(h0)
            phase = rest + TrigPoly.constant(_reduce(h0.real))
        self.phase = phase

    @classmethod
    def identity(cls) -> "WindingMap":
        """The map ``z -> z``."""
        return cls(1)

    @classmethod
    def one(cls) -> "WindingMap":
        return cls(0)

    @classmethod
    def character(cls, z0: complex = 1.0, w: int = 1) -> "WindingMap":
        """``z -> z0 z**w`` for unit ``z0``."""
        a = math.atan2(complex(z0).imag, complex(z0).real)
        return cls(w, TrigPoly.constant(a) if a else TrigPoly())

    @classmethod
    def constant(cls, angle: float) -> "WindingMap":
        return cls(0, TrigPoly.constant(angle) if angle else TrigPoly())

    @classmethod
    def exp_sin(cls, amp: float, freq: int = 1, winding: int = 0) -> "WindingMap":
        """``exp(i (w t + amp sin(freq t)))``."""
        if amp == 0 or freq == 0:
            return cls(winding)
        return cls(winding, TrigPoly({freq: amp / 2j, -freq: -amp / 2j}))

    def is_constant(self) -> bool:
        return self.winding == 0 and all(k == 0 for k in self.phase.freqs)

    def const_angle(self) -> float:
        return float(self.phase[0].real)

    def phase_only_constant(self) -> bool:
        """True when the phase has no oscillating part, i.e. ``f = e^{ic} z^w``."""
        return all(k == 0 for k in self.phase.freqs)

    # -- evaluation ----------------------------------------------------------
    def at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        flat = t.ravel()
        if self.winding == 0:
            lin = np.zeros(flat.size)
        elif abs(self.winding) * float(np.max(np.abs(flat))) <= 1024.0:
            lin = self.winding * flat
        else:
            lin = np.array([mul_angle(self.winding, x) for x in flat])
        h = self.phase.at(flat).real if len(self.phase) else 0.0
        return np.exp(1j * (lin + h)).reshape(t.shape)

    def __call__(self, z) -> np.ndarray:
        return self.at(np.angle(np.asarray(z, dtype=complex)))

    def on_grid(self, G: int) -> np.ndarray:
        j = np.arange(G, dtype=np.int64)
        lin = np.exp(2j * np.pi * np.mod(self.winding * j, G) / G)
        if len(self.phase) == 0:
            return lin
        return lin * np.exp(1j * self.phase.on_grid(G).real)

    def grid_fn(self, G: int) -> "GridFn":
        return GridFn(G, self.on_grid(G))

    def conj(self) -> "WindingMap":
        return WindingMap(-self.winding, -self.phase, check=False)

    def __mul__(self, other: "WindingMap") -> "WindingMap":
        return mul(self, other)

    def max_diff(self, other: "WindingMap", G: int = 64) -> float:
        return float(np.max(np.abs(self.on_grid(G) - other.on_grid(G))))

    def __repr__(self) -> str:
        return f"WindingMap(winding={self.winding}, phase={self.phase!r})"


class GridFn:
    """Samples of a function at ``t_j = 2 pi j / size``; ``size`` is a power of two."""

    __slots__ = ("size", "samples")

    def __init__(self, size: int, samples):
        if size <= 0 or size & (size - 1):
            raise ValueError("grid size must be a power of two")
        samples = np.asarray(samples, dtype=complex)
        if samples.shape != (size,):
            raise ValueError("expected %d samples" % size)
        self.size = int(size)
        self.samples = samples
        self.samples.flags.writeable = False

    @classmethod
    def from_trig(cls, p: TrigPoly, size: int) -> "GridFn":
        return cls(size, p.on_grid(size))

    @classmethod
    def from_callable(cls, fn, size: int) -> "GridFn":
        return cls(size, fn(grid_points(size)))

    def to_trig(self, K: int | None = None, drop: float = 0.0) -> TrigPoly:
        """Fourier coefficients for frequencies in ``[-K, K]`` (default ``K = size/2 - 1``)."""
        G = self.size
        if K is None:
            K = G // 2 - 1
        if K >= G / 2:
            raise ValueError("need K < G/2")
        c = np.fft.fft(self.samples) / G
        ks = np.arange(-K, K + 1, dtype=np.int64)
        return TrigPoly.from_arrays(ks, c[np.mod(ks, G)], drop=drop, summed=False)

    def __mul__(self, other: "GridFn") -> "GridFn":
        if other.size != self.size:
            raise ValueError("grid size mismatch")
        return GridFn(self.size, self.samples * other.samples)


def grid_points(G: int) -> np.ndarray:
    return TWO_PI * np.arange(G) / G


# -- operations ----------------------------------------------------------------

def rotate(f: WindingMap | TrigPoly, beta: float, times: int = 1):
    """Precompose with the rotation by ``times * beta`` radians.

    ``rotate(f, b)(e^{it}) = f(e^{i(t+b)})``.  The product ``times * beta`` is
    formed exactly, so large iterate counts do not lose phase.
    """
    if isinstance(f, TrigPoly):
        if f.is_zero() or (beta == 0.0) or times == 0:
            return f
        return TrigPoly.from_arrays(f.freqs, f.vals * rotation_phases(f.freqs, beta, times), summed=False)
    if beta == 0.0 or times == 0:
        return f
    h = rotate(f.phase, beta, times)
    if f.winding:
        h = h + TrigPoly.constant(mul_angle(int(f.winding) * int(times), beta))
    return WindingMap(f.winding, h, check=False)


def rotate_turns(f: WindingMap | TrigPoly, x: float, times: int = 1):
    """Rotation by ``2 pi times x`` radians for a raw turn count ``x`` (used for ``alpha``)."""
    if x == 0.0 or times == 0:
        return f
    if isinstance(f, TrigPoly):
        if f.is_zero():
            return f
        return TrigPoly.from_arrays(f.freqs, f.vals * turn_phases(f.freqs, x, times), summed=False)
    h = rotate_turns(f.phase, x, times)
    if f.winding:
        h = h + TrigPoly.constant(TWO_PI * frac_turns(int(f.winding) * int(times), x))
    return WindingMap(f.winding, h, check=False)


def mul(f: WindingMap, g: WindingMap) -> WindingMap:
    """Pointwise product; windings and phases add."""
    return WindingMap(f.winding + g.winding, f.phase + g.phase, check=False)


def conj(f: WindingMap | TrigPoly):
    return f.conj()


def winding_number(samples: GridFn | np.ndarray, max_jump: float = 0.5 * math.pi,
                   unit_tol: float = 1e-6) -> int:
    """Degree of a sampled circle map, by tracking the argument around the grid.

    A wrapped argument difference can never exceed pi in modulus, so a grid
    that is too coarse shows up as jumps close to pi; anything at or above
    ``max_jump`` is treated as aliasing.
    """
    s = samples.samples if isinstance(samples, GridFn) else np.asarray(samples, dtype=complex)
    if s.size < 3:
        raise AliasingError("need at least three samples")
    if np.max(np.abs(np.abs(s) - 1.0)) > unit_tol:
        raise ValueError("samples are not unimodular")
    d = np.angle(np.roll(s, -1) / s)
    if np.max(np.abs(d)) >= max_jump:
        raise AliasingError("argument jump %.3g exceeds %.3g; refine the grid"
                            % (float(np.max(np.abs(d))), max_jump))
    total = float(np.sum(d)) / TWO_PI
    w = round(total)
    if abs(total - w) > 1e-6:
        raise AliasingError("argument increment is not a multiple of 2 pi")
    return int(w)


def _phase_spectrum(f: WindingMap, G: int) -> np.ndarray:
    """FFT coefficients of ``exp(i h)`` on a G-grid (index = frequency mod G)."""
    e = np.exp(1j * f.phase.on_grid(G).real)
    return np.fft.fft(e) / G


def to_fourier(f: WindingMap, G: int = 4096, K: int = 512) -> tuple[TrigPoly, float]:
    """Truncated Fourier series of ``f`` on ``[w-K, w+K]`` plus the l2 tail outside it.

    The window is centred on the winding ``w`` since that is where the
    spectrum of ``z^w exp(i h)`` sits.
    """
    if K >= G / 2:
        raise ValueError("need K < G/2")
    w = f.winding
    if f.phase_only_constant():
        return TrigPoly({w: np.exp(1j * f.const_angle())}), 0.0
    c = _phase_spectrum(f, G)
    ks = np.arange(-K, K + 1, dtype=np.int64)
    idx = np.mod(ks, G)
    inside = np.zeros(G, dtype=bool)
    inside[idx] = True
    tail = float(np.sqrt(np.sum(np.abs(c[~inside]) ** 2)))
    return TrigPoly.from_arrays(ks + w, c[idx], summed=False), tail


def fourier_series(f: WindingMap, tail_tol: float = 1e-8, G: int | None = None,
                   max_grid: int = 1 << 22, exact_tol: float = 1e-16) -> tuple[TrigPoly, float]:
    """Fourier series of ``f`` with the grid refined until the spectrum is resolved.

    The grid is doubled until every coefficient in the outer half of the FFT
    window is below ``exact_tol`` (rounding level, so aliasing is negligible).  If the
    largest grid still leaves more than ``tail_tol`` outside, TailTooLarge is
    raised rather than truncating silently.
    """
    if f.phase_only_constant():
        return TrigPoly({f.winding: np.exp(1j * f.const_angle())}), 0.0
    deg = f.phase.degree
    amp = f.phase.l1()
    G0 = _next_pow2(max(64, 4 * int(deg * (1.0 + amp)) + 1))
    G = min(max(G or 0, G0), _next_pow2(max_grid))
    while True:
        c = _phase_spectrum(f, G)
        ks = np.fft.fftfreq(G, 1.0 / G).astype(np.int64)
        outer = np.abs(ks) > G // 4
        tail = float(np.sqrt(np.sum(np.abs(c[outer]) ** 2)))
        if float(np.max(np.abs(c[outer]))) <= exact_tol or (G >= max_grid and tail <= tail_tol):
            keep = ~outer
            order = np.argsort(ks[keep])
            p = TrigPoly.from_arrays(ks[keep][order] + f.winding, c[keep][order], summed=False)
            return p.prune(exact_tol), tail
        if G >= max_grid:
            raise TailTooLarge("Fourier tail %.3g exceeds %.3g at grid %d" % (tail, tail_tol, G))
        G *= 2


def mul_poly_map(c: TrigPoly, f: WindingMap, tail_tol: float = 1e-8,
                 max_grid: int = 1 << 22) -> TrigPoly:
    """Fourier coefficients of ``c(z) f(z)`` for a trig polynomial ``c`` and circle map ``f``."""
    if c.is_zero():
        return c
    if f.phase_only_constant():
        return (c * np.exp(1j * f.const_angle())).shift(f.winding)
    F, _ = fourier_series(f, tail_tol=tail_tol, max_grid=max_grid)
    return poly_mul(c, F)


def sup_norm(p: TrigPoly, G: int = 4096) -> tuple[float, float]:
    """Two-sided bound on ``max |p|`` over the circle from samples on a G-grid.

    ``lower`` is the largest sample.  ``upper`` is the best of three valid
    bounds: the derivative bound, the same bound after removing the central
    frequency (which does not change ``|p|``), and Bernstein's inequality.
    G is raised to the next power of two >= 8 * span if needed.
    """
    if p.is_zero():
        return 0.0, 0.0
    lo, hi = p.span()
    centre = (lo + hi) // 2
    q = p.shift(-centre)
    D = max(centre - lo, hi - centre)
    G = max(int(G), _next_pow2(max(8, 8 * (hi - lo))))
    vals = np.abs(q.on_grid(G))
    lower = float(np.max(vals))
    slack = 8.0 * np.finfo(float).eps * p.l1() * math.log2(G)
    k = q.freqs.astype(float)
    raw = lower + (TWO_PI / G) * float(np.sum(np.abs(p.freqs.astype(float)) * np.abs(p.vals)))
    centred = lower + (math.pi / G) * float(np.sum(np.abs(k) * np.abs(q.vals)))
    bounds = [raw, centred]
    r = math.pi * D / G
    if r < 1.0:
        bounds.append(lower / (1.0 - r))
    upper = min(min(bounds), p.l1()) + slack
    return lower, max(upper, lower)
