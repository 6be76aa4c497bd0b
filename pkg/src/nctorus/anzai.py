"""The Anzai skew-product ``U -> e^{i theta} U``, ``V -> f(U) V`` on ``A_alpha``.

Mode by mode the map acts as ``c(U) V^n -> c(e^{i theta} U) f_n(U) V^n`` where
``f_n`` is the alpha-cocycle of ``f``; the k-th iterate uses the theta-cocycle
``f_n^{[k]}(z) = prod_{j<k} f_n(e^{i j theta} z)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .algebra import DROP_TOL, NCPoly, norm_bounds, trace
from .angles import GOLDEN_THETA, TWO_PI, mul_angle, mul_angles
from .circle import (TrigPoly, WindingMap, conj, fourier_series, mul, mul_poly_map, rotate,
                     rotate_turns)
from .errors import AlphaMismatch


@dataclass(frozen=True)
class Weight:
    """A unit weight ``lambda = e^{i angle}``.

    When ``theta_mult`` is set the weight is exactly ``e^{i m theta}`` and the
    Cesaro engine cancels it against the rotation phases symbolically.
    """

    angle: float = 0.0
    theta_mult: int | None = None

    @classmethod
    def one(cls) -> "Weight":
        return cls(0.0, 0)

    @classmethod
    def theta(cls, theta: float, m: int = 1) -> "Weight":
        return cls(mul_angle(m, theta), int(m))

    @classmethod
    def from_complex(cls, lam: complex) -> "Weight":
        lam = complex(lam)
        if abs(abs(lam) - 1.0) > 1e-12:
            raise ValueError("weight must be unimodular")
        if lam == 1:
            return cls.one()
        return cls(math.atan2(lam.imag, lam.real))

    @property
    def value(self) -> complex:
        return complex(math.cos(self.angle), math.sin(self.angle))


def as_weight(lam, theta: float) -> Weight:
    if isinstance(lam, Weight):
        return lam
    return Weight.from_complex(lam)


class AnzaiMap:
    """``Phi_{theta, f}`` on ``A_alpha``; cocycles are memoised (thread-safe)."""

    def __init__(self, theta: float, alpha: float, f: WindingMap, *, tail_tol: float = 1e-8,
                 max_grid: int = 1 << 22):
        self.theta = float(theta)
        self.alpha = float(alpha)
        self.f = f
        self.tail_tol = tail_tol
        self.max_grid = max_grid
        self._cache: dict = {}
        self._lock = threading.Lock()
        self._inverse: AnzaiMap | None = None

    def __repr__(self) -> str:
        return f"AnzaiMap(theta={self.theta!r}, alpha={self.alpha!r}, f={self.f!r})"

    def _memo(self, key, build: Callable):
        v = self._cache.get(key)
        if v is None:
            v = build()
            with self._lock:
                v = self._cache.setdefault(key, v)
        return v

    def check(self, x: NCPoly) -> None:
        if float(x.alpha).hex() != self.alpha.hex():
            raise AlphaMismatch(f"map has alpha {self.alpha!r}, element has {x.alpha!r}")

    def fourier(self, g: WindingMap) -> TrigPoly:
        F, _ = fourier_series(g, tail_tol=self.tail_tol, max_grid=self.max_grid)
        return F


def alpha_cocycle(A: AnzaiMap, n: int) -> WindingMap:
    """``f_n``: product of ``f(e^{-2 pi i l alpha} z)`` for ``l < n``; conjugate branch for ``n < 0``."""
    n = int(n)

    def build():
        if n == 0:
            return WindingMap.one()
        out = WindingMap.one()
        if n > 0:
            for l in range(n):
                out = mul(out, rotate_turns(A.f, A.alpha, -l))
        else:
            for l in range(1, -n + 1):
                out = mul(out, conj(rotate_turns(A.f, A.alpha, l)))
        return out

    return A._memo(("alpha", n), build)


def theta_cocycle(A: AnzaiMap, n: int, k: int) -> WindingMap:
    """``f_n^{[k]}`` by binary doubling, ``f^{[j+k]}(z) = f^{[j]}(z) f^{[k]}(e^{i j theta} z)``."""
    if k < 0:
        raise ValueError("theta_cocycle needs k >= 0")
    n, k = int(n), int(k)

    def build():
        if k == 0:
            return WindingMap.one()
        power, plen = alpha_cocycle(A, n), 1
        acc, alen = WindingMap.one(), 0
        kk = k
        while True:
            if kk & 1:
                acc = mul(acc, rotate(power, A.theta, alen))
                alen += plen
            kk >>= 1
            if not kk:
                return acc
            power = mul(power, rotate(power, A.theta, plen))
            plen *= 2

    return A._memo(("theta", n, k), build)


def naive_theta_cocycle(A: AnzaiMap, n: int, k: int) -> WindingMap:
    out = WindingMap.one()
    fn = alpha_cocycle(A, n)
    for j in range(k):
        out = mul(out, rotate(fn, A.theta, j))
    return out


def _apply_modes(A: AnzaiMap, x: NCPoly, k: int) -> NCPoly:
    modes = {}
    for n, c in x.modes.items():
        cocycle = alpha_cocycle(A, n) if k == 1 else theta_cocycle(A, n, k)
        modes[n] = mul_poly_map(rotate(c, A.theta, k), cocycle, A.tail_tol, A.max_grid)
    return NCPoly.from_modes(x.alpha, modes, x.drop)


def apply(A: AnzaiMap, x: NCPoly) -> NCPoly:
    A.check(x)
    return _apply_modes(A, x, 1)


def inverse(A: AnzaiMap) -> AnzaiMap:
    """``Phi_{theta,f}^{-1} = Phi_{-theta, conj(f o R_{-theta})}``."""
    if A._inverse is None:
        B = AnzaiMap(-A.theta, A.alpha, conj(rotate(A.f, -A.theta)),
                     tail_tol=A.tail_tol, max_grid=A.max_grid)
        B._inverse = A
        A._inverse = B
    return A._inverse


def apply_iter(A: AnzaiMap, x: NCPoly, k: int) -> NCPoly:
    """``Phi^k(x)`` for any integer k; negative k goes through the inverse map."""
    A.check(x)
    k = int(k)
    if k == 0:
        return x
    if k < 0:
        return apply_iter(inverse(A), x, -k)
    return _apply_modes(A, x, k)


def right_twist(f: WindingMap, alpha: float) -> WindingMap:
    """The ``f'`` with ``f'(U) V = V f(U)``, i.e. ``f o R_{-2 pi alpha}``.

    Lets a map defined by ``V -> V f(U)`` be expressed in the standard form.
    """
    return rotate_turns(f, alpha, -1)


# -- Cesaro engine ---------------------------------------------------------------

@dataclass
class Checkpoint:
    N: int
    average: NCPoly
    lower: float
    upper: float
    gns_norm: float
    limit_dev: float


@dataclass
class CesaroResult:
    lam: complex
    checkpoints: list[Checkpoint] = field(default_factory=list)
    candidate: NCPoly | None = None

    def csv_rows(self) -> list[list]:
        return [[c.N, self.lam.real, self.lam.imag, c.lower, c.upper, c.gns_norm, c.limit_dev]
                for c in self.checkpoints]

    CSV_HEADER = ["N", "lambda_re", "lambda_im", "lower_norm", "upper_norm", "gns_norm", "limit_dev"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for row in self.csv_rows():
            w.writerow([r if isinstance(r, int) else "%.17g" % r for r in row])
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        return {"lambda": [self.lam.real, self.lam.imag],
                "averages": [{"N": c.N, "average": c.average.to_json_obj()} for c in self.checkpoints]}


def candidate_limit(A: AnzaiMap, a: NCPoly, w: Weight) -> NCPoly:
    """The expected limit of the weighted averages.

    ``tau(U^{-m} a) U^m`` when ``lambda = e^{i m theta}`` is a continuous eigenvalue;
    zero for other weights unless ``f`` is constant, where ``e^{i(m theta + n c)}``
    eigenvalues of the monomials ``U^m V^n`` are matched as well.
    """
    if w.theta_mult is not None:
        m = w.theta_mult
        return NCPoly.monomial(a.alpha, m, 0, a[(m, 0)]) if a[(m, 0)] else NCPoly.zero(a.alpha)
    lam = w.value
    if A.f.is_constant():
        c = A.f.const_angle()
        out = {}
        for (m, n), v in a.coeffs.items():
            eig = math.cos(mul_angle(m, A.theta) + mul_angle(n, c)) + 1j * math.sin(
                mul_angle(m, A.theta) + mul_angle(n, c))
            if abs(eig - lam) < 1e-13:
                out[(m, n)] = v
        return NCPoly(a.alpha, out)
    if abs(lam - 1.0) < 1e-15:
        return NCPoly.one(a.alpha) * trace(a)
    return NCPoly.zero(a.alpha)


def _step_angles(A: AnzaiMap, ms: np.ndarray, ks: np.ndarray, w: Weight) -> np.ndarray:
    """Reduced angles ``k m theta - k kappa`` for the frequencies of one mode; shape (len(ks), len(ms))."""
    ko = np.asarray(ks, dtype=object)[:, None]
    if w.theta_mult is not None:
        mo = (np.asarray(ms, dtype=np.int64) - w.theta_mult).astype(object)[None, :]
        return mul_angles(ko * mo, A.theta)
    mo = np.asarray(ms, dtype=object)[None, :]
    out = mul_angles(ko * mo, A.theta)
    if w.angle:
        out = out - mul_angles(np.asarray(ks, dtype=object), w.angle)[:, None]
    return out


class _ModeStream:
    """Closed-form description of ``f_n^{[k]}`` for every k.

    With ``f_n = z^W exp(i(phi_0 + sum_{m != 0} phi_m z^m))`` the theta-cocycle is
    ``z^{kW} exp(i(W theta k(k-1)/2 + k phi_0 + sum_m phi_m D_m(k) z^m))`` where
    ``D_m(k) = sum_{j<k} e^{i j m theta}``.
    """

    def __init__(self, A: AnzaiMap, n: int):
        fn = alpha_cocycle(A, n)
        self.theta = A.theta
        self.W = fn.winding
        self.phi0 = fn.const_angle()
        osc = fn.phase - TrigPoly.constant(fn.phase[0])
        self.ms = osc.freqs
        self.phis = osc.vals
        self.y = mul_angles(self.ms, A.theta)

    def const_angles(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=object)
        out = np.zeros(len(ks))
        if self.W:
            tri = np.array([int(k) * (int(k) - 1) // 2 * self.W for k in ks], dtype=object)
            out += mul_angles(tri, self.theta)
        if self.phi0:
            out += mul_angles(ks, self.phi0)
        return out

    def osc_coeffs(self, ks: np.ndarray) -> np.ndarray:
        """``phi_m D_m(k)``, shape (len(ks), len(ms))."""
        if self.ms.size == 0:
            return np.zeros((len(ks), 0), dtype=complex)
        ko = np.asarray(ks, dtype=object)[:, None]
        r = mul_angles(ko * self.ms.astype(object)[None, :], self.theta)
        y = self.y[None, :]
        kf = np.asarray(ks, dtype=float)[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            D = np.exp(0.5j * (r - y)) * np.sin(0.5 * r) / np.sin(0.5 * y)
        D = np.where(y == 0.0, kf + 0j, D)
        return D * self.phis[None, :]


def mode_terms(A: AnzaiMap, n: int, c: TrigPoly, w: Weight, Nmax: int, batch: int = 512):
    """Yield ``(k, lo, coeffs)`` for ``lambda^{-k} (c o R_{k theta}) f_n^{[k]}``, ``k < Nmax``.

    ``coeffs`` is a dense array of Fourier coefficients starting at frequency ``lo``.
    """
    stream = _ModeStream(A, n)
    W = stream.W
    ms = c.freqs
    G = None
    has_osc = stream.ms.size > 0
    lo_c, _ = c.span()
    for start in range(0, Nmax, batch):
        ks = np.arange(start, min(start + batch, Nmax), dtype=np.int64)
        ang = _step_angles(A, ms, ks, w) + stream.const_angles(ks)[:, None]
        coef = c.vals[None, :] * np.exp(1j * ang)
        osc = stream.osc_coeffs(ks) if has_osc else None
        for i, k in enumerate(ks):
            shift = int(k) * W
            cp = TrigPoly.from_arrays(ms, coef[i], summed=False)
            if has_osc:
                E = WindingMap(0, TrigPoly.from_arrays(stream.ms, osc[i], summed=False), check=False)
                F, _ = fourier_series(E, tail_tol=A.tail_tol, G=G, max_grid=A.max_grid)
                flo, fhi = F.span()
                G = _next_pow2(2 * (fhi - flo + 1))
                _, fd = F.dense()
                _, cd = cp.dense()
                yield int(k), lo_c + flo + shift, np.convolve(cd, fd)
            else:
                _, cd = cp.dense()
                yield int(k), lo_c + shift, cd


def _mode_average(A: AnzaiMap, n: int, c: TrigPoly, w: Weight, schedule: Sequence[int]) -> list[TrigPoly]:
    """Sum of ``lambda^{-k} (c o R_{k theta}) f_n^{[k]}`` over ``k < N``, divided by N, for each N."""
    W = _ModeStream(A, n).W
    Nmax = schedule[-1]
    lo_c, hi_c = c.span()
    acc = _Accumulator(lo_c + min(0, (Nmax - 1) * W), hi_c + max(0, (Nmax - 1) * W))
    out = []
    ti = 0
    for k, lo, arr in mode_terms(A, n, c, w, Nmax):
        acc.add(lo, arr)
        while ti < len(schedule) and k + 1 == schedule[ti]:
            out.append(acc.poly(1.0 / schedule[ti]))
            ti += 1
    return out


class _Accumulator:
    """Dense coefficient accumulator that grows on demand."""

    def __init__(self, lo: int, hi: int):
        self.base = int(lo)
        self.buf = np.zeros(int(hi - lo + 1), dtype=complex)

    def _fit(self, lo: int, hi: int) -> None:
        top = self.base + self.buf.size - 1
        if lo >= self.base and hi <= top:
            return
        nlo, nhi = min(lo, self.base), max(hi, top)
        pad = (nhi - nlo + 1) // 4
        nlo, nhi = nlo - pad, nhi + pad
        buf = np.zeros(nhi - nlo + 1, dtype=complex)
        buf[self.base - nlo:self.base - nlo + self.buf.size] = self.buf
        self.base, self.buf = nlo, buf

    def add(self, lo: int, arr: np.ndarray) -> None:
        self._fit(lo, lo + arr.size - 1)
        o = lo - self.base
        self.buf[o:o + arr.size] += arr

    def poly(self, scale: float) -> TrigPoly:
        return TrigPoly.from_dense(self.base, self.buf * scale, drop=DROP_TOL)


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def cesaro(A: AnzaiMap, a: NCPoly, lam=1.0, schedule: Iterable[int] = (64, 256, 1024),
           G: int = 4096, threads: int = 1, candidate: NCPoly | None = None) -> CesaroResult:
    """Weighted Cesaro means ``M(N) = (1/N) sum_{k<N} lambda^{-k} Phi^k(a)`` at each N.

    Each step costs one cocycle spectrum per mode: the theta-cocycle phase is
    known in closed form, so nothing is re-iterated.
    """
    A.check(a)
    schedule = [int(N) for N in schedule]
    if any(N <= 0 for N in schedule) or any(b <= a_ for a_, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be positive and strictly increasing")
    w = as_weight(lam, A.theta)
    if candidate is None:
        candidate = candidate_limit(A, a, w)
    ns = sorted(a.modes)
    if threads > 1 and len(ns) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(_mode_average, A, n, a.modes[n], w, schedule) for n in ns]
            per_mode = [f.result() for f in futs]
    else:
        per_mode = [_mode_average(A, n, a.modes[n], w, schedule) for n in ns]
    res = CesaroResult(w.value, candidate=candidate)
    for i, N in enumerate(schedule):
        M = NCPoly.from_modes(a.alpha, {n: per_mode[j][i] for j, n in enumerate(ns)})
        lo, hi = norm_bounds(M, G)
        res.checkpoints.append(Checkpoint(N, M, lo, hi, M.gns_norm(), (M - candidate).gns_norm()))
    return res


def cesaro_naive(A: AnzaiMap, a: NCPoly, lam, N: int) -> NCPoly:
    """Reference route: iterate ``apply`` N times."""
    w = as_weight(lam, A.theta)
    total = NCPoly.zero(a.alpha)
    x = a
    for k in range(N):
        total = total + x * complex(math.cos(-mul_angle(k, w.angle)), math.sin(-mul_angle(k, w.angle)))
        x = apply(A, x)
    return total / N


# -- pointwise Cesaro ------------------------------------------------------------------

def _grid_angle_table(freqs: np.ndarray, P: int) -> np.ndarray:
    """``m t_j`` reduced, for ``t_j = 2 pi j / P``; exact integer arithmetic."""
    j = np.arange(P, dtype=object)
    idx = np.array([[(int(m) * int(jj)) % P for jj in j] for m in freqs], dtype=np.int64).reshape(len(freqs), P)
    return TWO_PI * idx / P


def cesaro_mode_points(A: AnzaiMap, c: TrigPoly, n: int, lam, schedule: Sequence[int],
                       P: int = 32, batch: int = 4096) -> np.ndarray:
    """Values of the mode-n coefficient function of ``M(N)`` at ``t_j = 2 pi j / P``.

    Returns an array of shape (len(schedule), P).  Works for cocycles whose
    frequencies are far too large for any grid, since every phase is reduced
    exactly.
    """
    w = as_weight(lam, A.theta)
    stream = _ModeStream(A, n)
    schedule = [int(N) for N in schedule]
    Nmax = schedule[-1]
    ctab = _grid_angle_table(c.freqs, P)                # (mc, P)
    otab = np.exp(1j * _grid_angle_table(stream.ms, P))  # (mo, P)
    jw = np.array([(stream.W * jj) % P for jj in range(P)], dtype=np.int64)
    out = np.zeros((len(schedule), P), dtype=complex)
    total = np.zeros(P, dtype=complex)
    ti = 0
    for start in range(0, Nmax, batch):
        ks = np.arange(start, min(start + batch, Nmax), dtype=np.int64)
        ang = _step_angles(A, c.freqs, ks, w)             # (b, mc)
        const = stream.const_angles(ks)                    # (b,)
        # c(e^{i(t + k theta)}) lambda^{-k}
        cv = np.exp(1j * (ang[:, :, None] + ctab[None, :, :])) * c.vals[None, :, None]
        val = cv.sum(axis=1)                               # (b, P)
        lin = TWO_PI * np.mod(np.multiply.outer(ks % P, jw), P) / P
        ph = const[:, None] + lin
        if stream.ms.size:
            ph = ph + (stream.osc_coeffs(ks) @ otab).real
        terms = val * np.exp(1j * ph)
        csum = np.cumsum(terms, axis=0) + total
        while ti < len(schedule) and schedule[ti] <= ks[-1] + 1:
            out[ti] = csum[schedule[ti] - 1 - start] / schedule[ti]
            ti += 1
        total = csum[-1]
    return out


def default_theta() -> float:
    return GOLDEN_THETA
