"""GNS space of the trace: vectors on the lattice, the Koopman isometry, spectral measures.

The basis vectors ``e_{m,n} = pi(U^m V^n) xi_tau`` are orthonormal, so a finitely
supported vector is the same data as an :class:`NCPoly`; this module reuses
that identification throughout.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh, toeplitz

from .algebra import NCPoly, mul
from .angles import mul_angles
from .anzai import AnzaiMap, Weight, apply_iter, as_weight, mode_terms


class GNSVector:
    """Finitely supported vector ``sum c_{m,n} e_{m,n}``."""

    __slots__ = ("poly",)

    def __init__(self, alpha: float, coeffs=None):
        self.poly = NCPoly(alpha, coeffs or {})

    @classmethod
    def of(cls, x: NCPoly) -> "GNSVector":
        """The vector ``pi(x) xi_tau``."""
        v = cls.__new__(cls)
        v.poly = x
        return v

    @classmethod
    def vacuum(cls, alpha: float) -> "GNSVector":
        """The cyclic vector ``xi_tau = e_{0,0}``."""
        return cls.of(NCPoly.one(alpha))

    @classmethod
    def basis(cls, alpha: float, m: int, n: int) -> "GNSVector":
        return cls.of(NCPoly.monomial(alpha, m, n))

    @property
    def alpha(self) -> float:
        return self.poly.alpha

    @property
    def coeffs(self) -> dict:
        return self.poly.coeffs

    def norm(self) -> float:
        return self.poly.gns_norm()

    def __add__(self, other: "GNSVector") -> "GNSVector":
        return GNSVector.of(self.poly + other.poly)

    def __sub__(self, other: "GNSVector") -> "GNSVector":
        return GNSVector.of(self.poly - other.poly)

    def __mul__(self, c) -> "GNSVector":
        return GNSVector.of(self.poly * c)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"GNSVector({self.poly!r})"


def inner(x: GNSVector, y: GNSVector) -> complex:
    """``<x, y>``, linear in the first slot."""
    x.poly.check_alpha(y.poly)
    total = 0j
    for n, p in x.poly.modes.items():
        q = y.poly.modes.get(n)
        if q is None:
            continue
        common, ip, iq = np.intersect1d(p.freqs, q.freqs, assume_unique=True, return_indices=True)
        if common.size:
            total += complex(np.sum(p.vals[ip] * np.conj(q.vals[iq])))
    return total


def act(x: NCPoly, xi: GNSVector) -> GNSVector:
    """``pi_tau(x) xi``."""
    return GNSVector.of(mul(x, xi.poly))


def koopman(A: AnzaiMap, xi: GNSVector, k: int = 1) -> GNSVector:
    """``V^k xi`` where ``V pi(a) xi_tau = pi(Phi(a)) xi_tau``."""
    return GNSVector.of(apply_iter(A, xi.poly, k))


@dataclass
class CorrSeq:
    """``values[n] = <V^n xi, xi>`` for ``n = 0..N``."""

    values: np.ndarray
    base: str = ""

    def __len__(self) -> int:
        return int(self.values.size)

    def full(self, K: int) -> np.ndarray:
        """``mu(-K..K)`` using ``mu(-n) = conj(mu(n))``."""
        v = self.values[:K + 1]
        return np.concatenate([np.conj(v[:0:-1]), v])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "re", "im"])
        for n, v in enumerate(self.values):
            w.writerow([n, "%.17g" % v.real, "%.17g" % v.imag])
        return buf.getvalue()


def correlation(A: AnzaiMap, xi: GNSVector, N: int, base: str = "") -> CorrSeq:
    """Correlation sequence up to horizon N (``N + 1`` values).

    Each mode of ``xi`` is carried to itself by the map, so the inner product
    splits by mode and the iterates are streamed from the cocycle closed form.
    """
    A.check(xi.poly)
    if xi.norm() == 0:
        raise ValueError("correlation of the zero vector")
    vals = np.zeros(N + 1, dtype=complex)
    for n, c in xi.poly.modes.items():
        clo, chi = c.span()
        _, cd = c.dense()
        cc = np.conj(cd)
        for k, lo, arr in mode_terms(A, n, c, Weight.one(), N + 1):
            a = max(lo, clo)
            b = min(lo + arr.size - 1, chi)
            if a <= b:
                vals[k] += np.dot(arr[a - lo:b - lo + 1], cc[a - clo:b - clo + 1])
    return CorrSeq(vals, base)


def _weight_phases(w: Weight, n: np.ndarray) -> np.ndarray:
    """``lambda^{-n}`` with exact argument reduction."""
    if w.angle == 0.0:
        return np.ones(n.size, dtype=complex)
    return np.exp(-1j * mul_angles(n, w.angle))


def atom_mass(c: CorrSeq, lam, theta: float = 0.0) -> tuple[float, list[tuple[int, complex]]]:
    """Wiener average ``(1/N) sum_{n<N} lambda^{-n} mu(n)``; returns |final| and dyadic trace."""
    N = len(c)
    if N < 64:
        raise ValueError("atom_mass needs at least 64 correlation values")
    w = as_weight(lam, theta)
    n = np.arange(N, dtype=np.int64)
    s = np.cumsum(_weight_phases(w, n) * c.values)
    trace = []
    M = 64
    while M <= N:
        trace.append((M, complex(s[M - 1] / M)))
        M *= 2
    if trace[-1][0] != N:
        trace.append((N, complex(s[N - 1] / N)))
    return abs(trace[-1][1]), trace


def is_atom(mass_trace: list[tuple[int, complex]], threshold: float = 0.01, rel: float = 0.2) -> bool:
    """Atom when the final Wiener average exceeds ``threshold`` and the last three checkpoints agree within ``rel``."""
    mags = [abs(v) for _, v in mass_trace[-3:]]
    if mags[-1] <= threshold or len(mags) < 3:
        return False
    return (max(mags) - min(mags)) <= rel * mags[-1]


def fejer_density(c: CorrSeq, grid: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """Fejer-smoothed spectral density on angles ``2 pi j / grid``.

    ``rho(w) = (1/2pi) sum_{|n|<N} (1 - |n|/N) mu(n) e^{-i n w}``.  Angle ``w``
    stands for the eigenvalue ``e^{i w}``.  The grid is raised to a power of
    two of at least ``2N`` so the grid sum integrates the density exactly.
    """
    N = len(c)
    while grid < 2 * N:
        grid *= 2
    n = np.arange(N)
    wts = (1.0 - n / N) * c.values
    buf = np.zeros(grid, dtype=complex)
    np.add.at(buf, n % grid, wts)
    np.add.at(buf, (-n[1:]) % grid, np.conj(wts[1:]))
    dens = np.fft.fft(buf).real / (2 * math.pi)
    return 2 * math.pi * np.arange(grid) / grid, dens


def density_mass(dens: np.ndarray) -> float:
    """Trapezoid integral over a full period of a uniform periodic grid."""
    return float(np.sum(dens) * 2 * math.pi / dens.size)


def toeplitz_min_eig(c: CorrSeq, K: int | None = None) -> float:
    """Smallest eigenvalue of ``[mu(i-j)]_{i,j<=K}`` (default ``K = N/2``)."""
    if K is None:
        K = (len(c) - 1) // 2
    col = c.values[:K + 1]
    T = toeplitz(col, np.conj(col))
    return float(eigvalsh(T, subset_by_index=[0, 0])[0])


def eigen_residual(A: AnzaiMap, xi: GNSVector, lam) -> float:
    """``||V xi - lambda xi|| / ||xi||``."""
    nrm = xi.norm()
    if nrm == 0:
        raise ValueError("eigen_residual of the zero vector")
    w = as_weight(lam, A.theta)
    return koopman(A, xi, 1).poly.l2_diff(xi.poly * w.value) / nrm


def density_csv(angles: np.ndarray, dens: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["angle", "density"])
    for a, d in zip(angles, dens):
        w.writerow(["%.17g" % a, "%.17g" % d])
    return buf.getvalue()
