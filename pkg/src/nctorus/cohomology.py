"""Cohomological equations ``(g o R_theta) f_n = g`` on Fourier coefficients.

The operator ``T g = (g o R_theta) f_n`` is unitary on ``L^2``; a nonzero
solution is an eigenvector for eigenvalue 1.  On the truncation ``[-K, K]`` we
measure the smallest singular value of ``T - I`` ("gap") and inspect the
corresponding singular vector.  This gives evidence, not proof.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .angles import mul_angle, mul_angles
from .anzai import AnzaiMap, alpha_cocycle
from .circle import TrigPoly, WindingMap, fourier_series, rotate
from .errors import TruncationError

KERNEL_THRESHOLD = 1e-6
GAP_THRESHOLD = 1e-2
# above this size the smallest singular value comes from sparse inverse iteration
DENSE_LIMIT = 601

ERGODIC = "ErgodicEvidence"
CONTINUOUS = "ContinuousObstruction"
ROUGH = "RoughObstruction"
INCONCLUSIVE = "Inconclusive"


@dataclass
class TransferMatrix:
    K: int
    theta: float
    fn: TrigPoly
    matrix: sp.csr_matrix
    bandwidth: int

    @property
    def size(self) -> int:
        return 2 * self.K + 1

    def freqs(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1, dtype=np.int64)

    def fixed_matrix(self) -> sp.csr_matrix:
        """``T - I``."""
        return (self.matrix - sp.identity(self.size, dtype=complex, format="csr")).tocsr()

    def apply(self, g: TrigPoly) -> TrigPoly:
        """``T`` applied to the part of ``g`` inside the window."""
        K = self.K
        v = np.zeros(self.size, dtype=complex)
        inside = np.abs(g.freqs) <= K
        v[g.freqs[inside] + K] = g.vals[inside]
        return TrigPoly.from_dense(-K, self.matrix @ v)


def build_matrix(theta: float, fn: TrigPoly, K: int) -> TransferMatrix:
    """Entry ``(k', k) = e^{i k theta} fhat_n(k' - k)`` for ``|k|, |k'| <= K``."""
    radius = fn.degree
    if 4 * radius > K:
        raise TruncationError(f"symbol radius {radius} needs K >= {4 * radius}, got {K}")
    cols = np.arange(-K, K + 1, dtype=np.int64)
    ph = np.exp(1j * mul_angles(cols, theta))
    rows_l, cols_l, vals_l = [], [], []
    for d, c in zip(fn.freqs, fn.vals):
        r = cols + d
        ok = np.abs(r) <= K
        rows_l.append(r[ok] + K)
        cols_l.append(cols[ok] + K)
        vals_l.append(c * ph[ok])
    n = 2 * K + 1
    if rows_l:
        M = sp.coo_matrix((np.concatenate(vals_l), (np.concatenate(rows_l), np.concatenate(cols_l))),
                          shape=(n, n)).tocsr()
    else:
        M = sp.csr_matrix((n, n), dtype=complex)
    return TransferMatrix(K, float(theta), fn, M, radius)


def _smallest_sv_dense(B: np.ndarray) -> tuple[float, np.ndarray]:
    _, s, vh = np.linalg.svd(B)
    return float(s[-1]), np.conj(vh[-1])


def _smallest_sv_sparse(B: sp.csr_matrix, tol: float = 1e-13) -> tuple[float, np.ndarray]:
    """Lanczos on ``(B^* B)^{-1}`` applied through one LU factorisation of ``B``.

    Plain inverse iteration stalls when the small singular values cluster,
    which is the typical case here (1 in the continuous spectrum).
    """
    n = B.shape[0]
    try:
        lu = splu(B.tocsc())
    except RuntimeError:
        # exactly singular
        return 0.0, np.ones(n, dtype=complex) / math.sqrt(n)
    op = LinearOperator((n, n), matvec=lambda x: lu.solve(lu.solve(np.asarray(x, dtype=complex), trans="H")),
                        dtype=complex)
    rng = np.random.default_rng(12345)
    v0 = rng.normal(size=n) + 1j * rng.normal(size=n)
    try:
        _, vecs = eigsh(op, k=1, which="LA", v0=v0, tol=tol)
    except ArpackNoConvergence as exc:
        if exc.eigenvectors is None or exc.eigenvectors.shape[1] == 0:
            raise
        vecs = exc.eigenvectors
    x = vecs[:, 0]
    if not np.all(np.isfinite(x)):
        return 0.0, np.ones(n, dtype=complex) / math.sqrt(n)
    x = x / np.linalg.norm(x)
    return float(np.linalg.norm(B @ x)), x


def kernel_gap(T: TransferMatrix, kernel_threshold: float = KERNEL_THRESHOLD
               ) -> tuple[float, TrigPoly | None]:
    """Smallest singular value of ``T - I`` and, when below threshold, its singular vector."""
    B = T.fixed_matrix()
    if T.bandwidth == 0 and np.all(T.fn.freqs == 0):
        # diagonal: singular values are the moduli of the diagonal
        d = np.abs(B.diagonal())
        j = int(np.argmin(d))
        gap, v = float(d[j]), np.zeros(T.size, dtype=complex)
        v[j] = 1.0
    elif T.size <= DENSE_LIMIT:
        gap, v = _smallest_sv_dense(B.toarray())
    else:
        gap, v = _smallest_sv_sparse(B)
    if gap < kernel_threshold:
        # fix the global phase so the largest coefficient is real positive
        j = int(np.argmax(np.abs(v)))
        v = v * (abs(v[j]) / v[j])
        return gap, TrigPoly.from_dense(-T.K, v)
    return gap, None


@dataclass(frozen=True)
class CharacterVerdict:
    kind: str
    k: int | None = None

    def __str__(self) -> str:
        return self.kind if self.k is None else f"{self.kind}({self.k})"


NoSolution = CharacterVerdict("NoSolution")


def SolutionAtFrequency(k: int) -> CharacterVerdict:
    return CharacterVerdict("SolutionAtFrequency", int(k))


def character_decision(z0: complex, w: int, theta: float, alpha: float, n: int,
                       K_diag: int = 4096, tol: float = 1e-12) -> CharacterVerdict:
    """Exact decision for ``f(z) = z0 z^w``.

    For ``w != 0`` the equation shifts frequencies by ``w n`` with unimodular
    factors, so ``|ghat|`` is constant along progressions and no l2 solution
    exists.  For ``w = 0`` it is diagonal: ``z0^n e^{i k theta} ghat(k) = ghat(k)``.
    """
    if n == 0:
        raise ValueError("n must be nonzero")
    if w != 0:
        return NoSolution
    nu = math.atan2(complex(z0).imag, complex(z0).real)
    base = mul_angle(n, nu) if nu else 0.0
    ks = np.arange(-K_diag, K_diag + 1, dtype=np.int64)
    ang = mul_angles(ks, theta) + base
    resid = np.abs(np.exp(1j * ang) - 1.0)
    j = int(np.argmin(np.where(resid <= tol, np.abs(ks), np.iinfo(np.int64).max)))
    if resid[j] <= tol:
        return SolutionAtFrequency(int(ks[j]))
    return NoSolution


def modulus_flatness(g: TrigPoly, G: int = 1024) -> float:
    """``std(|g|) / mean(|g|)`` on a grid."""
    a = np.abs(g.on_grid(G))
    m = float(np.mean(a))
    return float(np.std(a) / m) if m > 0 else math.inf


def tail_fraction(g: TrigPoly, K: int) -> float:
    """l2 mass of ``g`` beyond ``|k| > K/2`` relative to its total."""
    total = g.norm2()
    if total == 0:
        return 0.0
    out = np.abs(g.freqs) > K / 2
    return float(np.sqrt(np.sum(np.abs(g.vals[out]) ** 2)) / total)


@dataclass
class ModeReport:
    n: int
    Ks: list[int] = field(default_factory=list)
    gaps: list[float] = field(default_factory=list)
    gap: float = math.nan
    near_kernel: TrigPoly | None = None
    modulus_flatness: float | None = None
    tail: float | None = None
    classification: str = INCONCLUSIVE

    def scaled_gaps(self) -> list[float]:
        """``gap * (2K + 1)``: bounded below when 1 sits in continuous spectrum only."""
        return [g * (2 * K + 1) for K, g in zip(self.Ks, self.gaps)]


@dataclass
class ErgodicityReport:
    per_n: dict[int, ModeReport]
    verdict: str
    heuristic: bool = True

    def min_gap(self) -> float:
        return min(r.gap for r in self.per_n.values())

    def to_json_obj(self) -> dict:
        return {
            "verdict": self.verdict,
            "heuristic": self.heuristic,
            "per_n": {str(n): {"K": r.Ks, "gap": r.gaps, "final_gap": r.gap,
                               "scaled_gap": r.scaled_gaps(),
                               "classification": r.classification,
                               "modulus_flatness": r.modulus_flatness,
                               "tail": r.tail,
                               "near_kernel": None if r.near_kernel is None else
                               [[int(k), v.real, v.imag] for k, v in
                                zip(r.near_kernel.freqs, r.near_kernel.vals)]}
                      for n, r in sorted(self.per_n.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def cocycle_symbol(theta: float, alpha: float, f: WindingMap, n: int, tail_tol: float = 1e-8) -> TrigPoly:
    """Fourier series of ``f_n`` (dropping coefficients at rounding level)."""
    A = AnzaiMap(theta, alpha, f, tail_tol=tail_tol)
    F, _ = fourier_series(alpha_cocycle(A, n), tail_tol=tail_tol)
    return F


def analyse_mode(theta: float, fn: TrigPoly, n: int, K_schedule: Sequence[int],
                 gap_threshold: float = GAP_THRESHOLD, kernel_threshold: float = KERNEL_THRESHOLD,
                 scaled_threshold: float = 1.0, stabilise: float = 0.1) -> ModeReport:
    rep = ModeReport(n)
    for K in K_schedule:
        T = build_matrix(theta, fn, K)
        gap, g = kernel_gap(T, kernel_threshold)
        rep.Ks.append(int(K))
        rep.gaps.append(gap)
        rep.gap, rep.near_kernel = gap, g
        if len(rep.gaps) >= 2:
            a, b = rep.gaps[-2], rep.gaps[-1]
            if abs(b - a) <= stabilise * max(abs(a), abs(b)):
                break
    if rep.near_kernel is not None:
        rep.modulus_flatness = modulus_flatness(rep.near_kernel)
        rep.tail = tail_fraction(rep.near_kernel, rep.Ks[-1])
        if rep.tail < 1e-6:
            rep.classification = CONTINUOUS
        elif rep.modulus_flatness < 0.05:
            rep.classification = ROUGH
        else:
            rep.classification = INCONCLUSIVE
    elif rep.gap >= gap_threshold or all(s >= scaled_threshold for s in rep.scaled_gaps()):
        rep.classification = ERGODIC
    return rep


def verdict(theta: float, alpha: float, f: WindingMap, n_range: Iterable[int],
            K_schedule: Sequence[int] = (64, 128, 256), gap_threshold: float = GAP_THRESHOLD,
            kernel_threshold: float = KERNEL_THRESHOLD, scaled_threshold: float = 1.0,
            threads: int = 1) -> ErgodicityReport:
    """Evidence for or against solutions of the cohomological equations, mode by mode.

    A mode counts as evidence of no solution when its gap clears
    ``gap_threshold`` or when ``gap * (2K + 1)`` stays above ``scaled_threshold``
    along the schedule; the latter is the signature of 1 lying in the
    continuous spectrum of a unitary, where gaps shrink like ``1/K``.
    """
    ns = [int(n) for n in n_range]
    if 0 in ns:
        raise ValueError("n_range must exclude 0")

    def job(n):
        fn = cocycle_symbol(theta, alpha, f, n)
        return analyse_mode(theta, fn, n, K_schedule, gap_threshold, kernel_threshold, scaled_threshold)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reports = list(ex.map(job, ns))
    else:
        reports = [job(n) for n in ns]
    per_n = {r.n: r for r in reports}
    kinds = [r.classification for r in reports]
    if CONTINUOUS in kinds:
        v = CONTINUOUS
    elif ROUGH in kinds:
        v = ROUGH
    elif all(k == ERGODIC for k in kinds):
        v = ERGODIC
    else:
        v = INCONCLUSIVE
    return ErgodicityReport(per_n, v)


def planted_symbol(rng: np.random.Generator, theta: float, degree: int = 8, scale: float = 0.5
                   ) -> tuple[WindingMap, WindingMap]:
    """A symbol with a known continuous solution.

    Draw ``g0 = exp(i p)`` with ``p`` a random real trig polynomial and set
    ``f = g0 / (g0 o R_theta)``; then ``(g0 o R_theta) f = g0``.  Returns
    ``(f, g0)`` in log form.
    """
    ks = np.arange(1, degree + 1)
    c = (rng.normal(size=degree) + 1j * rng.normal(size=degree)) * scale / ks
    coeffs = {}
    for k, v in zip(ks, c):
        coeffs[int(k)] = v
        coeffs[-int(k)] = np.conj(v)
    p = TrigPoly(coeffs)
    g0 = WindingMap(0, p)
    f = WindingMap(0, p - rotate(p, theta))
    return f, g0


def cosine_similarity(a: TrigPoly, b: TrigPoly) -> float:
    """``|<a, b>| / (|a| |b|)`` on coefficients."""
    common, ia, ib = np.intersect1d(a.freqs, b.freqs, assume_unique=True, return_indices=True)
    ip = complex(np.sum(a.vals[ia] * np.conj(b.vals[ib])))
    return abs(ip) / (a.norm2() * b.norm2())


def diagonal_conjugation_gap(T: TransferMatrix, rng: np.random.Generator) -> float:
    """Gap of ``D (T - I) D^*`` for a random diagonal unitary ``D``."""
    d = np.exp(1j * rng.uniform(0, 2 * math.pi, T.size))
    D = sp.diags(d)
    B = (D @ T.fixed_matrix() @ D.conj()).tocsr()
    if T.size <= DENSE_LIMIT:
        return _smallest_sv_dense(B.toarray())[0]
    return _smallest_sv_sparse(B)[0]
