"""A measurable eigenvector that is not continuous, at desk scale.

We build an angle whose continued fraction has super-exponentially growing
partial quotients, a unimodular ``g = exp(i sum_k a_k cos(q_k t))`` on its
convergent denominators, and ``f = g / (g o R_theta)``.  Then
``(g o R_theta) f = g`` holds exactly at every truncation level, and the
twisted map ``f~ = e^{i nu} f`` has ``g(U) V xi_tau`` as an eigenvector with
eigenvalue ``e^{i nu}``.  Weighted averages at that eigenvalue are the ones
that fail to settle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import jv

from .algebra import NCPoly, mul
from .angles import TWO_PI, mul_angle
from .anzai import AnzaiMap, Weight, apply_iter, cesaro_mode_points
from .circle import TrigPoly, WindingMap, mul_poly_map, poly_mul, rotate
from .errors import ConsistencyError
from .gns import GNSVector, eigen_residual

DEFAULT_NU = TWO_PI * (math.sqrt(2.0) - 1.0)
SCORE_THRESHOLD = 2.0
_EXACT = 1 << 53
_I_POW = np.array([1, 1j, -1, -1j])


def _growth_rule(growth) -> Callable[[int, int], int]:
    """Map ``(k, q_k) -> a_{k+1}``."""
    if callable(growth):
        return growth
    if isinstance(growth, (list, tuple)):
        seq = list(growth)
        return lambda k, q: int(seq[k]) if k < len(seq) else 1
    if growth == "square":
        return lambda k, q: q * q + 1
    if growth == "linear":
        return lambda k, q: q + 1
    if growth == "golden":
        return lambda k, q: 1
    raise ValueError(f"unknown growth schedule {growth!r}")


@dataclass
class LiouvilleAngle:
    """``theta / 2 pi = [0; a_1, ..., a_{N+1}, 1, 1, 1, ...]`` and its convergents."""

    partial_quotients: list[int]
    convergents: list[tuple[int, int]]
    theta: float
    levels: int
    exact: str = ""
    # ||q_k theta|| for the double-precision theta actually used
    distances: list[float] = field(default_factory=list)
    # ||q_k theta|| for the exact angle
    exact_distances: list[float] = field(default_factory=list)

    @property
    def q(self) -> list[int]:
        return [q for _, q in self.convergents]

    def liouville_score(self) -> float:
        """``min_k log q_{k+1} / log q_k`` over levels with ``q_k >= 2``.

        About 3 for the squared schedule, close to 1 for bounded quotients.
        """
        qs = self.q
        ratios = [math.log(qs[k + 1]) / math.log(qs[k]) for k in range(len(qs) - 1) if qs[k] >= 2]
        return min(ratios) if ratios else 0.0

    def is_liouville(self, threshold: float = SCORE_THRESHOLD) -> bool:
        return self.liouville_score() >= threshold

    def to_json_obj(self) -> dict:
        return {"partial_quotients": [str(a) for a in self.partial_quotients],
                "convergents": [[str(p), str(q)] for p, q in self.convergents],
                "theta": self.theta, "theta_hex": self.theta.hex(), "exact_turns": self.exact,
                "levels": self.levels, "distances": self.distances,
                "exact_distances": self.exact_distances,
                "liouville_score": self.liouville_score()}


def liouville_theta(levels: int, growth="square", seed: int = 2, tail: str = "golden") -> LiouvilleAngle:
    """Continued fraction with ``a_1 = seed`` and ``a_{k+1} = growth(q_k)``.

    The quotients stop after ``a_{levels+1}``; the remainder is the golden
    tail ``[1; 1, 1, ...]``.  Convergents ``p_k/q_k`` are kept for
    ``k = 1..levels+1``.
    """
    if levels < 1:
        raise ValueError("levels must be at least 1")
    rule = _growth_rule(growth)
    a = [int(seed) if growth != "golden" else 1]
    p2, q2, p1, q1 = 1, 0, 0, 1     # p_{-1}, q_{-1}, p_0, q_0
    convs = []
    for k in range(levels + 1):
        p, q = a[k] * p1 + p2, a[k] * q1 + q2
        if k < levels and q > _EXACT:
            raise OverflowError(f"q_{k + 1} has {q.bit_length()} bits, more than 53")
        convs.append((p, q))
        p2, q2, p1, q1 = p1, q1, p, q
        if k < levels:
            a.append(int(rule(k, q)))
    with mpmath.workprec(_bits(convs)):
        turns = _exact_turns(a, tail == "golden")
        theta = float(2 * mpmath.pi * turns)
        exact = mpmath.nstr(turns, 60)
        exact_d = [float(2 * mpmath.pi * abs(q * turns - mpmath.nint(q * turns))) for _, q in convs]
    ang = LiouvilleAngle(a, convs, theta, levels, exact)
    ang.distances = [abs(mul_angle(q, theta)) for _, q in convs]
    ang.exact_distances = exact_d
    return ang


def _bits(convs) -> int:
    return 64 + 4 * max(q.bit_length() for _, q in convs)


def _exact_turns(a: Sequence[int], golden_tail: bool = True):
    x = (1 + mpmath.sqrt(5)) / 2 if golden_tail else mpmath.mpf(1)
    for ak in reversed(a):
        x = ak + 1 / x
    return 1 / x


def convergent_bound_ok(ang: LiouvilleAngle) -> list[bool]:
    """``|x - p_k/q_k| <= 1/(q_k q_{k+1})`` for the exact value ``x``."""
    out = []
    with mpmath.workprec(_bits(ang.convergents)):
        x = _exact_turns(ang.partial_quotients)
        for k in range(len(ang.convergents) - 1):
            p, q = ang.convergents[k]
            qn = ang.convergents[k + 1][1]
            out.append(bool(abs(x - mpmath.mpf(p) / q) <= mpmath.mpf(1) / (q * qn)))
    return out


@dataclass
class RoughSolution:
    """``g_N(e^{it}) = exp(i sum_k a_k cos(q_k t))``."""

    levels: int
    freqs: list[int]
    amps: list[float]

    @classmethod
    def build(cls, ang: LiouvilleAngle, levels: int | None = None, amps: Sequence[float] | None = None
              ) -> "RoughSolution":
        levels = ang.levels if levels is None else levels
        qs = ang.q[:levels]
        if amps is None:
            amps = [1.0 / (k + 1) for k in range(levels)]
        return cls(levels, [int(q) for q in qs], [float(a) for a in amps][:levels])

    def phase(self) -> TrigPoly:
        coeffs: dict[int, complex] = {}
        for q, a in zip(self.freqs, self.amps):
            if a:
                coeffs[q] = coeffs.get(q, 0) + a / 2
                coeffs[-q] = coeffs.get(-q, 0) + a / 2
        return TrigPoly(coeffs)

    def as_map(self) -> WindingMap:
        return WindingMap(0, self.phase(), check=False)

    def fourier(self, cut: float = 1e-20) -> TrigPoly:
        """Sparse Fourier series via Jacobi-Anger: ``e^{i a cos(q t)} = sum_j i^j J_j(a) z^{jq}``."""
        out = TrigPoly.constant(1.0)
        for q, a in zip(self.freqs, self.amps):
            if not a:
                continue
            J = max(4, int(abs(a)) + 4)
            while abs(jv(J, a)) > cut:
                J += 1
            js = np.arange(-J, J + 1)
            vals = _I_POW[js % 4] * jv(js, a)
            out = poly_mul(out, TrigPoly.from_arrays(js * q, vals, summed=False))
        return out.prune(cut)

    def to_json_obj(self) -> dict:
        return {"levels": self.levels, "freqs": [str(q) for q in self.freqs], "amps": self.amps}


def furstenberg_f(theta, g: RoughSolution, nu: float = DEFAULT_NU) -> tuple[WindingMap, float]:
    """``f~ = e^{i nu} g / (g o R_theta)`` and the next-level increment bound.

    The bound is ``a_{N+1} ||q_{N+1} theta||`` (exact angle) when the angle
    knows a further level, which controls ``sup |f~^{(N+1)} - f~^{(N)}|``.
    """
    th = theta.theta if isinstance(theta, LiouvilleAngle) else float(theta)
    p = g.phase()
    phase = p - rotate(p, th)
    if nu:
        phase = phase + TrigPoly.constant(nu)
    ft = WindingMap(0, phase, check=False)
    bound = 0.0
    if isinstance(theta, LiouvilleAngle) and len(theta.convergents) > g.levels:
        a_next = 1.0 / (g.levels + 1)
        bound = a_next * theta.exact_distances[g.levels]
    return ft, bound


def cohomology_defect(theta: float, g: RoughSolution, f_tilde: WindingMap, nu: float, G: int = 1024) -> float:
    """``max |(g o R_theta) (f~ / e^{i nu}) - g|`` on a grid."""
    gm = g.as_map()
    lhs = rotate(gm, theta).on_grid(G) * f_tilde.on_grid(G) * complex(math.cos(-nu), math.sin(-nu))
    return float(np.max(np.abs(lhs - gm.on_grid(G))))


def eigenvector(theta: float, g: RoughSolution, nu: float, alpha: float = 0.0,
                map_theta: float | None = None) -> tuple[GNSVector, float]:
    """``g(U) V xi_tau`` and its residual as an eigenvector of eigenvalue ``e^{i nu}``.

    ``map_theta`` lets a negative control run the map at a different angle
    from the one ``f~`` was built for.
    """
    ft, _ = furstenberg_f(theta, g, nu)
    A = AnzaiMap(theta if map_theta is None else map_theta, alpha, ft)
    ghat = g.fourier()
    vec = GNSVector.of(NCPoly.from_modes(alpha, {1: ghat}))
    return vec, eigen_residual(A, vec, Weight(nu))


def gk_functions(theta: float, f: WindingMap, h: TrigPoly, k_list: Sequence[int], g: RoughSolution,
                 alpha: float = 0.0, tol: float = 1e-9) -> list[TrigPoly]:
    """``G_k(z) = h(e^{ik theta} z) g(z) / g(e^{ik theta} z)``, computed two ways.

    One route iterates the automorphism on ``h(U) V`` and strips ``V``; the
    other uses the closed formula.  Disagreement raises ConsistencyError.
    """
    A = AnzaiMap(theta, alpha, f)
    hv = NCPoly.from_modes(alpha, {1: h})
    vinv = NCPoly.monomial(alpha, 0, -1)
    p = g.phase()
    out = []
    for k in k_list:
        via_map = mul(apply_iter(A, hv, k), vinv)
        a = via_map.modes.get(0, TrigPoly())
        ratio = WindingMap(0, p - rotate(p, theta, k), check=False)
        b = mul_poly_map(rotate(h, theta, k), ratio)
        if a.max_diff(b) > tol:
            raise ConsistencyError(f"G_{k}: routes differ by {a.max_diff(b):.3g}")
        out.append(b)
    return out


def pairing(h: TrigPoly, g: RoughSolution) -> complex:
    """``integral of h * conj(g)``."""
    gh = g.fourier()
    common, ih, ig = np.intersect1d(h.freqs, gh.freqs, assume_unique=True, return_indices=True)
    return complex(np.sum(h.vals[ih] * np.conj(gh.vals[ig])))


def dyadic_window(N_min: int, N_max: int) -> list[int]:
    out = []
    N = N_min
    while N <= N_max:
        out.append(N)
        N *= 2
    return out


def oscillation_stat(theta: float, f_tilde: WindingMap, h: TrigPoly, nu: float,
                     window: tuple[int, int] = (1 << 10, 1 << 16), points: int = 32,
                     g: RoughSolution | None = None, min_pairing: float = 0.1,
                     return_values: bool = False):
    """Spread of the weighted means ``M_{h(U)V, e^{i nu}}(N)`` over dyadic N in the window.

    The mode-1 coefficient function is sampled at ``points`` grid angles; the
    statistic is the largest pointwise distance between any two checkpoints.
    """
    if g is not None and abs(pairing(h, g)) < min_pairing:
        raise ValueError("h must pair with conj(g) to at least %.3g" % min_pairing)
    Ns = dyadic_window(*window)
    A = AnzaiMap(theta, 0.0, f_tilde)
    vals = cesaro_mode_points(A, h, 1, Weight(nu), Ns, P=points)
    osc = 0.0
    for i in range(len(Ns)):
        for j in range(i + 1, len(Ns)):
            osc = max(osc, float(np.max(np.abs(vals[i] - vals[j]))))
    if return_values:
        return osc, Ns, vals
    return osc


def gauge_control(z0: complex = 1.0) -> WindingMap:
    """The uniquely ergodic control ``f(z) = z0 z``, run at the construction angle."""
    return WindingMap.character(z0, 1)


def manifest(ang: LiouvilleAngle, g: RoughSolution, nu: float, tail_bound: float) -> dict:
    return {"angle": ang.to_json_obj(), "rough_solution": g.to_json_obj(),
            "nu": nu, "nu_closed_form": "2*pi*(sqrt(2)-1)" if nu == DEFAULT_NU else None,
            "tail_bound": tail_bound}


def manifest_json(ang: LiouvilleAngle, g: RoughSolution, nu: float, tail_bound: float) -> str:
    return json.dumps(manifest(ang, g, nu, tail_bound), sort_keys=True)
