"""Finite elements of the noncommutative torus ``A_alpha``.

An :class:`NCPoly` is a finite sum ``sum c_{m,n} U^m V^n`` with ``UV = e^{2 pi i alpha} VU``.
It is stored mode by mode: ``x = sum_n c_n(U) V^n`` with each ``c_n`` a
:class:`TrigPoly`, which is the shape every dynamical operation wants.
"""

from __future__ import annotations

import cmath
import json
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .angles import mul_angle, turn_phase
from .circle import TrigPoly, poly_mul, rotate, rotate_turns, sup_norm
from .errors import AlphaMismatch, ParseError

DROP_TOL = 1e-14
# below this many term pairs, multiply monomial by monomial
_TERMWISE = 4096


def _same_alpha(a: float, b: float) -> bool:
    return float(a).hex() == float(b).hex()


class NCPoly:
    """Twisted Fourier polynomial over ``A_alpha``.  Immutable."""

    __slots__ = ("alpha", "modes", "drop")

    def __init__(self, alpha: float, coeffs: Mapping[tuple[int, int], complex] | None = None,
                 drop: float = DROP_TOL):
        self.alpha = float(alpha)
        self.drop = drop
        by_n: dict[int, dict[int, complex]] = {}
        for (m, n), c in (coeffs or {}).items():
            d = by_n.setdefault(int(n), {})
            d[int(m)] = d.get(int(m), 0j) + complex(c)
        self.modes = self._clean({n: TrigPoly(d) for n, d in by_n.items()}, drop)

    @staticmethod
    def _clean(modes: Mapping[int, TrigPoly], drop: float) -> dict[int, TrigPoly]:
        out = {}
        for n in sorted(modes):
            p = modes[n].prune(drop)
            if not p.is_zero():
                out[n] = p
        return out

    @classmethod
    def from_modes(cls, alpha: float, modes: Mapping[int, TrigPoly], drop: float = DROP_TOL) -> "NCPoly":
        x = cls.__new__(cls)
        x.alpha = float(alpha)
        x.drop = drop
        x.modes = cls._clean(modes, drop)
        return x

    @classmethod
    def one(cls, alpha: float) -> "NCPoly":
        return cls(alpha, {(0, 0): 1.0})

    @classmethod
    def zero(cls, alpha: float) -> "NCPoly":
        return cls(alpha)

    @classmethod
    def monomial(cls, alpha: float, m: int, n: int, c: complex = 1.0) -> "NCPoly":
        return cls(alpha, {(m, n): c})

    @classmethod
    def U(cls, alpha: float) -> "NCPoly":
        return cls.monomial(alpha, 1, 0)

    @classmethod
    def V(cls, alpha: float) -> "NCPoly":
        return cls.monomial(alpha, 0, 1)

    # -- views ---------------------------------------------------------------
    @property
    def coeffs(self) -> dict[tuple[int, int], complex]:
        out = {}
        for n, p in self.modes.items():
            for m, c in zip(p.freqs, p.vals):
                out[(int(m), n)] = complex(c)
        return out

    def __getitem__(self, key: tuple[int, int]) -> complex:
        m, n = key
        p = self.modes.get(n)
        return p[m] if p is not None else 0j

    def __len__(self) -> int:
        return sum(len(p) for p in self.modes.values())

    def is_zero(self) -> bool:
        return not self.modes

    def check_alpha(self, other: "NCPoly") -> None:
        if not _same_alpha(self.alpha, other.alpha):
            raise AlphaMismatch(f"alpha {self.alpha!r} vs {other.alpha!r}")

    def gns_norm(self) -> float:
        """``||x xi_tau|| = sqrt(tau(x* x))`` = l2 norm of the coefficients."""
        return math.sqrt(sum(float(np.sum(np.abs(p.vals) ** 2)) for p in self.modes.values()))

    def max_diff(self, other: "NCPoly") -> float:
        self.check_alpha(other)
        worst = 0.0
        for n in set(self.modes) | set(other.modes):
            a = self.modes.get(n, TrigPoly())
            b = other.modes.get(n, TrigPoly())
            worst = max(worst, a.max_diff(b))
        return worst

    def l2_diff(self, other: "NCPoly") -> float:
        """``||x - y||_2`` on coefficients, without pruning small differences."""
        self.check_alpha(other)
        total = 0.0
        for n in set(self.modes) | set(other.modes):
            a = self.modes.get(n, TrigPoly())
            b = other.modes.get(n, TrigPoly())
            d = TrigPoly.from_arrays(np.concatenate([a.freqs, b.freqs]),
                                     np.concatenate([a.vals, -b.vals]))
            total += float(np.sum(np.abs(d.vals) ** 2))
        return math.sqrt(total)

    # -- linear structure ----------------------------------------------------
    def __add__(self, other: "NCPoly") -> "NCPoly":
        if not isinstance(other, NCPoly):
            other = NCPoly.one(self.alpha) * complex(other)
        self.check_alpha(other)
        modes = dict(self.modes)
        for n, p in other.modes.items():
            modes[n] = modes[n] + p if n in modes else p
        return NCPoly.from_modes(self.alpha, modes, self.drop)

    __radd__ = __add__

    def __neg__(self) -> "NCPoly":
        return NCPoly.from_modes(self.alpha, {n: -p for n, p in self.modes.items()}, self.drop)

    def __sub__(self, other: "NCPoly") -> "NCPoly":
        if not isinstance(other, NCPoly):
            other = NCPoly.one(self.alpha) * complex(other)
        return self + (-other)

    def __mul__(self, other) -> "NCPoly":
        if isinstance(other, NCPoly):
            return mul(self, other)
        c = complex(other)
        return NCPoly.from_modes(self.alpha, {n: p * c for n, p in self.modes.items()}, self.drop)

    def __rmul__(self, c) -> "NCPoly":
        return self * c

    def __truediv__(self, c) -> "NCPoly":
        return self * (1.0 / complex(c))

    def __eq__(self, other) -> bool:
        if not isinstance(other, NCPoly):
            return NotImplemented
        return (_same_alpha(self.alpha, other.alpha) and self.modes.keys() == other.modes.keys()
                and all(self.modes[n] == other.modes[n] for n in self.modes))

    def __hash__(self):
        return hash((self.alpha, tuple((n, hash(p)) for n, p in self.modes.items())))

    def __repr__(self) -> str:
        if len(self) > 8:
            return f"NCPoly(alpha={self.alpha!r}, <{len(self)} terms>)"
        return f"NCPoly(alpha={self.alpha!r}, {self.coeffs})"

    # -- serialization -------------------------------------------------------
    def to_json_obj(self) -> dict:
        terms = sorted(self.coeffs.items())
        return {"alpha": self.alpha,
                "terms": [[m, n, c.real, c.imag] for (m, n), c in terms]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "NCPoly":
        return cls(obj["alpha"], {(int(m), int(n)): complex(re_, im) for m, n, re_, im in obj["terms"]})

    @classmethod
    def from_json(cls, text: str) -> "NCPoly":
        return cls.from_json_obj(json.loads(text))


@dataclass(frozen=True)
class GaugePair:
    """Gauge automorphism ``U -> zu U``, ``V -> zv V``."""

    zu: complex = 1.0
    zv: complex = 1.0

    def __post_init__(self):
        for z in (self.zu, self.zv):
            if abs(abs(complex(z)) - 1.0) > 1e-12:
                raise ValueError("gauge parameters must be unimodular")

    @classmethod
    def from_angles(cls, a: float, b: float) -> "GaugePair":
        return cls(cmath.exp(1j * a), cmath.exp(1j * b))


# -- operations ----------------------------------------------------------------

def mul(x: NCPoly, y: NCPoly) -> NCPoly:
    """Twisted product.

    ``(c_b(U) V^b)(d(U) V^d) = c_b(U) d(e^{-2 pi i alpha b} U) V^{b+d}`` since
    ``V^b U^c = e^{-2 pi i alpha b c} U^c V^b``.
    """
    x.check_alpha(y)
    cx, cy = x.coeffs, y.coeffs
    if len(cx) * len(cy) <= _TERMWISE:
        return _mul_terms(x.alpha, cx, cy, min(x.drop, y.drop))
    out: dict[int, TrigPoly] = {}
    for b, p in x.modes.items():
        for d, q in y.modes.items():
            term = poly_mul(p, rotate_turns(q, x.alpha, -b))
            n = b + d
            out[n] = out[n] + term if n in out else term
    return NCPoly.from_modes(x.alpha, out, min(x.drop, y.drop))


def _mul_terms(alpha: float, cx: dict, cy: dict, drop: float) -> NCPoly:
    """Monomial-by-monomial product for small operands; phases reduced exactly and cached."""
    phases: dict[int, complex] = {0: 1.0}
    acc: dict[tuple[int, int], complex] = {}
    for (m1, n1), c1 in cx.items():
        for (m2, n2), c2 in cy.items():
            k = -n1 * m2
            ph = phases.get(k)
            if ph is None:
                ph = phases[k] = turn_phase(k, alpha)
            key = (m1 + m2, n1 + n2)
            acc[key] = acc.get(key, 0) + c1 * c2 * ph
    return NCPoly(alpha, acc, drop)


def adjoint(x: NCPoly) -> NCPoly:
    """``(c U^m V^n)^* = conj(c) e^{-2 pi i alpha m n} U^{-m} V^{-n}``."""
    # after conj() the frequency is m' = -m, so the phase is e^{2 pi i alpha m' n}
    modes = {-n: rotate_turns(p.conj(), x.alpha, n) for n, p in x.modes.items()}
    return NCPoly.from_modes(x.alpha, modes, x.drop)


def trace(x: NCPoly) -> complex:
    return x[(0, 0)]


def coeff_fn(x: NCPoly, n: int) -> TrigPoly:
    """The coefficient function ``c_n`` in ``x = sum_n c_n(U) V^n``."""
    return x.modes.get(int(n), TrigPoly())


def from_coeff_fns(alpha: float, fns: Mapping[int, TrigPoly]) -> NCPoly:
    return NCPoly.from_modes(alpha, fns)


def norm_bounds(x: NCPoly, G: int = 4096) -> tuple[float, float]:
    """Bounds on the C*-norm: the largest coefficient sup-norm below, their sum above."""
    if x.is_zero():
        return 0.0, 0.0
    lo, hi = 0.0, 0.0
    for p in x.modes.values():
        l, u = sup_norm(p, G)
        lo = max(lo, l)
        hi += u
    return lo, hi


def gauge(x: NCPoly, g: GaugePair) -> NCPoly:
    """``c_{m,n} -> zu^m zv^n c_{m,n}``."""
    a = cmath.phase(complex(g.zu))
    b = cmath.phase(complex(g.zv))
    modes = {}
    for n, p in x.modes.items():
        q = rotate(p, a)
        if n and b:
            q = q * cmath.exp(1j * mul_angle(n, b))
        modes[n] = q
    return NCPoly.from_modes(x.alpha, modes, x.drop)


def random_ncpoly(rng: np.random.Generator, alpha: float, terms: int = 10, radius: int = 4) -> NCPoly:
    """Random element with up to ``terms`` monomials in ``[-radius, radius]^2``."""
    ms = rng.integers(-radius, radius + 1, size=terms)
    ns = rng.integers(-radius, radius + 1, size=terms)
    cs = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    return NCPoly(alpha, {(int(m), int(n)): c for m, n, c in zip(ms, ns, cs)})


# -- textual form --------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, alpha: float):
        self.text = text
        self.alpha = alpha
        self.pos = 0

    def error(self, msg: str):
        raise ParseError(msg, self.text, self.pos)

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def integer(self) -> int:
        self.peek()
        m = re.compile(r"[-+]?\d+").match(self.text, self.pos)
        if not m:
            self.error("expected integer exponent")
        self.pos = m.end()
        return int(m.group())

    def number(self) -> complex:
        if self.eat("("):
            start = self.pos
            depth = 1
            while self.pos < len(self.text) and depth:
                depth += {"(": 1, ")": -1}.get(self.text[self.pos], 0)
                self.pos += 1
            if depth:
                self.error("unbalanced parenthesis")
            body = self.text[start:self.pos - 1].replace(" ", "")
            try:
                return complex(body)
            except ValueError:
                self.pos = start
                self.error("bad complex number")
        self.peek()
        m = re.compile(r"(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?j?").match(self.text, self.pos)
        if not m:
            self.error("expected number")
        self.pos = m.end()
        return complex(m.group())

    def word(self) -> NCPoly:
        x = NCPoly.one(self.alpha)
        seen = False
        while self.peek() in ("U", "V"):
            g = self.text[self.pos]
            self.pos += 1
            e = self.integer() if self.eat("^") else 1
            x = mul(x, NCPoly.monomial(self.alpha, e if g == "U" else 0, e if g == "V" else 0))
            seen = True
        if not seen:
            self.error("expected monomial")
        return x

    def term(self) -> NCPoly:
        if self.peek() in ("U", "V"):
            return self.word()
        c = self.number()
        if self.eat("*"):
            if self.peek() in ("U", "V"):
                return self.word() * c
            c2 = self.number()
            if c2 != 1:
                self.error("expected monomial after '*'")
            return NCPoly.one(self.alpha) * c
        if self.peek() in ("U", "V"):
            return self.word() * c
        return NCPoly.one(self.alpha) * c

    def parse(self) -> NCPoly:
        total = NCPoly.zero(self.alpha)
        sign = -1.0 if self.eat("-") else 1.0
        if sign > 0:
            self.eat("+")
        while True:
            total = total + self.term() * sign
            if self.eat("+"):
                sign = 1.0
            elif self.eat("-"):
                sign = -1.0
            elif self.peek() == "":
                return total
            else:
                self.error("unexpected character")


def parse_ncpoly(text: str, alpha: float) -> NCPoly:
    """Parse strings such as ``"2*1+U^2V^-1"`` or ``"(0.5+1j)*UV - V^-1U"``.

    Letters multiply left to right with the twisted product, so ``"VU"`` is
    ``e^{-2 pi i alpha} UV``.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", text or "", 0)
    return _Parser(text, alpha).parse()


def word_phase_oracle(word: Iterable[tuple[str, int]], alpha: float) -> tuple[int, int, complex]:
    """Normal-order a word in ``U^{+-1}, V^{+-1}`` by adjacent swaps.

    Each swap ``V^b U^a -> e^{-2 pi i alpha a b} U^a V^b`` is applied one letter
    pair at a time (bubble sort), giving an independent route to the product
    phase.
    """
    letters = []
    for g, e in word:
        step = 1 if e > 0 else -1
        letters.extend([(g, step)] * abs(e))
    turns = 0.0
    changed = True
    while changed:
        changed = False
        for i in range(len(letters) - 1):
            (g1, e1), (g2, e2) = letters[i], letters[i + 1]
            if g1 == "V" and g2 == "U":
                turns -= e1 * e2
                letters[i], letters[i + 1] = letters[i + 1], letters[i]
                changed = True
    m = sum(e for g, e in letters if g == "U")
    n = sum(e for g, e in letters if g == "V")
    return m, n, cmath.exp(2j * math.pi * alpha * turns)
