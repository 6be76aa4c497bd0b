import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nctorus.algebra import (_mul_terms, GaugePair, NCPoly, adjoint, coeff_fn, from_coeff_fns, gauge, mul, norm_bounds,
                             parse_ncpoly, random_ncpoly, trace, word_phase_oracle)
from nctorus.angles import turn_phase
from nctorus.errors import AlphaMismatch, ParseError

from conftest import ALPHAS, seeds

TOL = 1e-12


def clock_shift(x: NCPoly, p: int, q: int) -> np.ndarray:
    """Matrix image of ``x`` under ``U = diag(w^j)``, ``V = shift`` with ``w = e^{2 pi i p/q}``."""
    w = np.exp(2j * np.pi * p / q * np.arange(q))
    U = np.diag(w)
    V = np.roll(np.eye(q), 1, axis=0)
    out = np.zeros((q, q), dtype=complex)
    for (m, n), c in x.coeffs.items():
        out += c * np.linalg.matrix_power(U, m % q) @ np.linalg.matrix_power(V, n % q)
    return out


def test_commutation_exact():
    for a in ALPHAS:
        U, V = NCPoly.U(a), NCPoly.V(a)
        uv, vu = mul(U, V), mul(V, U)
        assert uv[(1, 1)] == 1.0
        # VU carries exactly one phase factor e^{-2 pi i alpha}
        assert vu[(1, 1)] == turn_phase(-1, a)
        assert abs(vu[(1, 1)] - cmath.exp(-2j * math.pi * a)) <= 1e-15


def test_uvuv_quarter():
    a = 0.25
    x = mul(NCPoly.monomial(a, 1, 1), NCPoly.monomial(a, 1, 1))
    m, n, ph = word_phase_oracle([("U", 1), ("V", 1), ("U", 1), ("V", 1)], a)
    assert (m, n) == (2, 2)
    assert abs(x[(2, 2)] - (-1j)) <= TOL
    assert abs(x[(2, 2)] - ph) <= TOL


@given(seeds, st.sampled_from([(1, 3), (2, 5), (3, 7)]))
def test_mul_matches_clock_shift(seed, pq):
    p, q = pq
    rng = np.random.default_rng(seed)
    a = p / q
    x, y = random_ncpoly(rng, a, 6, 3), random_ncpoly(rng, a, 6, 3)
    lhs = clock_shift(mul(x, y), p, q)
    rhs = clock_shift(x, p, q) @ clock_shift(y, p, q)
    assert np.max(np.abs(lhs - rhs)) <= 1e-11


def test_unit_and_alpha0(rng):
    x = random_ncpoly(rng, 1 / 3)
    assert mul(x, NCPoly.one(1 / 3)).max_diff(x) <= TOL
    x0, y0 = random_ncpoly(rng, 0.0), random_ncpoly(rng, 0.0)
    prod = mul(x0, y0)
    # commutative torus: ordinary product of 2-variable Laurent polynomials
    ref = {}
    for (m1, n1), c1 in x0.coeffs.items():
        for (m2, n2), c2 in y0.coeffs.items():
            ref[(m1 + m2, n1 + n2)] = ref.get((m1 + m2, n1 + n2), 0) + c1 * c2
    assert prod.max_diff(NCPoly(0.0, ref)) <= TOL


@given(seeds, st.sampled_from(ALPHAS))
def test_associativity(seed, a):
    rng = np.random.default_rng(seed)
    x, y, z = (random_ncpoly(rng, a, 20) for _ in range(3))
    assert mul(mul(x, y), z).max_diff(mul(x, mul(y, z))) <= TOL * 10


@given(seeds, st.sampled_from(ALPHAS))
def test_trace_property(seed, a):
    rng = np.random.default_rng(seed)
    x, y = random_ncpoly(rng, a, 20), random_ncpoly(rng, a, 20)
    assert abs(trace(mul(x, y)) - trace(mul(y, x))) <= TOL * 10


@given(seeds, st.sampled_from(ALPHAS))
def test_involution(seed, a):
    rng = np.random.default_rng(seed)
    x, y = random_ncpoly(rng, a, 20), random_ncpoly(rng, a, 20)
    assert adjoint(mul(x, y)).max_diff(mul(adjoint(y), adjoint(x))) <= TOL * 10
    assert adjoint(adjoint(x)).max_diff(x) <= TOL


@given(seeds, st.sampled_from(ALPHAS))
def test_trace_positive(seed, a):
    rng = np.random.default_rng(seed)
    x = random_ncpoly(rng, a, 20)
    t = trace(mul(adjoint(x), x))
    assert abs(t.imag) <= TOL * 10 and t.real >= 0
    assert abs(trace(mul(x, adjoint(x))) - x.gns_norm() ** 2) <= 1e-10


def test_adjoint_examples():
    a = 1 / 3
    uv = NCPoly.monomial(a, 1, 1)
    assert mul(adjoint(uv), uv).max_diff(NCPoly.one(a)) <= TOL
    assert adjoint(NCPoly.one(a)).max_diff(NCPoly.one(a)) == 0
    adj = adjoint(uv)
    # word-reversal oracle: (UV)^* = V^{-1} U^{-1}
    m, n, ph = word_phase_oracle([("V", -1), ("U", -1)], a)
    assert (m, n) == (-1, -1)
    assert abs(adj[(-1, -1)] - ph) <= TOL
    assert abs(ph - cmath.exp(-2j * math.pi / 3)) <= TOL


def test_trace_examples():
    assert trace(NCPoly.one(0.2)) == 1
    for m, n in [(1, 0), (0, 1), (2, -3)]:
        assert trace(NCPoly.monomial(0.2, m, n)) == 0


def test_coeff_fn(rng):
    x = NCPoly.monomial(0.3, 2, 3)
    assert coeff_fn(x, 3).coeffs == {2: 1.0}
    assert coeff_fn(x, 1).is_zero()
    y = random_ncpoly(rng, 0.3)
    back = from_coeff_fns(0.3, {n: coeff_fn(y, n) for n in range(-5, 6)})
    assert back.max_diff(y) == 0


def test_norm_bounds():
    lo, up = norm_bounds(NCPoly.monomial(0.3, 2, -1))
    assert abs(lo - 1) <= 1e-9 and abs(up - 1) <= 1e-9
    assert norm_bounds(NCPoly.zero(0.3)) == (0.0, 0.0)
    x = NCPoly(0.3, {(0, 0): 0.5, (1, 0): 0.5})
    lo, up = norm_bounds(x, 4096)
    assert abs(lo - 1) <= 1e-3 and up >= 1


def test_gauge_examples(rng):
    x = random_ncpoly(rng, 1 / 3)
    assert gauge(x, GaugePair(1, 1)).max_diff(x) == 0
    g = GaugePair.from_angles(0.4, -1.3)
    assert trace(gauge(x, g)) == trace(x)


@given(seeds)
def test_gauge_homomorphism(seed):
    rng = np.random.default_rng(seed)
    a = 1 / 3
    g = GaugePair.from_angles(*rng.uniform(-3, 3, 2))
    x, y = random_ncpoly(rng, a), random_ncpoly(rng, a)
    assert gauge(mul(x, y), g).max_diff(mul(gauge(x, g), gauge(y, g))) <= TOL * 10


def test_alpha_mismatch():
    with pytest.raises(AlphaMismatch):
        mul(NCPoly.U(0.1), NCPoly.V(0.2))


def test_json_roundtrip_and_order(rng):
    x = random_ncpoly(rng, 1 / 3)
    s = x.to_json()
    obj = json.loads(s)
    keys = [(t[0], t[1]) for t in obj["terms"]]
    assert keys == sorted(keys)
    assert NCPoly.from_json(s).max_diff(x) == 0
    assert x.to_json() == s


def test_parser():
    a = 0.25
    x = parse_ncpoly("2*1 + U^2V^-1 - (0.5+1j)*VU", a)
    vu = mul(NCPoly.V(a), NCPoly.U(a))
    ref = NCPoly(a, {(0, 0): 2, (2, -1): 1}) - vu * (0.5 + 1j)
    assert x.max_diff(ref) <= TOL
    with pytest.raises(ParseError) as e:
        parse_ncpoly("U + W", a)
    assert e.value.position == 4


@given(seeds, st.sampled_from(ALPHAS))
def test_termwise_product_matches_mode_product(seed, a):
    rng = np.random.default_rng(seed)
    x, y = random_ncpoly(rng, a, 90, 8), random_ncpoly(rng, a, 90, 8)
    # enough term pairs that mul takes the per-mode convolution route
    assert len(x.coeffs) * len(y.coeffs) > 4096
    assert mul(x, y).max_diff(_mul_terms(a, x.coeffs, y.coeffs, 1e-14)) <= 1e-12
