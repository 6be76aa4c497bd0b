import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nctorus.algebra import GaugePair, NCPoly, adjoint, gauge, mul, random_ncpoly, trace
from nctorus.anzai import (AnzaiMap, CesaroResult, Weight, alpha_cocycle, apply, apply_iter, cesaro,
                           cesaro_mode_points, cesaro_naive, inverse, naive_theta_cocycle, right_twist,
                           theta_cocycle)
from nctorus.circle import TrigPoly, WindingMap, fourier_series, grid_points
from nctorus.errors import AlphaMismatch

from conftest import ALPHAS, GOLDEN, random_map, seeds

T32 = grid_points(32)


def _maxdiff(f, g, t=T32):
    return float(np.max(np.abs(f.at(t) - g.at(t))))


def test_alpha_cocycle_character():
    A = AnzaiMap(GOLDEN, 1 / 3, WindingMap.identity())
    f2 = alpha_cocycle(A, 2)
    assert f2.winding == 2
    ref = cmath.exp(-2j * math.pi / 3) * np.exp(2j * T32)
    assert np.max(np.abs(f2.at(T32) - ref)) <= 1e-14
    assert alpha_cocycle(A, 0).is_constant() and alpha_cocycle(A, 0).const_angle() == 0.0


@given(seeds, st.sampled_from(ALPHAS), st.integers(-3, 3))
def test_alpha_cocycle_pointwise_oracle(seed, a, n):
    rng = np.random.default_rng(seed)
    f = random_map(rng)
    A = AnzaiMap(GOLDEN, a, f)
    # V f(U) V^{-1} = f(e^{-2 pi i alpha} U), so f_n is a product of rotated copies
    ref = np.ones(T32.size, dtype=complex)
    if n > 0:
        for l in range(n):
            ref *= f.at(T32 - 2 * math.pi * a * l)
    for l in range(1, -n + 1):
        ref *= np.conj(f.at(T32 + 2 * math.pi * a * l))
    assert np.max(np.abs(alpha_cocycle(A, n).at(T32) - ref)) <= 1e-11


def test_alpha_cocycle_matches_algebra_power(rng):
    a = 1 / 3
    f = random_map(rng, degree=2, scale=0.2)
    A = AnzaiMap(GOLDEN, a, f)
    F, _ = fourier_series(f)
    fv = NCPoly.from_modes(a, {1: F})
    x = NCPoly.one(a)
    for n in range(1, 4):
        x = mul(x, fv)
        assert x.modes[n].max_diff(A.fourier(alpha_cocycle(A, n))) <= 1e-12


@given(seeds, st.sampled_from(ALPHAS))
def test_alpha_cocycle_identity(seed, a):
    rng = np.random.default_rng(seed)
    A = AnzaiMap(GOLDEN, a, random_map(rng))
    for m in range(-4, 5):
        for n in range(-4, 5):
            lhs = alpha_cocycle(A, m + n).at(T32)
            rhs = alpha_cocycle(A, m).at(T32) * alpha_cocycle(A, n).at(T32 - 2 * math.pi * m * a)
            assert np.max(np.abs(lhs - rhs)) <= 1e-11


def test_apply_generators(rng):
    f = random_map(rng)
    A = AnzaiMap(GOLDEN, 1 / 3, f)
    u = apply(A, NCPoly.U(1 / 3))
    assert u.coeffs == pytest.approx({(1, 0): cmath.exp(1j * GOLDEN)})
    v = apply(A, NCPoly.V(1 / 3))
    F, _ = fourier_series(f)
    assert v.modes[1].max_diff(F) <= 1e-14 and set(v.modes) == {1}


@given(seeds, st.sampled_from(ALPHAS))
def test_apply_homomorphism_and_star(seed, a):
    rng = np.random.default_rng(seed)
    A = AnzaiMap(GOLDEN, a, random_map(rng))
    x, y = random_ncpoly(rng, a, 8, 3), random_ncpoly(rng, a, 8, 3)
    assert apply(A, mul(x, y)).max_diff(mul(apply(A, x), apply(A, y))) <= 1e-10
    assert apply(A, adjoint(x)).max_diff(adjoint(apply(A, x))) <= 1e-10
    assert abs(trace(apply(A, x)) - trace(x)) <= 1e-12


def test_theta_cocycle_examples():
    A = AnzaiMap(GOLDEN, 1 / 3, WindingMap.identity())
    assert theta_cocycle(A, 1, 0).is_constant()
    assert _maxdiff(theta_cocycle(A, 1, 1), alpha_cocycle(A, 1)) == 0.0
    for k in (2, 7, 50):
        f = theta_cocycle(A, 1, k)
        assert f.winding == k
        ref = np.exp(1j * (GOLDEN * k * (k - 1) / 2 + k * T32))
        assert np.max(np.abs(f.at(T32) - ref)) <= 1e-11


@given(seeds, st.sampled_from(ALPHAS), st.integers(-2, 2))
def test_doubling_vs_naive(seed, a, n):
    rng = np.random.default_rng(seed)
    A = AnzaiMap(GOLDEN, a, random_map(rng))
    assert _maxdiff(theta_cocycle(A, n, 13), naive_theta_cocycle(A, n, 13)) <= 1e-10


@given(seeds, st.sampled_from(ALPHAS), st.integers(-2, 2))
def test_theta_cocycle_identity(seed, a, n):
    rng = np.random.default_rng(seed)
    A = AnzaiMap(GOLDEN, a, random_map(rng))
    for j in (1, 2, 3, 5, 8):
        for k in (1, 2, 3, 5, 8):
            lhs = theta_cocycle(A, n, j + k).at(T32)
            rhs = theta_cocycle(A, n, j).at(T32) * theta_cocycle(A, n, k).at(T32 + j * GOLDEN)
            assert np.max(np.abs(lhs - rhs)) <= 1e-11


def test_apply_iter(rng):
    a = 1 / 3
    A = AnzaiMap(GOLDEN, a, WindingMap.exp_sin(0.7, 1, 1))
    x = random_ncpoly(rng, a, 8, 3)
    assert apply_iter(A, x, 0) is x
    y = x
    for _ in range(5):
        y = apply(A, y)
    assert apply_iter(A, x, 5).max_diff(y) <= 1e-10
    for m in (-2, 1, 3):
        um = apply_iter(A, NCPoly.monomial(a, m, 0), 1000)
        assert abs(um[(m, 0)] - cmath.exp(1j * 1000 * m * GOLDEN)) <= 1e-10


def test_inverse(rng):
    a = 0.0
    A = AnzaiMap(GOLDEN, a, random_map(rng))
    B = inverse(inverse(A))
    assert B.theta == A.theta and B.f.max_diff(A.f) <= 1e-12
    V = NCPoly.V(a)
    assert apply(inverse(A), apply(A, V)).max_diff(V) <= 1e-10
    C = AnzaiMap(GOLDEN, a, WindingMap.identity())
    assert apply(inverse(C), apply(C, V)).max_diff(V) <= 1e-10


@given(seeds, st.sampled_from(ALPHAS), st.integers(1, 9))
def test_negative_iterates_roundtrip(seed, a, k):
    rng = np.random.default_rng(seed)
    A = AnzaiMap(GOLDEN, a, random_map(rng, degree=2, scale=0.2))
    x = random_ncpoly(rng, a, 6, 2)
    assert apply_iter(A, apply_iter(A, x, k), -k).max_diff(x) <= 1e-10
    # Phi(V^n) Phi(V^{-n}) = 1
    vn, vmn = NCPoly.monomial(a, 0, k % 4 + 1), NCPoly.monomial(a, 0, -(k % 4 + 1))
    assert mul(apply(A, vn), apply(A, vmn)).max_diff(NCPoly.one(a)) <= 1e-10


@given(seeds, st.sampled_from(ALPHAS))
def test_trace_invariance_property(seed, a):
    rng = np.random.default_rng(seed)
    A = AnzaiMap(GOLDEN, a, random_map(rng, degree=2, scale=0.2))
    x = random_ncpoly(rng, a)
    k = int(rng.integers(1, 1001))
    assert abs(trace(apply_iter(A, x, k)) - trace(x)) <= 1e-10


@given(seeds)
def test_gauge_equivariance(seed):
    rng = np.random.default_rng(seed)
    a = 1 / 3
    A = AnzaiMap(GOLDEN, a, random_map(rng))
    g = GaugePair.from_angles(0.0, float(rng.uniform(-3, 3)))
    x = random_ncpoly(rng, a, 8, 3)
    assert apply(A, gauge(x, g)).max_diff(gauge(apply(A, x), g)) <= 1e-12


def test_right_twist():
    a = 1 / 3
    f = WindingMap.exp_sin(0.5, 2, 1)
    F, _ = fourier_series(f)
    Fr, _ = fourier_series(right_twist(f, a))
    lhs = mul(NCPoly.from_modes(a, {0: Fr}), NCPoly.V(a))
    rhs = mul(NCPoly.V(a), NCPoly.from_modes(a, {0: F}))
    assert lhs.max_diff(rhs) <= 1e-12


def test_alpha_mismatch():
    A = AnzaiMap(GOLDEN, 0.25, WindingMap.identity())
    with pytest.raises(AlphaMismatch):
        apply(A, NCPoly.U(0.5))


# -- Cesaro ----------------------------------------------------------------------

def test_cesaro_continuous_eigenvalue_exact():
    for a in ALPHAS:
        A = AnzaiMap(GOLDEN, a, WindingMap.exp_sin(0.7, 1, 1))
        for m in (1, -2):
            r = cesaro(A, NCPoly.monomial(a, m, 0), Weight.theta(GOLDEN, m), [1, 7, 64, 1000])
            for c in r.checkpoints:
                assert c.average.coeffs == {(m, 0): 1.0}


def test_cesaro_unit():
    A = AnzaiMap(GOLDEN, 1 / 3, WindingMap.identity())
    r = cesaro(A, NCPoly.one(1 / 3), 1.0, [3, 64])
    assert all(c.average.coeffs == {(0, 0): 1.0} for c in r.checkpoints)


@pytest.mark.parametrize("a", ALPHAS)
def test_cesaro_norm_law(a):
    A = AnzaiMap(GOLDEN, a, WindingMap.identity())
    Ns = [64, 256, 1024]
    r = cesaro(A, NCPoly.V(a), 1.0, Ns)
    for c in r.checkpoints:
        assert abs(c.gns_norm ** 2 - 1 / c.N) <= 1e-10


@given(seeds, st.sampled_from(ALPHAS))
def test_cesaro_matches_naive(seed, a):
    rng = np.random.default_rng(seed)
    A = AnzaiMap(GOLDEN, a, random_map(rng, degree=2, scale=0.2))
    x = random_ncpoly(rng, a, 5, 2)
    lam = Weight(float(rng.uniform(-3, 3)))
    r = cesaro(A, x, lam, [17, 40])
    assert r.checkpoints[-1].average.max_diff(cesaro_naive(A, x, lam, 40)) <= 1e-11
    assert r.checkpoints[0].average.max_diff(cesaro_naive(A, x, lam, 17)) <= 1e-11


def test_cesaro_threads_identical(rng):
    a = 1 / 3
    A = AnzaiMap(GOLDEN, a, WindingMap.exp_sin(0.4, 1, 1))
    x = random_ncpoly(rng, a, 8, 2)
    r1 = cesaro(A, x, 1.0, [64, 512], threads=1)
    r4 = cesaro(A, x, 1.0, [64, 512], threads=4)
    assert r1.to_csv() == r4.to_csv()


def test_cesaro_points_match_full(rng):
    a = 0.0
    A = AnzaiMap(GOLDEN, a, WindingMap.exp_sin(0.5, 1, 1))
    c = TrigPoly({0: 1.0, 2: 0.3j})
    lam = Weight(0.9)
    sched = [64, 256]
    pts = cesaro_mode_points(A, c, 1, lam, sched, P=16)
    full = cesaro(A, NCPoly.from_modes(a, {1: c}), lam, sched)
    for i, cp in enumerate(full.checkpoints):
        vals = cp.average.modes[1].at(grid_points(16))
        assert np.max(np.abs(vals - pts[i])) <= 1e-12


def test_cesaro_csv_header():
    A = AnzaiMap(GOLDEN, 0.0, WindingMap.identity())
    r = cesaro(A, NCPoly.V(0.0), 1.0, [4])
    lines = r.to_csv().splitlines()
    assert lines[0].split(",") == CesaroResult.CSV_HEADER
    assert lines[1].split(",")[0] == "4"


def test_cesaro_uv_bound():
    A = AnzaiMap(GOLDEN, 1 / 3, WindingMap.identity())
    r = cesaro(A, NCPoly.monomial(1 / 3, 1, 1), Weight.theta(GOLDEN, 1), [1 << 12])
    assert r.checkpoints[-1].upper <= 0.05
