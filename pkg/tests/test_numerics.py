"""Accuracy checks for the hand-rolled special functions.

Reference values were generated with mpmath (dps=40) and scipy.special and
are frozen here as literals; the grid comparisons below re-derive them
against scipy at runtime as a second, independent check.
"""

import math

import numpy as np
import pytest
import scipy.special

from gprs import numerics as nm

# (x, Phi(x)) pairs computed with mpmath.ncdf at 40 digits.
NORM_CDF_TABLE = [
    (-8.0, 6.2209605742717841235e-16),
    (-5.5, 1.8989562465887719384e-8),
    (-3.0, 0.0013498980316300945267),
    (-2.9999, 0.0013503412829549249056),
    (-1.0, 0.15865525393145705141),
    (-0.5, 0.30853753872598689636),
    (0.0, 0.5),
    (0.3, 0.61791142218895263307),
    (1.0, 0.84134474606854294859),
    (2.5, 0.99379033467422386483),
    (4.0, 0.99996832875816688008),
    (6.0, 0.99999999901341235496),
]

# (p, Phi^{-1}(p)) from mpmath erfinv.
NORM_QUANTILE_TABLE = [
    (0.75, 0.6744897501960817432),
    (0.025, -1.9599639845400542118),
    (1e-10, -6.3613409024040561991),
    (1.0 - 1e-12, 7.0344869100478352057),
    (0.9, 1.2815515655446005935),
]


def test_norm_cdf_frozen_values():
    for x, ref in NORM_CDF_TABLE:
        got = nm.norm_cdf(x)
        assert got == pytest.approx(ref, rel=5e-13, abs=1e-15), f"Phi({x})"


def test_norm_cdf_tail_relative_accuracy():
    # Deep lower tail must keep *relative* accuracy (used for densities of
    # narrow level sets); compare with scipy's erfc-based implementation.
    x = np.linspace(-37.0, -2.0, 400)
    got = nm.norm_cdf(x)
    ref = scipy.special.ndtr(x)
    assert np.all(np.abs(got / ref - 1.0) < 5e-13)


def test_norm_cdf_symmetry_and_monotonicity():
    x = np.linspace(-9, 9, 2001)
    phi = nm.norm_cdf(x)
    assert np.all(np.diff(phi) >= 0.0)
    assert np.allclose(phi + nm.norm_cdf(-x), 1.0, rtol=0, atol=1e-15)


def test_norm_quantile_frozen_values():
    for p, ref in NORM_QUANTILE_TABLE:
        assert nm.norm_quantile(p) == pytest.approx(ref, rel=1e-12, abs=1e-13)


def test_norm_quantile_roundtrip():
    p = np.concatenate(
        [np.linspace(1e-6, 1 - 1e-6, 401), [1e-13, 1e-9, 0.5, 1 - 1e-9]]
    )
    x = nm.norm_quantile(p)
    back = nm.norm_cdf(x)
    tail = np.minimum(p, 1.0 - p)
    # Compare tails so that p ~ 1 keeps a meaningful relative scale.
    back_tail = np.minimum(back, 1.0 - back)
    assert np.all(np.abs(back_tail - tail) <= 1e-11 * tail + 1e-16)


def test_norm_quantile_symmetry():
    # Dyadic p so that 1 - p is exactly representable: symmetry is then exact.
    for p in [0.25, 2.0**-10, 2.0**-30, 0.375]:
        assert nm.norm_quantile(p) == -nm.norm_quantile(1.0 - p)


def test_norm_quantile_domain():
    with pytest.raises(ValueError):
        nm.norm_quantile(0.0)
    with pytest.raises(ValueError):
        nm.norm_quantile(1.0)


def test_norm_cdf_diff_narrow_intervals():
    # mpmath references for intervals far too narrow for naive subtraction.
    cases = [
        (1.0, 1.000000001, 2.4197074441890548515e-10),
        (-3.0, -2.9999999, 4.4318490694622564049e-10),
        (0.0, 1e-12, 3.9894228040143266992e-13),
        (5.0, 5.000001, 1.4867157981492673356e-12),
    ]
    for a, b, ref in cases:
        assert nm.norm_cdf_diff(a, b) == pytest.approx(ref, rel=1e-12)


def test_norm_cdf_diff_matches_subtraction_when_wide():
    a = np.array([-2.0, 0.0, -8.0, 1.0])
    b = np.array([-1.0, 3.0, 8.0, 1.5])
    assert np.allclose(
        nm.norm_cdf_diff(a, b), nm.norm_cdf(b) - nm.norm_cdf(a), rtol=0, atol=1e-16
    )


def test_norm_cdf_diff_continuous_at_switch():
    # Widths just below/above the series cutoff must agree to high accuracy.
    m = 1.7
    for d in [4.9e-4, 5.1e-4]:
        got = nm.norm_cdf_diff(m - d, m + d)
        ref = scipy.special.ndtr(m + d) - scipy.special.ndtr(m - d)
        assert got == pytest.approx(ref, rel=1e-8)


def test_norm_pdf():
    assert nm.norm_pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-15)
    x = np.linspace(-5, 5, 101)
    assert np.allclose(nm.norm_pdf(x), np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi))


def test_riemann_zeta_values():
    assert nm.riemann_zeta(2.0) == pytest.approx(math.pi**2 / 6.0, rel=1e-13)
    for s in [1.125, 1.5, 2.0, 3.0, 1.01, 6.5]:
        assert nm.riemann_zeta(s) == pytest.approx(scipy.special.zeta(s, 1), rel=1e-12)
    grid = np.linspace(1.02, 9.0, 91)
    for s in grid:
        assert nm.riemann_zeta(float(s)) == pytest.approx(
            float(scipy.special.zeta(s, 1)), rel=1e-12
        )


def test_riemann_zeta_domain():
    with pytest.raises(ValueError):
        nm.riemann_zeta(1.0)


def test_lambert_w0_values():
    assert nm.lambert_w0(0.0) == 0.0
    assert nm.lambert_w0(math.e) == pytest.approx(1.0, rel=1e-14)
    for x in [-0.3678, -0.2, 0.5, 1.0, 10.0, 1e8]:
        assert nm.lambert_w0(x) == pytest.approx(
            scipy.special.lambertw(x).real, rel=1e-12
        )


def test_lambert_w0_identity():
    for x in np.concatenate([np.linspace(-0.36, 60.0, 200), [1e6, 1e12]]):
        w = nm.lambert_w0(float(x))
        assert w * math.exp(w) == pytest.approx(float(x), rel=1e-12, abs=1e-14)


def test_lambert_w0_domain():
    with pytest.raises(ValueError):
        nm.lambert_w0(-1.0)


def test_vectorized_matches_scalar_bitwise():
    x = np.linspace(-8.5, 8.5, 501)
    assert np.array_equal(nm.norm_cdf(x), np.array([nm.norm_cdf(float(t)) for t in x]))
    p = np.linspace(1e-9, 1 - 1e-9, 379)
    assert np.array_equal(
        nm.norm_quantile(p), np.array([nm.norm_quantile(float(t)) for t in p])
    )
    a = np.linspace(-4, 4, 101)
    b = a + np.linspace(1e-9, 2.0, 101)
    assert np.array_equal(
        nm.norm_cdf_diff(a, b),
        np.array([nm.norm_cdf_diff(float(u), float(v)) for u, v in zip(a, b)]),
    )
