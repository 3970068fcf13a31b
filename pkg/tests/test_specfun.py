"""Special functions against mpmath and against closed forms/identities."""
import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial.hermite import hermval
from scipy.special import gamma

from ablscar import specfun as sf

mp.mp.dps = 30


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@given(st.integers(0, 25), st.floats(-6, 6))
def test_hermite_matches_numpy(m, x):
    c = np.zeros(m + 1)
    c[m] = 1
    ref = hermval(x, c)
    assert sf.hermite(m, x) == pytest.approx(ref, rel=1e-10, abs=1e-10 * 2.0 ** m)


@given(st.complex_numbers(max_magnitude=3), st.floats(0.3, 4), st.complex_numbers(max_magnitude=6))
def test_kummer_matches_mpmath(a, b, x):
    ref = complex(mp.hyp1f1(a, b, x))
    assert rel(complex(sf.kummer_m(a, b, x)), ref) < 1e-10 or abs(complex(sf.kummer_m(a, b, x)) - ref) < 1e-12


def test_parabolic_cylinder_closed_forms():
    z = np.array([2.0, 1.0, 0.7 + 0.4j, -1.3 + 2.0j, 9.0 - 3.0j])
    assert np.allclose(sf.parabolic_cylinder_d(0, z), np.exp(-z ** 2 / 4), rtol=1e-12, atol=1e-300)
    assert np.allclose(sf.parabolic_cylinder_d(1, z), z * np.exp(-z ** 2 / 4), rtol=1e-12, atol=1e-300)
    # integer orders: D_m(z) = 2^{-m/2} e^{-z^2/4} H_m(z/sqrt 2)
    for m in range(2, 7):
        ref = 2 ** (-m / 2) * np.exp(-z ** 2 / 4) * sf.hermite(m, z / np.sqrt(2))
        assert np.allclose(sf.parabolic_cylinder_d(m, z), ref, rtol=1e-10)


@given(st.floats(-3, 3), st.floats(-2, 2), st.floats(0, 12), st.floats(-np.pi, np.pi))
def test_parabolic_cylinder_matches_mpmath(xr, xim, r, ph):
    xi = complex(xr, xim)
    z = r * np.exp(1j * ph)
    ref = complex(mp.pcfd(xi, z))
    val = sf.parabolic_cylinder_d(xi, z)
    assert abs(val - ref) <= 1e-8 * max(abs(ref), 1e-3 * np.exp(-0.0 * r))


@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=5))
def test_parabolic_cylinder_recurrence(xi, z):
    D = lambda q: sf.parabolic_cylinder_d(q, z)
    lhs = D(xi + 1) - z * D(xi) + xi * D(xi - 1)
    # measured against the size of the functions themselves (the three terms
    # can all vanish, e.g. at z = 0 for xi -> 0)
    scale = max(abs(D(xi + 1)), abs(D(xi)), abs(D(xi - 1)), 1e-300)
    assert abs(lhs) / scale < 1e-9


@given(st.floats(0.0, 60.0))
def test_bessel_quarter_orders_match_mpmath(x):
    x = max(x, 1e-3)
    assert sf.bessel_j_m14(x) == pytest.approx(float(mp.besselj(-0.25, x)), abs=1e-12)
    assert sf.bessel_j_p14(x) == pytest.approx(float(mp.besselj(0.25, x)), abs=1e-12)


def test_x14_j_m14_finite_at_origin_and_consistent():
    assert sf.x14_j_m14(0.0) == pytest.approx(2 ** 0.25 / gamma(0.75), rel=1e-14)
    x = np.linspace(0.1, 50, 200)
    assert np.allclose(sf.x14_j_m14(x), x ** 0.25 * sf.bessel_j_m14(x), rtol=1e-12, atol=1e-14)


def test_bessel_wronskian():
    # W[J_{1/4}, J_{-1/4}] = -2 sin(pi/4) / (pi x)
    x = np.linspace(0.5, 40, 60)
    h = 1e-3
    d = lambda f: (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)
    w = sf.bessel_j_p14(x) * d(sf.bessel_j_m14) - d(sf.bessel_j_p14) * sf.bessel_j_m14(x)
    assert np.max(np.abs(w + 2 * np.sin(np.pi / 4) / (np.pi * x))) < 1e-8


def test_config_validation_and_bounds():
    with pytest.raises(ValueError):
        sf.SpecFunConfig(series_tolerance=1e-3)
    with pytest.raises(ValueError):
        sf.SpecFunConfig(pcf_inner_radius=5, pcf_outer_radius=4)
    with pytest.raises(ValueError):
        sf.parabolic_cylinder_d(0.5, 100.0)
    with pytest.raises(ValueError):
        sf.bessel_j_m14(-1.0)
