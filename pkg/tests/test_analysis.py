import numpy as np
import pytest
from hypothesis import given, strategies as st

from ablscar import analysis as an
from ablscar.model import SystemParams, InputError


def _gauss_mix(y):
    return (an.coherent_state(y, -1.0, 2.0, 0.7) + 0.5 * an.coherent_state(y, 1.5, -1.0, 0.4)
            + 0.3j * an.coherent_state(y, 0.2, 0.0, 1.1))


@given(st.floats(-3, 3), st.floats(-4, 4), st.floats(-1, 1), st.floats(-2, 2), st.floats(0.3, 1.5))
def test_husimi_of_coherent_state_is_gaussian_overlap(y1, p1, dy, dp, sigma):
    f = lambda y: an.coherent_state(y, y1, p1, sigma)
    H = an.husimi_value(f, y1 + dy, p1 + dp, sigma)
    ref = np.exp(-0.5 * (dy / sigma) ** 2 - 0.5 * (dp * sigma) ** 2)
    assert abs(H - ref) < 1e-10


def test_husimi_peak_at_packet_centre():
    f = lambda y: an.coherent_state(y, 0.8, -1.3, 0.5)
    hm = an.husimi_map(f, np.linspace(-2, 2, 41), np.linspace(-3, 3, 61), 0.5)
    y0, p0 = hm.peak(refine_with=lambda a, b: an.husimi_value(f, a, b, 0.5))
    assert abs(y0 - 0.8) < 1e-4 and abs(p0 + 1.3) < 1e-4
    assert an.husimi_map(lambda y: 0 * y, [0.0], [0.0], 0.5).H[0, 0] == 0


@pytest.mark.parametrize("sigma", [0.3, 0.6, 1.0])
def test_husimi_integral_is_norm(sigma):
    # resolution of identity: int H dy dp / (2 pi hbar) = ||f||^2, for any sigma
    y = np.linspace(-10, 10, 4001)
    norm2 = np.trapezoid(np.abs(_gauss_mix(y)) ** 2, y)
    yg = np.linspace(-8, 8, 161)
    pg = np.linspace(-12, 12, 241)
    hm = an.husimi_map(_gauss_mix, yg, pg, sigma)
    integral = np.trapezoid(np.trapezoid(hm.H, yg, axis=1), pg) / (2 * np.pi)
    assert abs(integral / norm2 - 1) < 0.02


def test_husimi_rejects_bad_sigma():
    with pytest.raises(InputError):
        an.husimi_map(_gauss_mix, [0.0], [0.0], 0.0)


def test_energy_circle_and_accessible_disc():
    p = SystemParams()
    y, py = an.energy_circle(92.55, p, 64)
    assert np.allclose(py ** 2 / (2 * p.mass) + 0.5 * p.mass * p.omega0 ** 2 * y ** 2, 92.55)
    ys, ps = an.accessible_samples(92.55, p, 30)
    assert np.all(ps ** 2 / 2 + 0.5 * p.omega0 ** 2 * ys ** 2 <= 92.55 * (1 + 1e-12))
    hm = an.HusimiMap(np.array([0.0, 9.0]), np.array([0.0, 20.0]), np.ones((2, 2)), 1.0, 92.55, p)
    assert hm.accessible().tolist() == [[True, False], [False, False]]


def test_scar_test_on_packet_at_orbit_point():
    p = SystemParams()
    pt = (0.0, -9.56)
    f = lambda y: an.coherent_state(y, *pt, p.l_B)
    t = an.scar_test(f, pt, 92.55, p)
    assert t.passed and t.ratio > 1e3 and abs(t.value - 1) < 1e-8
    away = an.scar_test(f, (3.0, 5.0), 92.55, p)
    assert not away.passed
    with pytest.raises(InputError):
        an.scar_test(f, pt, 92.55, p, reference="square")


def test_boxcar_constant_and_noise(rng):
    x = np.linspace(0, 10, 1001)
    assert np.allclose(an.boxcar(np.full_like(x, 2.5), x, 0.5), 2.5)
    noise = rng.normal(size=x.size)
    sm = an.boxcar(noise, x, 0.5)  # 51-point window
    assert np.var(noise) / np.var(sm) > 5
    with pytest.raises(InputError):
        an.boxcar(noise, x, 0.001)


def test_line_profile_of_callable_and_samples():
    p = SystemParams()
    x = np.linspace(0, p.d, 201)
    f = lambda X, Y: np.sin(np.pi * X / p.d) * np.exp(-Y ** 2) * 1j
    a = an.line_profile(f, x, params=p)
    b = an.line_profile(np.sin(np.pi * x / p.d), x, params=p)
    assert np.allclose(a, b)
    # interior: the 11-point running mean of sin(kx) is sin(kx) times the
    # discrete sinc factor sin(11 k dx/2) / (11 sin(k dx/2))
    k, dx = np.pi / p.d, x[1] - x[0]
    fac = np.sin(11 * k * dx / 2) / (11 * np.sin(k * dx / 2))
    inner = slice(5, -5)
    assert np.max(np.abs(a[inner] - fac * np.sin(k * x[inner]))) < 1e-12


@given(st.floats(0.1, 10), st.floats(-5, 5))
def test_profile_correlation_affine_invariant(scale, shift):
    x = np.linspace(0, 10, 301)
    a = np.sin(x) + 0.1 * x
    assert abs(an.profile_correlation(a, scale * a + shift, x) - 1) < 1e-12
    assert abs(an.profile_correlation(a, -a, x, x_max=5.0) + 1) < 1e-12


def test_parity_of_grid_and_field():
    x = np.linspace(-1, 1, 41)
    X, Y = np.meshgrid(x, np.linspace(-2, 2, 61))
    even = np.exp(-X ** 2 - Y ** 2) * (1 + X * Y)
    odd = X * np.exp(-X ** 2 - Y ** 2)
    r = an.parity_of_grid(even)
    assert r.parity == 1 and r.residual < 1e-12 and abs(r.correlation - 1) < 1e-12
    r = an.parity_of_grid(odd + 1e-3 * even)
    assert r.parity == -1 and r.residual < 1e-2
    p = SystemParams()
    r = an.parity_of_field(lambda X, Y: (X - p.d / 2) * np.exp(-Y ** 2), p, 51, 41)
    assert r.parity == -1 and r.residual < 1e-12


def test_expected_parity_rule():
    assert [an.expected_parity(n) for n in (66, 67, 68, 69)] == [-1, 1, -1, 1]
