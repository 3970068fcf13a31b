import numpy as np
import pytest
from hypothesis import given, strategies as st

from ablscar.model import (SystemParams, InputError, potential_jets, jets_along,
                           vector_potential_symmetric, vector_potential_landau,
                           symmetric_to_landau_phase)

finite = st.floats(-20, 20, allow_nan=False)


def test_benchmark_defaults():
    p = SystemParams()
    assert (p.hbar, p.mass, p.charge, p.B, p.omega0, p.d) == (1, 1, 1, 1, 2, 10)
    assert p.omega_c == 1 and p.l_B == 1
    assert p.Omega == pytest.approx(np.sqrt(5))


@pytest.mark.parametrize("kw", [{"hbar": 0}, {"mass": -1}, {"d": 0}, {"omega0": -1}])
def test_invalid_params_rejected(kw):
    with pytest.raises(InputError):
        SystemParams(**kw)


def test_zero_field_has_infinite_magnetic_length():
    assert SystemParams(B=0).l_B == np.inf


def test_with_and_to_dict_round_trip():
    p = SystemParams().with_(d=12.0)
    assert SystemParams(**{**p.to_dict(), "energy_window": tuple(p.to_dict()["energy_window"])}) == p


@given(finite, finite)
def test_gauge_phase_is_unimodular_and_generates_the_gauge_change(x, y):
    p = SystemParams()
    g = symmetric_to_landau_phase(x, y, p)
    assert abs(abs(g) - 1) < 1e-12
    # A_L - A_S = grad chi with chi = -B x y / 2 and g = exp(i e chi / hbar)
    axs, ays = vector_potential_symmetric(x, y, p)
    axl, ayl = vector_potential_landau(x, y, p)
    h = 1e-6
    dchi_dx = np.angle(symmetric_to_landau_phase(x + h, y, p) / symmetric_to_landau_phase(x - h, y, p)) / (2 * h)
    dchi_dy = np.angle(symmetric_to_landau_phase(x, y + h, p) / symmetric_to_landau_phase(x, y - h, p)) / (2 * h)
    assert dchi_dx == pytest.approx(p.charge / p.hbar * (axl - axs), abs=1e-5)
    assert dchi_dy == pytest.approx(p.charge / p.hbar * (ayl - ays), abs=1e-5)


@given(finite, st.floats(0, 2 * np.pi))
def test_potential_jets_match_the_parabola(y, phi):
    p = SystemParams()
    n = np.array([np.cos(phi), np.sin(phi)])
    jet = potential_jets(np.array([1.0, y]), n, p)
    k = p.mass * p.omega0 ** 2
    U = lambda t: 0.5 * k * (y + t * n[1]) ** 2
    assert jet[0] == pytest.approx(U(0), rel=1e-12, abs=1e-12)
    assert jet[1] == pytest.approx((U(1e-4) - U(-1e-4)) / 2e-4, rel=1e-6, abs=1e-6)
    assert jet[2] == pytest.approx(0.5 * k * n[1] ** 2, rel=1e-12, abs=1e-14)


def test_jets_along_vectorized():
    p = SystemParams()
    r = np.array([[0, 1.0], [2, -3.0]])
    e_n = np.array([[0, 1.0], [1, 0.0]])
    u0, u1, u2 = jets_along(r, e_n, p)
    assert np.allclose(u0, [2, 18]) and np.allclose(u1, [4, 0]) and np.allclose(u2, [2, 0])
