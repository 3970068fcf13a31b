import types

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ablscar import semiclassics as sc
from ablscar import acceptance as acc
from ablscar.model import SystemParams
from ablscar.classical import (PhaseState, PeriodicOrbit, Reflection, integrate_eom, build_arc,
                               signed_area, find_bell_orbit)
from ablscar.analysis import parity_of_field

HB = 1.0


# ------------------------------------------------------------ actions

def _horizontal_orbit(E, p):
    v = np.sqrt(2 * E / p.mass)
    arcs = []
    for st0 in (PhaseState(0.0, 0.0, v, 0.0), PhaseState(p.d, 0.0, -v, 0.0)):
        tr = integrate_eom(st0, p, dt=1.0, t_max=100)
        arcs.append(build_arc(tr, p, E, 401))
    refl = [Reflection((p.d, 0.0), 0.0, 1), Reflection((0.0, 0.0), 0.0, 0)]
    return PeriodicOrbit(arcs, refl, sum(a.duration for a in arcs), sum(a.length for a in arcs),
                         E, signed_area(arcs), 0.0)


def test_zero_field_horizontal_orbit_action():
    p = SystemParams(B=0.0)
    E = 30.0
    act = sc.action_and_flux(_horizontal_orbit(E, p), p)
    assert act.loop_action == pytest.approx(2 * p.d * np.sqrt(2 * p.mass * E), rel=1e-10)
    assert act.flux == 0.0


@given(st.floats(0.5, 5), st.floats(-2, 2))
def test_circle_flux_is_field_times_area(R, B):
    t = np.linspace(0, 2 * np.pi, 2001)
    arc = types.SimpleNamespace(r=np.stack([R * np.cos(t), R * np.sin(t)], -1),
                                e_t=np.stack([-np.sin(t), np.cos(t)], -1), s=R * t)
    area = signed_area([arc])
    assert area == pytest.approx(np.pi * R ** 2, rel=1e-10)
    assert abs(B * area) == pytest.approx(abs(B) * np.pi * R ** 2, rel=1e-10)


def test_benchmark_action_converged_and_phase_derivative(params, bell, floquet):
    act = sc.action_and_flux(bell, params, floquet.census)
    fine = find_bell_orbit(92.55, params, n_samples=4001)
    act2 = sc.action_and_flux(fine, params)
    assert act.total == pytest.approx(act2.total, rel=1e-8)
    assert act.alpha == 8 and act.loop_action > 0
    arc = bell.arcs[0]
    h = arc.s[1] - arc.s[0]
    S = act.S0[0]
    num = (S[:-4] - 8 * S[1:-3] + 8 * S[3:-1] - S[4:]) / (12 * h)   # fourth-order stencil
    assert np.max(np.abs(num - act.dS0[0][2:-2])) < 1e-7 * np.max(np.abs(act.dS0[0]))
    # continuity of S0 along the loop
    assert act.S0[1][0] == pytest.approx(act.S0[0][-1])


def test_open_orbit_rejected(params, bell):
    broken = PeriodicOrbit([bell.arcs[0]], bell.reflections[:1], 1.0, 1.0, 92.55, 0.0, 0.0)
    with pytest.raises(sc.InputError):
        sc.action_and_flux(broken, params)


# ------------------------------------------------------- quantization

@given(st.floats(1.0, 10.0), st.integers(1, 80))
def test_linear_family_unstable_quantization_exact(c, n):
    fam = sc.linear_family(c, alpha=8)
    E_exact = HB * (2 * np.pi * n + 4 * np.pi) / c
    st_ = sc.quantize_unstable(n, 0.0, SystemParams(), fam, E_start=E_exact * 1.01)
    assert st_.E == pytest.approx(E_exact, rel=1e-12)
    assert abs(st_.residual) < 1e-9


@given(st.floats(1.0, 10.0), st.integers(1, 50), st.integers(0, 4), st.floats(0.1, 3.0))
def test_linear_family_stable_quantization_exact(c, n, m, phi):
    fam = sc.linear_family(c, alpha=0, phi=phi)
    E_exact = HB * (2 * np.pi * n + (m + 0.5) * phi) / c
    st_ = sc.quantize_stable(n, m, SystemParams(), fam, E_start=E_exact + 0.3)
    assert st_.E == pytest.approx(E_exact, rel=1e-12)
    up = sc.quantize_stable(n, m + 1, SystemParams(), fam, E_start=E_exact + 0.3)
    assert up.E > st_.E


def test_stable_quantization_needs_family():
    with pytest.raises(sc.InputError):
        sc.quantize_stable(1, 0)


def test_nonmonotone_bracket_rejected():
    fam = lambda E: sc.FamilyPoint(E, (E - 5.0) ** 2, 0.0, 0.0, 0)
    with pytest.raises(sc.QuantizationError):
        sc.quantize_unstable(0, 0.0, SystemParams(), fam, bracket=(3.0, 7.0))


def test_benchmark_quantized_energies(bench):
    Es = [s.E for s in bench.abl_states]
    # frozen from an independent solve of the quantization condition
    assert Es == pytest.approx([92.55377, 94.31491, 96.07874, 97.84520], abs=2e-4)
    for s in bench.abl_states:
        assert abs(s.residual) < 1e-9
        assert s.point.alpha == 8
    sp = np.diff(Es)
    assert (sp.max() - sp.min()) / sp.mean() < 0.10


# ------------------------------------------------------- mode functions

def _stable_data(k=0.8, a=1.3, s=np.linspace(0, 3, 31)):
    z = np.exp(1j * k * s)
    p = 1j * k * a * z
    return s, z, np.conj(z), p, np.conj(p), 2j * k * a, a * np.ones_like(s)


def test_ground_mode_is_gaussian_beam():
    s, z, zb, p, pb, w, a = _stable_data()
    nu = np.linspace(-2, 2, 21)
    psi = sc.abl_mode(nu, 0.0, z, zb, p, pb, w, a)
    G = p / z
    ref = np.exp(0.5j * G[:, None] * nu[None, :] ** 2) / np.sqrt(a * z)[:, None]
    assert np.allclose(psi, ref, rtol=1e-12)


@pytest.mark.parametrize("m", [0, 1, 2, 3, 5])
def test_abl_mode_matches_hermite_form(m):
    s, z, zb, p, pb, w, a = _stable_data()
    nu = np.linspace(-2.5, 2.5, 41)
    A = sc.abl_mode(nu, m, z, zb, p, pb, w, a)
    H = sc.hermite_mode(nu, m, z, zb, p, pb, w, a)
    # equal up to a constant whose phase depends on the square-root branches
    c = np.vdot(H.ravel(), A.ravel()) / np.vdot(H.ravel(), H.ravel())
    assert abs(c) == pytest.approx(2.0 ** (-m / 2) * abs(w) ** (-m / 2), rel=1e-10)
    assert np.max(np.abs(A - c * H)) < 1e-8 * np.max(np.abs(A))


def test_abl_mode_rejects_focal_points():
    s, z, zb, p, pb, w, a = _stable_data()
    z = z.copy()
    z[3] = 0
    with pytest.raises(sc.SingularityError):
        sc.abl_mode([0.1], 0.5, z, zb, p, pb, w, a)


def test_constant_coefficient_beam_residual_and_perturbation():
    k, a = 0.8, 1.3
    # z = exp(i k s) solves z' = p/a, p' = -a d z with p = i k a z and d = k^2
    dd = k ** 2
    evaluator = lambda s, nu: sc.abl_mode(nu, 0.0, *_stable_data(k, a, s)[1:])
    evaluator_bad = lambda s, nu: sc.abl_mode(nu, 0.0, *_perturbed(k, a, s))
    s = 1.0 + np.arange(-5, 6) * 0.002
    nu = np.arange(-2, 2.0001, 0.01)
    r_ok = sc.bl_residual(evaluator, lambda s: a + 0 * s, lambda s: dd + 0 * s, s, nu)[0]
    r_bad = sc.bl_residual(evaluator_bad, lambda s: a + 0 * s, lambda s: dd + 0 * s, s, nu)[0]
    assert r_ok < 1e-8
    assert r_bad > 100 * r_ok


def _perturbed(k, a, s):
    _, z, zb, p, pb, w, aa = _stable_data(k, a, s)
    # Gamma = p/z and Gamma_bar scaled by 1.01 (the Wronskian scales with them)
    return z, zb, 1.01 * p, 1.01 * pb, 1.01 * w, aa


def test_separatrix_small_nu_limit_and_evenness():
    s, z, zb, p, pb = np.array([0.0]), np.array([2.0]), np.array([0.7]), np.array([1.1]), np.array([-0.4])
    w = p * zb - pb * z
    nu = np.array([1e-6, 2e-6])
    psi = sc.separatrix_wavefunction(nu, z, zb, p, pb, w[0], np.array([1.5]))
    assert abs(psi[0, 0] / psi[0, 1] - 1) < 1e-4
    nu = np.linspace(0.1, 4, 30)
    plus = sc.separatrix_wavefunction(nu, z, zb, p, pb, w[0], np.array([1.5]))
    minus = sc.separatrix_wavefunction(-nu, z, zb, p, pb, w[0], np.array([1.5]))
    assert np.allclose(np.abs(plus), np.abs(minus), rtol=1e-14)


def test_separatrix_large_nu_envelope():
    zz, w = 0.8, 1.0
    nu = np.linspace(12, 30, 4000)
    X = w * nu ** 2 / (4 * zz)
    k = sc.separatrix_kernel(nu, zz, w)
    env = np.abs(k) * np.sqrt(nu)
    # |x^{1/4} J| -> sqrt(2/pi) x^{-1/4}; kernel amplitude times sqrt(nu) tends to
    # sqrt(2/pi) (4 zz / w)^{1/4} / sqrt(zz) * (w / (4 zz))^{-1/4}... = sqrt(2/pi)*sqrt(4/w)^{1/2}
    amp = np.sqrt(2 / np.pi) * (4 * zz / w) ** 0.25 / np.sqrt(zz) * (w / (4 * zz)) ** -0.25
    assert np.max(env[X > 20]) == pytest.approx(amp, rel=0.05)


def test_separatrix_rejects_focal_points():
    with pytest.raises(sc.SingularityError):
        sc.separatrix_wavefunction([0.1], [0.0], [1.0], [1.0], [1.0], 1.0, [1.0])


def test_benchmark_separatrix_residual(bench):
    ok, vals = acc.check_bl_residual(bench)
    assert vals["fine"] < 1e-4 and vals["ratio"] >= 8, vals


# ------------------------------------------------------- diagnostics

def test_ehrenfest_plug_in():
    dg = sc.diagnostics_from_lambda(1.0, np.e ** 3, T=2.0)
    assert dg.t_Ehr == pytest.approx(3.0)
    assert dg.T_less_than_tEhr
    with pytest.raises(sc.DiagnosticsError):
        sc.diagnostics_from_lambda(1.0, 0.5)


def test_benchmark_diagnostics(abl66, params):
    st_ = abl66
    dg = sc.ehrenfest_diagnostics(st_.point.orbit, st_.point.mono, params, st_.point.floquet)
    assert dg.T_less_than_tEhr
    assert dg.T_over_tEhr == pytest.approx(0.33, abs=0.02)
    assert np.isfinite(dg.delta_eta_estimate)


def test_transverse_current_examples():
    s = np.linspace(0, 1, 11)
    nu = np.linspace(-1, 1, 201)
    real = np.exp(-nu ** 2)[None, :] * np.ones((11, 1))
    _, jn, _ = sc.transverse_current(real, s, nu, 1.0)
    assert np.max(np.abs(jn)) == 0
    k = 2.5
    wave = np.exp(1j * k * nu)[None, :] * np.ones((11, 1))
    js, jn, res = sc.transverse_current(wave, s, nu, 2.0)
    assert np.allclose(jn, k, rtol=1e-3) and np.allclose(js, 2.0)


# ---------------------------------------------------------- full field

@pytest.fixture(scope="module")
def field67(bench):
    st_ = bench.abl_states[1]
    assert st_.n == 67
    return st_


def test_field_parity_matches_exact_solutions(field67, params):
    # ABL parity agrees with the exact scar state (n = 67: antisymmetric, see notes)
    pr = parity_of_field(field67, params, 61, 81, gauge="symmetric")
    assert pr.parity == -1
    assert pr.residual < 1e-6


def test_field_vanishes_on_walls(field67, params):
    y = np.linspace(-7, 7, 281)
    refl = [0.0]
    mask = np.all(np.abs(y[:, None] - np.array(refl)[None, :]) > 1.0, axis=1)
    F0 = field67(np.zeros_like(y), y)
    Fd = field67(np.full_like(y, params.d), y)
    X, Y = np.meshgrid(np.linspace(0, params.d, 81), np.linspace(-7, 7, 141))
    mx = np.max(np.abs(field67(X, Y)))
    assert np.max(np.abs(F0[mask])) < 0.05 * mx
    assert np.max(np.abs(Fd[mask])) < 0.05 * mx
