import numpy as np
import pytest
from hypothesis import given, strategies as st

from ablscar import exactqm as ex
from ablscar.model import SystemParams, InputError
from ablscar.analysis import parity_of_field


@given(st.floats(60, 110), st.integers(1, 30), st.floats(0.3, 2.0))
def test_channel_modes_solve_wall_free_hamiltonian(E, n_max, B):
    p = SystemParams(B=B)
    modes = ex.channel_basis(E, p, n_max=n_max, kappa_max=3.0)
    y = np.linspace(-9, 9, 721)
    for md in modes[:12]:
        Hf, f = ex.wall_free_hamiltonian_fd(md, p, y)
        assert np.max(np.abs(Hf - E * f)) < 1e-8 * E * np.max(np.abs(f))


def test_zero_field_channels_are_centred_plane_waves():
    p = SystemParams(B=0.0)
    modes = ex.channel_basis(20.0, p, n_max=10)
    assert all(md.Omega == p.omega0 for md in modes)
    assert all(md.y_k == 0 for md in modes)


def test_threshold_channel_is_single():
    p = SystemParams()
    E = p.hbar * p.Omega * 3.5
    modes = [m for m in ex.channel_basis(E, p, n_max=5) if m.n == 3]
    assert len(modes) == 1 and abs(modes[0].k) < 1e-6


def test_below_threshold_warns():
    with pytest.warns(ex.EmptyChannelWarning):
        ex.channel_basis(0.1, SystemParams(), n_max=3)
    with pytest.raises(InputError):
        ex.dispersion_k(1.0, 0, SystemParams(omega0=0.0))


def test_zero_field_collocation_finds_separable_levels():
    p = SystemParams(B=0.0)
    ref = ex.separable_spectrum(p, 12.0)
    ref = ref[(ref > 10.0) & (ref < 12.0)]
    res = ex.spectrum_scan((10.0, 12.0), p, n_max=40, step=0.01, n_rows=200)
    found = np.array([m[0] for m in res.minima])
    assert len(found) == len(ref)
    assert np.max(np.abs(found - ref)) < 1e-6
    med = np.median(res.sigma)
    assert all(s < 1e-4 * med for _, s in res.minima)


def test_zero_field_collocation_near_channel_threshold():
    # window around the n = 3 threshold (E = 7): one level 0.0028 below it,
    # one 0.049 above it; the shallow minimum at the threshold is rejected
    p = SystemParams(B=0.0)
    ref = ex.separable_spectrum(p, 8.0)
    ref = ref[(ref > 6.9) & (ref < 7.1)]
    res = ex.spectrum_scan((6.9, 7.1), p, n_max=40, step=0.01, n_rows=200)
    found = np.array([m[0] for m in res.minima])
    assert len(found) == len(ref) == 3
    assert np.max(np.abs(found - ref)) < 1e-6


def test_scan_grid_refines_near_thresholds():
    p = SystemParams(B=0.0)
    Es = ex.scan_grid((6.0, 8.0), p, 0.01, n_max=10)
    h = np.diff(Es)
    assert Es[0] == 6.0 and Es[-1] == 8.0
    assert np.all(h > 0) and np.max(h) <= 0.01 + 1e-12
    near = np.abs(Es[:-1] - 7.0) < 0.01
    assert np.max(h[near]) < 1e-3


def test_zero_field_collocation_state_vanishes_on_walls():
    p = SystemParams(B=0.0)
    E = ex.separable_spectrum(p, 5.0)[2]
    stt = ex.eigenstate(E, p, ex.collocation_grid(E, p, 200), n_max=40)
    y = np.linspace(-3, 3, 121)
    X, Y = np.meshgrid(np.linspace(0, p.d, 51), y)
    mx = np.max(np.abs(stt(X, Y)))
    assert np.max(np.abs(stt(np.zeros_like(y), y))) < 1e-4 * mx
    assert np.max(np.abs(stt(np.full_like(y, p.d), y))) < 1e-4 * mx
    with pytest.raises(ex.NoEigenstateError):
        ex.eigenstate(E + 0.05, p, ex.collocation_grid(E, p, 200), n_max=40)


def test_zero_field_galerkin_spectrum_and_state():
    p = SystemParams(B=0.0)
    ref = ex.separable_spectrum(p, 30.0)
    sel = ref[(ref > 20) & (ref < 30)]
    g = ex.galerkin_spectrum(p, (20, 30), J=60, N=40, states=False)
    assert np.max(np.abs(g.energies - sel)) < 1e-6 * p.hbar * p.omega0
    # ground state: sin(pi x/d) chi_0(y)
    g0 = ex.galerkin_spectrum(p, (0.5, 1.1), J=30, N=10)
    assert len(g0.states) == 1
    s0 = g0.states[0]
    x = np.linspace(0, p.d, 41)
    y = np.linspace(-3, 3, 61)
    F = s0.on_grid(x, y)
    b = np.sqrt(p.mass * p.omega0 / p.hbar)
    ref = np.sqrt(2 / p.d) * np.sin(np.pi * x / p.d)[None, :] * (b ** 2 / np.pi) ** 0.25 * np.exp(-(b * y[:, None]) ** 2 / 2)
    phase = np.vdot(ref, F) / abs(np.vdot(ref, F))
    assert np.max(np.abs(F / phase - ref)) < 1e-6


def test_galerkin_energies_stable_under_basis_enlargement():
    p = SystemParams()
    a = ex.galerkin_spectrum(p, (20, 24), J=50, N=36, states=False).energies
    b = ex.galerkin_spectrum(p, (20, 24), J=60, N=44, states=False).energies
    assert len(a) == len(b)
    assert np.max(np.abs(a - b)) < 1e-5 * p.omega_c


def test_galerkin_parity_blocks():
    p = SystemParams()
    g = ex.galerkin_spectrum(p, (20, 22), J=50, N=36)
    for s in g.states[:4]:
        pr = parity_of_field(s, p, 41, 61, gauge="landau")
        assert pr.parity == s.parity and pr.residual < 1e-8


@pytest.mark.slow
def test_benchmark_scar_state_hamiltonian_residual(bench):
    rep = bench.report
    E66 = rep.records[0].E_exact
    st_ = min(bench.exact, key=lambda s: abs(s.energy - E66))
    assert ex.hamiltonian_residual(st_) < 1e-5
    x = np.linspace(0, bench.params.d, 51)
    y = np.linspace(-8, 8, 161)
    F = st_.on_grid(x, y)
    assert np.max(np.abs(F[:, [0, -1]])) < 1e-4 * np.max(np.abs(F))
