import numpy as np
import pytest
from hypothesis import given, strategies as st

from ablscar.classical import synthetic_arc
from ablscar.variation import (integrate_variation, fundamental_matrix, reflection_matrix,
                               classify_matrix, monodromy_classify)
from ablscar.acceptance import focal_census_check


def test_constant_coefficient_oscillator():
    a, dd = 2.0, 0.7
    arc = synthetic_arc(5.0, a, dd)
    P = integrate_variation(arc, 1.0, 0.0)
    k = np.sqrt(dd)
    assert np.allclose(P.z, np.cos(k * arc.s), atol=1e-9)
    assert np.allclose(P.p, -a * k * np.sin(k * arc.s), atol=1e-9)


def test_constant_coefficient_growing_solution():
    a, kap = 1.5, 0.8
    arc = synthetic_arc(3.0, a, -kap ** 2)
    P = integrate_variation(arc, 1.0, a * kap)
    assert np.allclose(P.z, np.exp(kap * arc.s), rtol=1e-9)


@given(st.floats(0.3, 3), st.floats(-2, 2), st.complex_numbers(max_magnitude=2),
       st.complex_numbers(max_magnitude=2))
def test_wronskian_constant_on_synthetic_arc(a, dd, z0, p0):
    arc = synthetic_arc(4.0, a, dd, n_samples=201)
    P = integrate_variation(arc, 1.0, 0.0)
    Q = integrate_variation(arc, 0.0, 1.0)
    w = P.p * Q.z - Q.p * P.z
    assert np.max(np.abs(w - w[0])) < 1e-9 * abs(w[0])


def test_fundamental_matrix_unimodular(bell):
    for arc in bell.arcs:
        assert np.linalg.det(fundamental_matrix(arc)) == pytest.approx(1.0, abs=1e-8)


def test_reflection_matrix_examples():
    assert np.array_equal(reflection_matrix(0.0, 0.7), -np.eye(2))
    assert np.allclose(reflection_matrix(np.pi / 4, 1.0), [[-1, 0], [-2, -1]])
    with pytest.raises(ValueError):
        reflection_matrix(np.pi / 2, 1.0)


@given(st.floats(-1.4, 1.4), st.floats(-3, 3), st.floats(0.1, 3), st.floats(-3, 3))
def test_reflection_unimodular_and_gamma_jump(theta, wc, z, p):
    R = reflection_matrix(theta, wc)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
    z2, p2 = R @ [z, p]
    assert p2 / z2 - p / z == pytest.approx(2 * wc * np.tan(theta), rel=1e-9, abs=1e-9)


def test_zero_field_reflection_squares_to_identity():
    R = reflection_matrix(0.3, 0.0)
    assert np.allclose(R @ R, np.eye(2))


def test_classify_examples():
    m = classify_matrix([[3, 1], [2, 1]])
    assert m.classification == "unstable"
    assert m.Lambda == pytest.approx(2 + np.sqrt(3))
    assert m.lam == pytest.approx(np.log(2 + np.sqrt(3)), abs=1e-12)
    r = classify_matrix([[0, 1], [-1, 0]])
    assert r.classification == "stable" and r.phi == pytest.approx(np.pi / 2)
    assert classify_matrix(np.eye(2)).classification == "marginal"


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.2, 5))
def test_classification_follows_trace(b, c, a):
    # any unimodular matrix [[a, b], [c, (1 + b c)/a]]
    M = np.array([[a, b], [c, (1 + b * c) / a]])
    m = classify_matrix(M)
    tr = np.trace(M)
    if abs(abs(tr) - 2) > 1e-5:
        assert (m.classification == "unstable") == (abs(tr) > 2)
    if m.classification == "unstable":
        ev = np.sort(np.abs(m.eigenvalues))
        assert ev[0] * ev[1] == pytest.approx(1.0, rel=1e-8)
        assert m.lam > 0


def test_benchmark_monodromy(mono):
    assert np.linalg.det(mono.M) == pytest.approx(1.0, abs=1e-8)
    assert mono.classification == "unstable"
    # frozen from an independent run (E = 92.55)
    assert mono.Lambda == pytest.approx(5.08, abs=0.02)


def test_monodromy_trace_matches_bounce_map_jacobian(bell, params, mono):
    # independent oracle: the Jacobian of the full nonlinear bounce map
    # (y, p_y) -> (y', p_y') at the orbit's fixed point, by central
    # differences of integrated trajectories, is conjugate to M
    from ablscar.classical import poincare_section
    y0, p0 = bell.birkhoff(params)
    f = lambda y, q: poincare_section(bell.energy, params, [(y, q)], 1)[0][1]
    h = 1e-5
    J = np.column_stack([(f(y0 + h, p0) - f(y0 - h, p0)) / (2 * h),
                         (f(y0, p0 + h) - f(y0, p0 - h)) / (2 * h)])
    assert np.trace(J) == pytest.approx(mono.trace, abs=1e-5)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-6)


def test_monodromy_cyclic_invariance(bell, params, mono):
    M1, M2 = mono.arc_matrices
    R0 = reflection_matrix(bell.reflections[0].theta, params.eB)
    R1 = reflection_matrix(bell.reflections[1].theta, params.eB)
    shifted = R0 @ M1 @ R1 @ M2
    assert np.trace(shifted) == pytest.approx(mono.trace, abs=1e-7)


def test_floquet_solutions(bell, params, mono, floquet):
    # Gamma - Gamma_bar = w / (z zb)
    P, Q = floquet.pairs[0], floquet.pairs_bar[0]
    far = np.abs(P.z * Q.z) > 1e-2
    lhs = (floquet.Gamma(0) - floquet.Gamma_bar(0))[far]
    assert np.allclose(lhs, (floquet.w / (P.z * Q.z))[far], rtol=1e-9)
    # Wronskian constant along every arc
    for i in range(2):
        w = floquet.wronskian(i)
        assert np.max(np.abs(w - floquet.w)) < 1e-9 * abs(floquet.w)
    # one period maps the growing solution to Lambda times itself
    R1 = reflection_matrix(bell.reflections[1].theta, params.eB)
    P1 = floquet.pairs[1]
    end = R1 @ np.array([P1.z[-1], P1.p[-1]])
    start = np.array([P.z[0], P.p[0]])
    assert np.allclose(end, mono.Lambda * start, rtol=1e-6)


def test_focal_census(floquet, params):
    assert floquet.census.alpha == 8
    ok, vals = focal_census_check(floquet.census, params.d)
    assert ok, vals


def test_marginal_orbit_rejected_without_eB(bell):
    with pytest.raises(ValueError):
        monodromy_classify(bell)
