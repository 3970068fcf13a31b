"""Linear stability: equations in variation along arcs, wall reflection
matrices, monodromy matrix, Floquet solutions and the focal-point census."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .classical import Arc, PeriodicOrbit

RTOL = 2.5e-14
ATOL = 1e-16


class DegeneracyError(RuntimeError):
    pass


@dataclass
class VariationPair:
    """Solution (z, p) of z' = p/a, p' = -a d z sampled on ``s``."""

    s: np.ndarray
    z: np.ndarray
    p: np.ndarray


def _coef_splines(arc: Arc):
    return CubicSpline(arc.s, arc.a), CubicSpline(arc.s, arc.dcoef)


def integrate_variation(arc: Arc, z0, p0, s_eval=None) -> VariationPair:
    """Integrate the Hamilton equations in variation along one arc.

    The coefficients a(s) and d(s) are interpolated with cubic splines from
    the arc samples.  Complex initial data are integrated as two real
    systems.
    """
    sa, sd = _coef_splines(arc)
    s_eval = arc.s if s_eval is None else s_eval
    z0 = complex(z0)
    p0 = complex(p0)

    def rhs(s, Y):
        a = sa(s)
        ad = a * sd(s)
        return [Y[1] / a, -ad * Y[0], Y[3] / a, -ad * Y[2]]

    sol = solve_ivp(rhs, (arc.s[0], arc.s[-1]), [z0.real, p0.real, z0.imag, p0.imag],
                    method="DOP853", rtol=RTOL, atol=ATOL, t_eval=s_eval)
    z = sol.y[0] + 1j * sol.y[2]
    p = sol.y[1] + 1j * sol.y[3]
    return VariationPair(np.asarray(s_eval), z, p)


def fundamental_matrix(arc: Arc) -> np.ndarray:
    """2x2 map (z, p)(start) -> (z, p)(end) of one arc."""
    sa, sd = _coef_splines(arc)

    def rhs(s, Y):
        a = sa(s)
        ad = a * sd(s)
        return [Y[1] / a, -ad * Y[0], Y[3] / a, -ad * Y[2]]

    sol = solve_ivp(rhs, (arc.s[0], arc.s[-1]), [1.0, 0.0, 0.0, 1.0], method="DOP853",
                    rtol=RTOL, atol=ATOL)
    y = sol.y[:, -1]
    return np.array([[y[0], y[2]], [y[1], y[3]]])


def reflection_matrix(theta: float, omega_c: float) -> np.ndarray:
    """Jump of (z, p) at a specular wall bounce,
    [[-1, 0], [-2 omega_c tan(theta), -1]].

    ``omega_c`` is used with its sign (charge*B/m for unit mass); in general
    units pass charge*B so that the jump carries momentum per length.
    """
    if not abs(theta) < np.pi / 2 - 1e-12:
        raise ValueError("grazing incidence: |theta| must be below pi/2")
    return np.array([[-1.0, 0.0], [-2.0 * omega_c * np.tan(theta), -1.0]])


@dataclass
class MonodromyData:
    M: np.ndarray
    trace: float
    eigenvalues: np.ndarray
    classification: str
    lam: float = 0.0
    phi: float = 0.0
    lambda_T: float = 0.0
    period: float = np.nan
    arc_matrices: tuple = ()

    @property
    def Lambda(self):
        return float(np.max(np.abs(self.eigenvalues)))


def classify_matrix(M, period: float = np.nan, marginal_tol: float = 1e-6) -> MonodromyData:
    M = np.asarray(M, float)
    tr = float(np.trace(M))
    ev = np.linalg.eigvals(M)
    if abs(abs(tr) - 2) <= marginal_tol:
        cls = "marginal"
        lam = 0.0
        phi = 0.0 if tr > 0 else np.pi
    elif abs(tr) > 2:
        cls = "unstable"
        lam = float(np.log(np.max(np.abs(ev))))
        phi = 0.0 if tr > 0 else np.pi
    else:
        cls = "stable"
        lam = 0.0
        phi = float(np.arccos(tr / 2) % (2 * np.pi))
    lt = lam / period if np.isfinite(period) and period > 0 else np.nan
    return MonodromyData(M, tr, ev, cls, lam, phi, lt, period)


def monodromy_classify(orbit_or_matrix, eB: float | None = None,
                       marginal_tol: float = 1e-6) -> MonodromyData:
    """Monodromy M = R M2 R M1 of a two-bounce orbit and its classification.

    Accepts either a :class:`PeriodicOrbit` (then ``eB`` = charge*B is
    required) or a ready 2x2 matrix.
    """
    if not isinstance(orbit_or_matrix, PeriodicOrbit):
        return classify_matrix(orbit_or_matrix, marginal_tol=marginal_tol)
    orbit = orbit_or_matrix
    if eB is None:
        raise ValueError("eB is required for an orbit")
    mats = [fundamental_matrix(a) for a in orbit.arcs]
    M = np.eye(2)
    for Mi, refl in zip(mats, orbit.reflections):
        M = reflection_matrix(refl.theta, eB) @ Mi @ M
    out = classify_matrix(M, orbit.period, marginal_tol)
    out.arc_matrices = tuple(mats)
    return out


@dataclass
class FocalPoint:
    arc: int
    s: float
    position: tuple


@dataclass
class FocalCensus:
    points: list

    @property
    def alpha(self) -> int:
        return len(self.points)


@dataclass
class FloquetData:
    """Periodic solutions of the equations in variation on every arc.

    For an unstable orbit ``z`` grows and ``zb`` decays by the factor Lambda
    per period; both are real and normalized so that w = p zb - pb z = 1.
    For a stable orbit zb = conj(z) and the pair is scaled to w = i.
    """

    pairs: list      # per arc: VariationPair for z
    pairs_bar: list  # per arc: VariationPair for zb
    w: complex
    census: FocalCensus
    mono: MonodromyData

    def Gamma(self, i):
        return self.pairs[i].p / self.pairs[i].z

    def Gamma_bar(self, i):
        return self.pairs_bar[i].p / self.pairs_bar[i].z

    def wronskian(self, i):
        P, Q = self.pairs[i], self.pairs_bar[i]
        return P.p * Q.z - Q.p * P.z


def _dense_pair(arc: Arc, z0, p0):
    sa, sd = _coef_splines(arc)

    def rhs(s, Y):
        a = sa(s)
        ad = a * sd(s)
        return [Y[1] / a, -ad * Y[0], Y[3] / a, -ad * Y[2]]

    return solve_ivp(rhs, (arc.s[0], arc.s[-1]), [z0.real, p0.real, z0.imag, p0.imag],
                     method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True)


def focal_census(orbit: PeriodicOrbit, pairs, pairs_bar, dense=None) -> FocalCensus:
    """Zeros of the real function z*zb along one period (sign changes on the
    sample grid refined by root bracketing on the dense solutions)."""
    pts = []
    for i, (arc, P, Q) in enumerate(zip(orbit.arcs, pairs, pairs_bar)):
        f = np.real(P.z * Q.z)
        idx = np.nonzero(np.sign(f[1:]) * np.sign(f[:-1]) < 0)[0]
        for k in idx:
            if dense is not None:
                dz, dzb = dense[i]

                def g(s):
                    u, v = dz.sol(s), dzb.sol(s)
                    return float(np.real((u[0] + 1j * u[2]) * (v[0] + 1j * v[2])))
                s0 = brentq(g, arc.s[k], arc.s[k + 1], xtol=1e-13)
            else:
                s0 = arc.s[k] - f[k] * (arc.s[k + 1] - arc.s[k]) / (f[k + 1] - f[k])
            x = float(np.interp(s0, arc.s, arc.r[:, 0]))
            y = float(np.interp(s0, arc.s, arc.r[:, 1]))
            if arc.dense is not None:
                st = arc.dense(s0)
                x, y = float(st[0]), float(st[1])
            pts.append(FocalPoint(i, float(s0), (x, y)))
    return FocalCensus(pts)


def periodic_solutions(orbit: PeriodicOrbit, mono: MonodromyData, eB: float) -> FloquetData:
    """Floquet solutions started just after the bounce at (0, 0).

    Unstable: eigenvectors of M for Lambda_+ (z) and Lambda_- (zb), real,
    scaled to w = 1.  Stable: the complex eigenvector with Im Gamma > 0 and
    zb = conj(z), scaled to w = i.
    """
    M = mono.M
    if mono.classification == "marginal":
        raise DegeneracyError("marginal orbit: Floquet eigenvectors are degenerate")
    ev, V = np.linalg.eig(M)
    if mono.classification == "unstable":
        order = np.argsort(-np.abs(ev))
        v1 = np.real(V[:, order[0]])
        v2 = np.real(V[:, order[1]])
        w = v1[1] * v2[0] - v2[1] * v1[0]
        if abs(w) < 1e-14:
            raise DegeneracyError("Floquet eigenvectors are parallel")
        # normalize to w = 1, keeping z(0) of the growing solution positive
        if v1[0] < 0:
            v1 = -v1
            w = -w
        v2 = v2 / w
        w = 1.0
        z0, zb0 = complex(v1[0]), complex(v2[0])
        p0, pb0 = complex(v1[1]), complex(v2[1])
    else:
        # choose the eigenvector with Im(p/z) > 0
        for k in range(2):
            v = V[:, k]
            if np.imag(v[1] / v[0]) > 0:
                break
        vb = np.conj(v)
        w = v[1] * vb[0] - vb[1] * v[0]
        scale = np.sqrt(1j / w)
        v = v * scale
        vb = np.conj(v)
        w = v[1] * vb[0] - vb[1] * v[0]
        z0, p0, zb0, pb0 = v[0], v[1], vb[0], vb[1]
    pairs, pairs_bar, dense = [], [], []
    for i, arc in enumerate(orbit.arcs):
        d1 = _dense_pair(arc, complex(z0), complex(p0))
        d2 = _dense_pair(arc, complex(zb0), complex(pb0))
        y1, y2 = d1.sol(arc.s), d2.sol(arc.s)
        pairs.append(VariationPair(arc.s, y1[0] + 1j * y1[2], y1[1] + 1j * y1[3]))
        pairs_bar.append(VariationPair(arc.s, y2[0] + 1j * y2[2], y2[1] + 1j * y2[3]))
        dense.append((d1, d2))
        R = reflection_matrix(orbit.reflections[i].theta, eB)
        z0, p0 = R @ np.array([y1[0, -1] + 1j * y1[2, -1], y1[1, -1] + 1j * y1[3, -1]])
        zb0, pb0 = R @ np.array([y2[0, -1] + 1j * y2[2, -1], y2[1, -1] + 1j * y2[3, -1]])
    census = focal_census(orbit, pairs, pairs_bar, dense)
    return FloquetData(pairs, pairs_bar, complex(w), census, mono)
