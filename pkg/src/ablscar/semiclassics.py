"""Semiclassical layer: actions and flux, Bohr-Sommerfeld quantization for
unstable and stable orbits, boundary-layer mode functions, the separatrix
wavefunction, field assembly in the strip with the mirror method, Ehrenfest
diagnostics, transverse current and the boundary-layer PDE residual.

Conventions
-----------
* The transverse coordinate is n = sqrt(hbar) nu along e_n (e_t rotated by
  +90 degrees).
* Mode functions are returned as psi = a^{-1/2} phi where phi solves
  i phi_s + phi_nunu/(2a) - (a d/2) nu^2 phi = 0.
* Phases S0, S1 use the symmetric gauge A = B(-y, x)/2.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .model import SystemParams, vector_potential_symmetric, InputError
from .classical import PeriodicOrbit, find_bell_orbit, default_bell_bracket, OrbitNotFoundError
from .variation import (monodromy_classify, periodic_solutions, FloquetData, MonodromyData,
                        FocalCensus)
from . import specfun


class QuantizationError(RuntimeError):
    pass


class BifurcationWarning(UserWarning):
    pass


class SingularityError(RuntimeError):
    pass


class DiagnosticsError(ValueError):
    pass


# ------------------------------------------------------------ actions

@dataclass
class ActionData:
    loop_action: float
    flux: float
    alpha: int
    S0: list            # per arc, sampled on arc.s (continuous along the loop)
    S1: list            # per arc
    dS0: list           # per arc, a + e A.e_t

    @property
    def total(self):
        return self.loop_action + self.flux


def action_and_flux(orbit: PeriodicOrbit, params: SystemParams,
                    census: Optional[FocalCensus] = None) -> ActionData:
    """Loop action, enclosed flux and the phase functions S0(s), S1(s)."""
    end = orbit.arcs[-1].r[-1]
    start = orbit.arcs[0].r[0]
    if np.hypot(*(end - start)) > 1e-6 * params.d:
        raise InputError("orbit is not closed")
    loop = 0.0
    S0, S1, dS = [], [], []
    offset = 0.0
    e = params.charge
    for arc in orbit.arcs:
        loop += simpson(arc.a, x=arc.s)
        Ax, Ay = vector_potential_symmetric(arc.r[:, 0], arc.r[:, 1], params)
        g = arc.a + e * (Ax * arc.e_t[:, 0] + Ay * arc.e_t[:, 1])
        s0 = offset + _cumulative_simpson(g, arc.s)
        S0.append(s0)
        dS.append(g)
        S1.append(e * (Ax * arc.e_n[:, 0] + Ay * arc.e_n[:, 1]))
        offset = s0[-1]
    flux = params.eB * orbit.area
    alpha = census.alpha if census is not None else -1
    return ActionData(float(loop), float(flux), alpha, S0, S1, dS)


def _cumulative_simpson(f, x):
    """Cumulative integral with a cubic spline (fourth-order accurate)."""
    cs = CubicSpline(x, f)
    return cs.antiderivative()(x) - cs.antiderivative()(x[0])


# ------------------------------------------------------- orbit families

@dataclass
class FamilyPoint:
    """What the quantization conditions need at one energy."""

    E: float
    action: float                    # loop action + flux
    lam: float = 0.0                 # Lyapunov exponent per period (unstable)
    phi: float = 0.0                 # Floquet phase (stable)
    alpha: int = 0
    orbit: Optional[PeriodicOrbit] = None
    mono: Optional[MonodromyData] = None
    floquet: Optional[FloquetData] = None
    actions: Optional[ActionData] = None


class BellOrbitFamily:
    """Provider E -> FamilyPoint for the bell-shaped orbit, with launch-angle
    continuation between nearby energies and a small cache."""

    def __init__(self, params: SystemParams, n_samples: int = 2001):
        self.params = params
        self.n_samples = n_samples
        self._cache = {}
        self._angles = {}

    def _bracket(self, E):
        if self._angles:
            Ek = min(self._angles, key=lambda k: abs(k - E))
            th = self._angles[Ek]
            width = 0.02 + 0.02 * abs(E - Ek)
            return th - width, th + width
        return default_bell_bracket(E, self.params)

    def orbit(self, E) -> PeriodicOrbit:
        try:
            o = find_bell_orbit(E, self.params, self._bracket(E), self.n_samples)
        except OrbitNotFoundError:
            o = find_bell_orbit(E, self.params, None, self.n_samples)
        self._angles[E] = o.launch_angle
        return o

    def __call__(self, E: float) -> FamilyPoint:
        key = round(float(E), 13)
        if key in self._cache:
            return self._cache[key]
        p = self.params
        o = self.orbit(E)
        mono = monodromy_classify(o, p.eB)
        flo = periodic_solutions(o, mono, p.eB)
        act = action_and_flux(o, p, flo.census)
        fp = FamilyPoint(E, act.total, mono.lam, mono.phi, flo.census.alpha, o, mono, flo, act)
        self._cache[key] = fp
        return fp


def linear_family(c: float, alpha: int = 8, lam: float = 0.0, phi: float = 0.0):
    """Synthetic family with action + flux = c E (for checks)."""
    return lambda E: FamilyPoint(E, c * E, lam, phi, alpha)


# ------------------------------------------------------- quantization

def _solve(F, bracket, family, hbar, tol):
    lo, hi = bracket
    flo, fhi = F(lo), F(hi)
    if flo * fhi > 0:
        raise QuantizationError(f"no root of the quantization condition in [{lo}, {hi}]")
    E = brentq(F, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    if abs(F(E)) > tol * hbar * 1e3:
        raise QuantizationError("quantization root not converged")
    return E


def _default_bracket(F_lin, E_guess, width):
    return E_guess - width, E_guess + width


def quantization_residual(E, n, eta, family, hbar, sign=+1):
    fp = family(E)
    return fp.action - hbar * (2 * np.pi * n + sign * eta * fp.lam + np.pi * fp.alpha / 2)


def _guess_energy(target_fn, family, E0):
    """Secant-style guess from two family evaluations around E0."""
    f0 = target_fn(E0)
    f1 = target_fn(E0 + 1.0)
    slope = f1 - f0
    return E0 - f0 / slope, abs(slope)


def quantize_unstable(n: int, eta: float = 0.0, params: SystemParams = None,
                      family: Callable = None, bracket=None, E_start: float = 92.0,
                      sign: int = +1, tol: float = 1e-9) -> "ABLState":
    """Solve action + flux = hbar (2 pi n + sign*eta*lambda + pi alpha/2) for E.

    The orbit, lambda and alpha are recomputed at every trial energy.  The
    Maslov index is checked at the bracket ends; a change signals an orbit
    bifurcation inside the bracket.
    """
    params = params or SystemParams()
    family = family or BellOrbitFamily(params)
    hb = params.hbar
    F = lambda E: quantization_residual(E, n, eta, family, hb, sign)
    if bracket is None:
        Eg, slope = _guess_energy(F, family, E_start)
        Eg2, _ = _guess_energy(F, family, Eg)
        step = min(0.25 * 2 * np.pi * hb / max(slope, 1e-12), 1.0)
        bracket = (Eg2 - step, Eg2 + step)
    a_lo, a_hi = family(bracket[0]).alpha, family(bracket[1]).alpha
    if a_lo != a_hi:
        warnings.warn("Maslov index changes across the bracket", BifurcationWarning)
        raise QuantizationError("Maslov index changes inside the bracket (bifurcation)")
    _check_monotone(F, bracket)
    E = _solve(F, bracket, family, hb, tol)
    fp = family(E)
    return ABLState(n=n, eta=eta, m=None, E=E, point=fp, params=params,
                    residual=F(E))


def quantize_stable(n: int, m: int, params: SystemParams = None, family: Callable = None,
                    bracket=None, E_start: float = 92.0, tol: float = 1e-9) -> "ABLState":
    """Solve action + flux = hbar (2 pi n + (m + 1/2) phi) for E."""
    params = params or SystemParams()
    if family is None:
        raise InputError("a stable orbit family provider is required")
    hb = params.hbar

    def F(E):
        fp = family(E)
        return fp.action - hb * (2 * np.pi * n + (m + 0.5) * fp.phi)
    if bracket is None:
        Eg, slope = _guess_energy(F, family, E_start)
        step = min(0.25 * 2 * np.pi * hb / max(slope, 1e-12), 1.0)
        bracket = (Eg - step, Eg + step)
    _check_monotone(F, bracket)
    E = _solve(F, bracket, family, hb, tol)
    return ABLState(n=n, eta=None, m=m, E=E, point=family(E), params=params, residual=F(E))


def _check_monotone(F, bracket, k=3):
    Es = np.linspace(bracket[0], bracket[1], k)
    vals = np.array([F(E) for E in Es])
    d = np.diff(vals)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise QuantizationError("quantization function is not monotone on the bracket")


# ------------------------------------------------------ mode functions

def _unwrapped_log(v, axis=0):
    """log(v) with the imaginary part unwrapped along ``axis``."""
    v = np.asarray(v, complex)
    ang = np.unwrap(np.angle(v), axis=axis)
    return np.log(np.abs(v)) + 1j * ang


def abl_mode(nu, xi, z, zb, p, pb, w, a):
    """General boundary-layer mode (psi = a^{-1/2} phi) on an (s, nu) grid:

        psi = exp(i (G + Gb) nu^2 / 4) / sqrt(a z) * (zb/z)^(xi/2)
              * D_xi( sqrt(w / (i z zb)) nu ),

    with G = p/z, Gb = pb/zb.  ``z, zb, p, pb, a`` are 1-D arrays along s;
    powers and square roots follow the branch that is continuous in s,
    starting from the principal branch at the first sample.
    Returns an array of shape (len(s), len(nu)).
    """
    z, zb, p, pb, a = (np.atleast_1d(np.asarray(q, complex)) for q in (z, zb, p, pb, a))
    nu = np.atleast_1d(np.asarray(nu, float))
    if np.any(np.abs(z) < 1e-10) or np.any(np.abs(zb) < 1e-10):
        raise SingularityError("abl_mode evaluated at a focal point")
    G = p / z
    Gb = pb / zb
    lz = _unwrapped_log(z)
    lr = _unwrapped_log(zb / z)
    lc = _unwrapped_log(w / (1j * z * zb))
    pref = np.exp(-0.5 * (np.log(a) + lz) + 0.5 * xi * lr)
    c = np.exp(0.5 * lc)
    arg = c[:, None] * nu[None, :]
    D = specfun.parabolic_cylinder_d(xi, arg)
    return pref[:, None] * D * np.exp(0.25j * (G + Gb)[:, None] * nu[None, :] ** 2)


def hermite_mode(nu, m, z, zb, p, pb, w, a):
    """Integer-index mode in Hermite form (times a^{-1/2}):

        psi_m = a^{-1/2} zb^m (G - Gb)^{m/2} / sqrt(z)
                * H_m( sqrt((G - Gb)/(2i)) nu ) exp(i G nu^2 / 2).

    Branches are continuous in s like in :func:`abl_mode`.
    """
    z, zb, p, pb, a = (np.atleast_1d(np.asarray(q, complex)) for q in (z, zb, p, pb, a))
    nu = np.atleast_1d(np.asarray(nu, float))
    G = p / z
    Gb = pb / zb
    dG = G - Gb
    ldG = _unwrapped_log(dG)
    pref = np.exp(m * _unwrapped_log(zb) + 0.5 * m * ldG - 0.5 * _unwrapped_log(z)
                  - 0.5 * np.log(a))
    c = np.exp(0.5 * _unwrapped_log(dG / 2j))
    H = specfun.hermite(m, c[:, None] * nu[None, :])
    return pref[:, None] * H * np.exp(0.5j * G[:, None] * nu[None, :] ** 2)


def separatrix_kernel(nu, zz, w=1.0):
    """Real even transverse kernel sqrt(|nu/(z zb)|) J_{-1/4}(|w nu^2/(4 z zb)|),
    written through x^{1/4} J_{-1/4}(x) so that nu = 0 is regular."""
    zz = np.asarray(zz, float)
    nu = np.asarray(nu, float)
    X = np.abs(w * nu ** 2 / (4 * zz))
    return (4.0 * np.abs(zz / w)) ** 0.25 / np.sqrt(np.abs(zz)) * specfun.x14_j_m14(X)


def separatrix_wavefunction(nu, z, zb, p, pb, w, a, n_focal=0):
    """Separatrix (eta = 0) state psi = a^{-1/2} phi on an (s, nu) grid,

        phi = sqrt(|nu/(z zb)|) J_{-1/4}(|w nu^2/(4 z zb)|)
              * exp(i (G + Gb) nu^2 / 4) * exp(-i pi N_f / 4),

    where ``n_focal`` (scalar or array along s) counts the focal points
    passed since the start of the loop.  Each passage through a zero of
    z zb contributes the factor exp(-i pi/4), which makes the solution of the
    boundary-layer equation continuous through the focal point; with eight
    focal points per period the factors multiply to 1 after one loop.
    """
    z, zb, p, pb, a = (np.atleast_1d(np.asarray(q, complex)) for q in (z, zb, p, pb, a))
    nu = np.atleast_1d(np.asarray(nu, float))
    zz = np.real(z * zb)
    if np.any(np.abs(zz) < 1e-12):
        raise SingularityError("separatrix evaluated at a focal point")
    G = p / z
    Gb = pb / zb
    ker = separatrix_kernel(nu[None, :], zz[:, None], np.real(w))
    nf = np.broadcast_to(np.asarray(n_focal, float), zz.shape)
    ph = np.exp(0.25j * (G + Gb)[:, None] * nu[None, :] ** 2 - 0.25j * np.pi * nf[:, None])
    return ker * ph / np.sqrt(np.real(a))[:, None]


# --------------------------------------------------------- loop data

@dataclass
class LoopData:
    """Everything needed to evaluate a boundary-layer state along the orbit,
    as cubic splines in the arc parameter of each arc."""

    orbit: PeriodicOrbit
    floquet: FloquetData
    actions: ActionData
    params: SystemParams
    focal_s: list = field(default_factory=list)   # per arc: sorted focal s
    n_focal_before: list = field(default_factory=list)  # per arc: count before arc start

    def __post_init__(self):
        self._spl = []
        count = 0
        for i, arc in enumerate(self.orbit.arcs):
            P, Q = self.floquet.pairs[i], self.floquet.pairs_bar[i]
            sp = {
                "z": CubicSpline(arc.s, P.z), "p": CubicSpline(arc.s, P.p),
                "zb": CubicSpline(arc.s, Q.z), "pb": CubicSpline(arc.s, Q.p),
                "a": CubicSpline(arc.s, arc.a), "d": CubicSpline(arc.s, arc.dcoef),
                "S0": CubicSpline(arc.s, self.actions.S0[i]),
                "S1": CubicSpline(arc.s, self.actions.S1[i]),
            }
            self._spl.append(sp)
            fs = sorted(f.s for f in self.floquet.census.points if f.arc == i)
            self.focal_s.append(np.array(fs))
            self.n_focal_before.append(count)
            count += len(fs)

    def eval(self, i, key, s):
        return self._spl[i][key](s)

    def n_focal(self, i, s):
        return self.n_focal_before[i] + np.searchsorted(self.focal_s[i], np.asarray(s))

    def focal_distance(self, i, s):
        fs = self.focal_s[i]
        s = np.asarray(s, float)
        if len(fs) == 0:
            return np.full(s.shape, np.inf)
        return np.min(np.abs(s[..., None] - fs), axis=-1)

    @property
    def length(self):
        return self.orbit.length


def loop_data(state_or_point, params: SystemParams) -> LoopData:
    fp = state_or_point.point if isinstance(state_or_point, ABLState) else state_or_point
    return LoopData(fp.orbit, fp.floquet, fp.actions, params)


# ----------------------------------------------------------- ABL state

@dataclass
class ABLState:
    n: int
    eta: Optional[float]
    m: Optional[int]
    E: float
    point: FamilyPoint
    params: SystemParams
    residual: float = 0.0
    nu_max: float = None
    focal_mask: float = 0.01   # masked arclength half-width, fraction of orbit length
    _loop: Optional[LoopData] = None

    def __post_init__(self):
        if self.nu_max is None:
            self.nu_max = 0.15 * self.params.d / np.sqrt(self.params.hbar)

    @property
    def loop(self) -> LoopData:
        if self._loop is None:
            self._loop = LoopData(self.point.orbit, self.point.floquet, self.point.actions,
                                  self.params)
        return self._loop

    def transverse(self, i, s, nu):
        """Boundary-layer factor psi(s, nu) on arc i (separatrix for eta = 0,
        general parabolic-cylinder mode otherwise)."""
        L = self.loop
        z, zb = L.eval(i, "z", s), L.eval(i, "zb", s)
        p, pb = L.eval(i, "p", s), L.eval(i, "pb", s)
        a = L.eval(i, "a", s)
        w = self.point.floquet.w
        if self.eta is None or self.eta == 0:
            return separatrix_wavefunction(nu, z, zb, p, pb, w, a, L.n_focal(i, s))
        xi = -0.5 + 1j * self.eta
        return abl_mode(nu, xi, z, zb, p, pb, w, a)

    def __call__(self, x, y):
        return assemble_field(self, np.asarray(x, float), np.asarray(y, float))


def _taper(nu, nu_max, frac=0.1):
    a = np.abs(nu)
    t = np.ones_like(a)
    edge = (1 - frac) * nu_max
    mid = (a > edge) & (a < nu_max)
    t[mid] = 0.5 * (1 + np.cos(np.pi * (a[mid] - edge) / (frac * nu_max)))
    t[a >= nu_max] = 0.0
    return t


def _arc_frame(arc, s):
    """Base point, unit tangent and curvature at arclength ``s`` (clipped)."""
    sc = np.clip(s, 0.0, arc.s[-1])
    if arc.dense is not None:
        st = arc.dense(sc)
        r0 = st[:2].T
        v = st[2:4].T
        et = v / np.hypot(v[:, 0], v[:, 1])[:, None]
    else:
        r0 = np.stack([np.interp(sc, arc.s, arc.r[:, 0]), np.interp(sc, arc.s, arc.r[:, 1])], -1)
        et = np.stack([np.interp(sc, arc.s, arc.e_t[:, 0]), np.interp(sc, arc.s, arc.e_t[:, 1])], -1)
        et = et / np.hypot(et[:, 0], et[:, 1])[:, None]
    return r0, et, np.interp(sc, arc.s, arc.kappa)


def _newton_project(arc, pts, s, newton_steps=6, xi_min=0.5):
    s = np.asarray(s, float).copy()
    L = arc.s[-1]
    for _ in range(newton_steps):
        r0, et, kap = _arc_frame(arc, s)
        dv = pts - r0
        t = np.einsum("ij,ij->i", dv, et)
        nn = dv[:, 0] * (-et[:, 1]) + dv[:, 1] * et[:, 0]
        xi = 1.0 - nn * kap
        xi = np.where(np.abs(xi) < 0.2, np.where(xi < 0, -0.2, 0.2), xi)
        s = s + t / xi
    r0, et, kap = _arc_frame(arc, s)
    dv = pts - r0
    nn = dv[:, 0] * (-et[:, 1]) + dv[:, 1] * et[:, 0]
    tres = np.einsum("ij,ij->i", dv, et)
    inside = (s >= 0) & (s <= L) & (np.abs(tres) < 1e-6 * (1 + np.abs(nn)))
    inside &= (1.0 - nn * kap) >= xi_min
    return s, nn, inside


def project_to_arc(arc, pts, tree=None, newton_steps=6, xi_min=0.5):
    """Nearest-point curvilinear coordinates (s, n) of points on an arc.

    Initial guess from the nearest sample, refined by Newton steps
    ds = t / (1 - n kappa), with t, n the tangential/normal offsets.
    Points whose metric factor 1 - n kappa(s) falls below ``xi_min`` are
    flagged as outside: there the curvilinear coordinates are not unique
    (the layer reaches past the local centre of curvature, e.g. inside the
    apex of the bell orbit).
    """
    tree = tree or cKDTree(arc.r)
    _, idx = tree.query(pts)
    return _newton_project(arc, pts, arc.s[idx], newton_steps, xi_min)


def equidistant_branches(arc, pts, s1, n1, tree=None, rtol=1e-9, gap=10):
    """Second projection for points that are equidistant (within ``rtol``)
    from two separate parts of the same arc.  Returns (s2, n2, mask)."""
    tree = tree or cKDTree(arc.r)
    ds = arc.s[1] - arc.s[0]
    s2 = np.full(len(pts), np.nan)
    cand = np.zeros(len(pts), bool)
    dist = np.abs(n1)
    for k, nb in enumerate(tree.query_ball_point(pts, dist + 2 * ds)):
        if not nb:
            continue
        far = [j for j in nb if abs(arc.s[j] - s1[k]) > gap * ds]
        if far:
            j = max(far, key=lambda q: abs(arc.s[q] - s1[k]))
            s2[k] = arc.s[j]
            cand[k] = True
    n2 = np.full(len(pts), np.nan)
    mask = np.zeros(len(pts), bool)
    if np.any(cand):
        ss, nn, ok = _newton_project(arc, pts[cand], s2[cand])
        tie = ok & (np.abs(np.abs(nn) - dist[cand]) <= rtol * (1 + dist[cand]))
        tie &= np.abs(ss - s1[cand]) > gap * ds
        s2[cand], n2[cand] = ss, nn
        mask[np.nonzero(cand)[0][tie]] = True
    return s2, n2, mask


def _layer_values(state: ABLState, i, s, n, ok):
    L = state.loop
    hb = state.params.hbar
    nu = n / np.sqrt(hb)
    ok = ok & (np.abs(nu) < state.nu_max)
    ok &= L.focal_distance(i, s) > state.focal_mask * L.length
    out = np.zeros(len(s), complex)
    if not np.any(ok):
        return out
    so, nuo = s[ok], nu[ok]
    z, zb = L.eval(i, "z", so), L.eval(i, "zb", so)
    p, pb = L.eval(i, "p", so), L.eval(i, "pb", so)
    a = L.eval(i, "a", so)
    w = np.real(state.point.floquet.w)
    if state.eta is None or state.eta == 0:
        zz = np.real(z * zb)
        ker = separatrix_kernel(nuo, zz, w)
        ph = 0.25 * np.real(p / z + pb / zb) * nuo ** 2 - 0.25 * np.pi * L.n_focal(i, so)
        val = ker * np.exp(1j * ph) / np.sqrt(a)
    else:
        val = np.array([abl_mode(np.array([q]), -0.5 + 1j * state.eta, z[k], zb[k], p[k],
                                 pb[k], w, a[k])[0, 0] for k, q in enumerate(nuo)])
    phase = (L.eval(i, "S0", so) + L.eval(i, "S1", so) * n[ok]) / hb
    out[ok] = val * np.exp(1j * phase) * _taper(nuo, state.nu_max)
    return out


def _arc_contribution(state: ABLState, i, pts, tree):
    arc = state.point.orbit.arcs[i]
    s, n, inside = project_to_arc(arc, pts, tree)
    out = _layer_values(state, i, s, n, inside)
    near = inside & (np.abs(n) < state.nu_max * np.sqrt(state.params.hbar))
    if np.any(near):
        idx = np.nonzero(near)[0]
        s2, n2, tie = equidistant_branches(arc, pts[idx], s[idx], n[idx], tree)
        if np.any(tie):
            out[idx[tie]] += _layer_values(state, i, s2[tie], n2[tie], np.ones(tie.sum(), bool))
    return out


def assemble_field(state: ABLState, X, Y, r: float = -1.0, normalize: bool = True,
                   mirrors: bool = True):
    """Semiclassical field on points (X, Y) of the strip (symmetric gauge).

    Psi = psi_1 + r psi_2 from the two arcs, minus the mirror images across
    the walls x = 0 and x = d.  Points within the focal-point masks or
    beyond the boundary layer receive no contribution from that arc.
    """
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    shape = X.shape
    pts = np.stack([X.ravel(), Y.ravel()], -1)
    d = state.params.d
    inside = (pts[:, 0] >= 0) & (pts[:, 0] <= d)
    trees = [cKDTree(a.r) for a in state.point.orbit.arcs]
    weights = [1.0, r]
    total = np.zeros(len(pts), complex)
    ip = pts[inside]
    images = [ip]
    signs = [1.0]
    if mirrors:
        images += [np.stack([-ip[:, 0], ip[:, 1]], -1), np.stack([2 * d - ip[:, 0], ip[:, 1]], -1)]
        signs += [-1.0, -1.0]
    acc = np.zeros(len(ip), complex)
    for img, sg in zip(images, signs):
        for i in range(len(state.point.orbit.arcs)):
            acc += sg * weights[i] * _arc_contribution(state, i, img, trees[i])
    total[inside] = acc
    total = total.reshape(shape)
    if normalize:
        mx = np.max(np.abs(total))
        if mx > 0:
            total = total / mx
    return total


# ------------------------------------------------------ diagnostics

@dataclass
class ScarDiagnostics:
    N_ph: float
    t_Ehr: float
    T: float
    T_over_tEhr: float
    lambda_T: float
    delta_eta_estimate: float
    energy_window_halfwidth: float
    T_less_than_tEhr: bool


def ehrenfest_diagnostics(orbit: PeriodicOrbit, mono: MonodromyData, params: SystemParams,
                          floquet: Optional[FloquetData] = None, L: Optional[float] = None,
                          L_tr: Optional[float] = None) -> ScarDiagnostics:
    """Phase-space measure, Ehrenfest time, energy window and eta spacing."""
    if mono.classification != "unstable":
        raise DiagnosticsError("diagnostics require an unstable orbit")
    L = params.d if L is None else L
    L_tr = params.d if L_tr is None else L_tr
    Nph = L * np.sqrt(2 * params.mass * orbit.energy) / params.hbar
    if Nph <= 1:
        raise DiagnosticsError("N_ph <= 1: semiclassical diagnostics undefined")
    lamT = mono.lam / orbit.period
    tE = np.log(Nph) / lamT
    deta = np.nan
    if floquet is not None:
        num, den = 0.0, 0.0
        for i, arc in enumerate(orbit.arcs):
            dG = np.real(floquet.Gamma(i) - floquet.Gamma_bar(i))
            good = np.isfinite(dG) & (np.abs(dG) < 1e6)
            num += trapezoid(dG[good], arc.s[good]) if np.any(good) else 0.0
            den += arc.length
        mean_dG = num / den
        deta = float(np.log(L_tr * np.sqrt(abs(mean_dG) / (2 * params.hbar))))
    return ScarDiagnostics(float(Nph), float(tE), orbit.period, orbit.period / tE, float(lamT),
                           deta, 2 * np.pi * params.hbar / tE, bool(orbit.period < tE))


def diagnostics_from_lambda(lambda_T: float, N_ph: float, T: float = np.nan, hbar: float = 1.0):
    """Plain formula version: t_Ehr = ln(N_ph)/lambda_T."""
    if N_ph <= 1:
        raise DiagnosticsError("N_ph <= 1")
    tE = np.log(N_ph) / lambda_T
    return ScarDiagnostics(N_ph, tE, T, T / tE, lambda_T, np.nan, 2 * np.pi * hbar / tE,
                           bool(T < tE))


def transverse_current(psi, s, nu, a):
    """Probability current of a boundary-layer function on an (s, nu) grid.

    j_s = a |psi|^2, j_nu = (i/2)(psi d_nu psi* - psi* d_nu psi); the
    continuity residual d_s j_s + d_nu j_nu is formed by central differences
    (second order, one-sided at the edges).
    """
    psi = np.asarray(psi, complex)
    s = np.asarray(s, float)
    nu = np.asarray(nu, float)
    a = np.broadcast_to(np.asarray(a, float).reshape(-1, 1) if np.ndim(a) else a, psi.shape)
    dpsi = np.gradient(psi, nu, axis=1, edge_order=2)
    js = a * np.abs(psi) ** 2
    jn = np.real(0.5j * (psi * np.conj(dpsi) - np.conj(psi) * dpsi))
    res = np.gradient(js, s, axis=0, edge_order=2) + np.gradient(jn, nu, axis=1, edge_order=2)
    return js, jn, res


_D1 = np.array([1, -8, 0, 8, -1]) / 12.0
_D2 = np.array([-1, 16, -30, 16, -1]) / 12.0


def bl_residual(evaluator, a_fn, d_fn, s_grid, nu_grid):
    """Residual of i phi_s + phi_nunu/(2a) - (a d/2) nu^2 phi for phi = sqrt(a) psi.

    ``evaluator(s, nu)`` returns psi on the outer-product grid; ``a_fn`` and
    ``d_fn`` give a(s), d(s).  Derivatives are fourth-order central
    differences with the steps of the (uniform) grids; the residual is
    reported on the interior points, relative to max |phi|.
    Returns (max_residual, rms_residual).
    """
    s = np.asarray(s_grid, float)
    nu = np.asarray(nu_grid, float)
    hs = s[1] - s[0]
    hn = nu[1] - nu[0]
    ss = (s[:, None] + hs * np.arange(-2, 3)[None, :]).ravel()
    nn = (nu[:, None] + hn * np.arange(-2, 3)[None, :]).ravel()
    # phi on the extended stencils
    a_s = a_fn(ss)
    psi_s = evaluator(ss, nu) * np.sqrt(a_s)[:, None]          # (5 Ns, Nnu)
    psi_s = psi_s.reshape(len(s), 5, len(nu))
    a_c = a_fn(s)
    psi_n = evaluator(s, nn) * np.sqrt(a_c)[:, None]            # (Ns, 5 Nnu)
    psi_n = psi_n.reshape(len(s), len(nu), 5)
    phi = psi_s[:, 2, :]
    phis = np.einsum("k,ikj->ij", _D1, psi_s) / hs
    phinn = np.einsum("k,ijk->ij", _D2, psi_n) / hn ** 2
    dd = d_fn(s)
    R = 1j * phis + phinn / (2 * a_c[:, None]) - 0.5 * (a_c * dd)[:, None] * nu[None, :] ** 2 * phi
    scale = np.max(np.abs(phi))
    return float(np.max(np.abs(R)) / scale), float(np.sqrt(np.mean(np.abs(R) ** 2)) / scale)
