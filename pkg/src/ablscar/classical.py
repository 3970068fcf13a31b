"""Classical dynamics in the strip: Lorentz-force flow, specular wall
reflections, shooting for the bell-shaped periodic orbit, arclength-sampled
arc geometry, and Poincare sections in Birkhoff coordinates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp, simpson
from scipy.optimize import brentq

from .model import SystemParams, ParabolicPotential, InputError, jets_along

RTOL = 1e-12
ATOL = 1e-12


class IntegrationError(RuntimeError):
    pass


class OrbitNotFoundError(RuntimeError):
    pass


class DegenerateOrbitError(OrbitNotFoundError):
    pass


class UnsupportedOrbitError(RuntimeError):
    pass


@dataclass
class PhaseState:
    x: float
    y: float
    vx: float
    vy: float
    t: float = 0.0

    def as_array(self):
        return np.array([self.x, self.y, self.vx, self.vy])


@dataclass
class WallEvent:
    """A specular reflection.  ``theta`` is the angle of the outgoing velocity
    measured counterclockwise from the inward wall normal."""

    t: float
    x: float
    y: float
    vx_in: float
    vy: float
    wall: int  # 0 for x = 0, 1 for x = d
    theta: float


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    events: list
    segments: list = field(default_factory=list)  # (t0, t1, OdeSolution)
    start: Optional[PhaseState] = None


def _rhs_factory(params: SystemParams, potential):
    wc = params.omega_c_signed
    m = params.mass
    if potential is None:
        k = params.omega0 ** 2

        def rhs(t, s):
            return [s[2], s[3], wc * s[3], -k * s[1] - wc * s[2]]
    else:
        def rhs(t, s):
            g = potential.gradient(s[0], s[1])
            return [s[2], s[3], wc * s[3] - g[0] / m, -wc * s[2] - g[1] / m]
    return rhs


def energy(state, params: SystemParams, potential=None):
    s = np.asarray(state, float)
    pot = potential or ParabolicPotential(params)
    return 0.5 * params.mass * (s[..., 2] ** 2 + s[..., 3] ** 2) + pot.value(s[..., 0], s[..., 1])


def integrate_eom(state: PhaseState, params: SystemParams, dt: float,
                  stop: Optional[Callable[[WallEvent], bool]] = None,
                  t_max: float = 100.0, walls: bool = True, potential=None,
                  rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    """Integrate m dv/dt = -grad U + e v x B with specular reflections.

    Samples are taken every ``dt``.  Wall crossings are located by the event
    machinery of the integrator; at each one the normal velocity is flipped
    and ``stop(event)`` is consulted.  Without a ``stop`` predicate the
    integration ends at the first wall event (or at ``t_max``).  With
    ``walls=False`` the flow is free (no reflections).
    """
    if not dt > 0:
        raise InputError("dt must be positive")
    rhs = _rhs_factory(params, potential)
    d = params.d

    def ev_left(t, s):
        return s[0]
    ev_left.terminal = True
    ev_left.direction = -1

    def ev_right(t, s):
        return s[0] - d
    ev_right.terminal = True
    ev_right.direction = 1

    cur = state.as_array().astype(float)
    t0 = state.t
    ts, ys, events, segs = [], [], [], []
    while t0 < t_max:
        grid = t0 + dt * np.arange(0, int(np.floor((t_max - t0) / dt)) + 1)
        sol = solve_ivp(rhs, (t0, t_max), cur, method="DOP853", rtol=rtol, atol=atol,
                        events=[ev_left, ev_right] if walls else None,
                        dense_output=True)
        if sol.status == -1:
            raise IntegrationError(sol.message)
        t1 = sol.t[-1]
        keep = grid[grid <= t1]
        if len(keep):
            ts.append(keep)
            ys.append(sol.sol(keep))
        segs.append((t0, t1, sol.sol))
        if sol.status != 1:
            break
        which = 0 if len(sol.t_events[0]) else 1
        s = sol.y_events[which][0].copy()
        s[0] = 0.0 if which == 0 else d
        vx_in = s[2]
        s[2] = -s[2]
        normal = (1.0, 0.0) if which == 0 else (-1.0, 0.0)
        theta = float(np.arctan2(normal[0] * s[3] - normal[1] * s[2],
                                 normal[0] * s[2] + normal[1] * s[3]))
        e = WallEvent(t1, s[0], s[1], vx_in, s[3], which, theta)
        events.append(e)
        ts.append(np.array([t1]))
        ys.append(np.array([s]).T)
        cur, t0 = s, t1
        if stop is None or stop(e):
            break
    T = np.concatenate(ts) if ts else np.array([state.t])
    Y = np.concatenate(ys, axis=1) if ys else cur[:, None]
    return Trajectory(T, Y[0], Y[1], Y[2], Y[3], events, segs, state)


def launch_state(E, theta, params: SystemParams, y0=0.0, wall=0) -> PhaseState:
    """State on a wall with kinetic energy E - U(y0) and outgoing angle theta."""
    ekin = E - 0.5 * params.mass * params.omega0 ** 2 * y0 ** 2
    if ekin <= 0:
        raise InputError("launch point is outside the classically allowed region")
    v = np.sqrt(2 * ekin / params.mass)
    sgn = 1.0 if wall == 0 else -1.0
    return PhaseState(0.0 if wall == 0 else params.d, y0,
                      sgn * v * np.cos(theta), sgn * v * np.sin(theta))


# ---------------------------------------------------------------- arcs

@dataclass
class Arc:
    """Wall-to-wall arc sampled uniformly in arclength.

    ``kappa = 1/rho`` is the signed curvature with de_t/ds = kappa e_n, where
    e_n is e_t rotated by +90 degrees; with this sign the metric factor of the
    curvilinear coordinates is xi = 1 - n kappa.
    """

    s: np.ndarray
    r: np.ndarray
    v: np.ndarray
    t: np.ndarray
    e_t: np.ndarray
    e_n: np.ndarray
    kappa: np.ndarray
    a: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    dcoef: np.ndarray
    energy: float
    theta_start: float = 0.0
    theta_end: float = 0.0
    dense: object = None  # callable s -> state (x, y, vx, vy, t)

    @property
    def length(self):
        return float(self.s[-1] - self.s[0])

    @property
    def rho(self):
        with np.errstate(divide="ignore"):
            return 1.0 / self.kappa

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    def metric(self, n):
        return 1.0 - np.asarray(n) * self.kappa


def d_coefficient(a, kappa, u1, u2, params: SystemParams):
    """Coefficient d(s) of the boundary-layer equation,
    d = 2 m u2/a^2 + m^2 u1^2/a^4 - 2 m u1/(rho a^2) - eB/(rho a)."""
    m = params.mass
    return (2 * m * u2 / a ** 2 + m ** 2 * u1 ** 2 / a ** 4
            - 2 * m * u1 * kappa / a ** 2 - params.eB * kappa / a)


def _geometry(Y, params: SystemParams, potential, E):
    x, y, vx, vy = Y[0], Y[1], Y[2], Y[3]
    wc = params.omega_c_signed
    m = params.mass
    if potential is None:
        gx = np.zeros_like(x)
        gy = m * params.omega0 ** 2 * y
    else:
        g = potential.gradient(x, y)
        gx, gy = g[..., 0], g[..., 1]
    ax = wc * vy - gx / m
    ay = -wc * vx - gy / m
    sp = np.hypot(vx, vy)
    e_t = np.stack([vx, vy], -1) / sp[:, None]
    e_n = np.stack([-vy, vx], -1) / sp[:, None]
    kappa = (vx * ay - vy * ax) / sp ** 3
    r = np.stack([x, y], -1)
    if potential is None:
        u0, u1, u2 = jets_along(r, e_n, params)
    else:
        u0 = potential.value(x, y)
        u1 = np.einsum("ij,ij->i", potential.gradient(x, y), e_n)
        u2 = 0.5 * np.einsum("ij,ijk,ik->i", e_n, potential.hessian(x, y), e_n)
    a2 = 2 * m * (E - u0)
    if np.any(a2 <= 0):
        raise UnsupportedOrbitError("classical turning point on the arc (a -> 0)")
    a = np.sqrt(a2)
    return r, np.stack([vx, vy], -1), e_t, e_n, kappa, a, u0, u1, u2


def build_arc(traj: Trajectory, params: SystemParams, E: float, n_samples: int = 2001,
              potential=None) -> Arc:
    """Re-parameterize the first wall-to-wall piece of ``traj`` by arclength.

    The flow is re-integrated with arclength as the independent variable
    starting from the trajectory's initial state, up to the first wall event,
    and sampled uniformly in s.  Geometry, momentum a(s), potential jets and
    d(s) are evaluated from the exact local state.
    """
    if traj.start is None or not traj.events:
        raise InputError("trajectory must start at a known state and end on a wall")
    st = traj.start
    rhs_t = _rhs_factory(params, potential)

    def rhs(s, S):
        f = rhs_t(0.0, S[:4])
        sp = np.hypot(S[2], S[3])
        return [f[0] / sp, f[1] / sp, f[2] / sp, f[3] / sp, 1.0 / sp]

    end = traj.events[0]
    target = params.d if end.wall == 1 else 0.0

    def ev(s, S):
        return S[0] - target
    ev.terminal = True
    ev.direction = 1 if end.wall == 1 else -1
    sp0 = np.hypot(st.vx, st.vy)
    s_max = 10.0 * sp0 * (end.t - st.t) + 10.0
    sol = solve_ivp(rhs, (0.0, s_max), [st.x, st.y, st.vx, st.vy, st.t], method="DOP853",
                    rtol=RTOL, atol=ATOL, events=ev, dense_output=True)
    if sol.status != 1:
        raise IntegrationError("arc did not reach the wall")
    L = sol.t_events[0][0]
    s = np.linspace(0.0, L, n_samples)
    Y = sol.sol(s)
    Y[0, -1] = target
    r, v, e_t, e_n, kappa, a, u0, u1, u2 = _geometry(Y, params, potential, E)
    dcoef = d_coefficient(a, kappa, u1, u2, params)
    th_end = float(np.arctan2(v[-1, 1], v[-1, 0]))
    return Arc(s, r, v, Y[4], e_t, e_n, kappa, a, u0, u1, u2, dcoef, E,
               theta_start=float(np.arctan2(st.vy, st.vx)), theta_end=th_end,
               dense=sol.sol)


def synthetic_arc(length, a, dcoef, n_samples=2001):
    """A straight, constant-coefficient arc along the x axis (for tests and
    model calculations): constant momentum ``a`` and coefficient ``dcoef``."""
    s = np.linspace(0.0, length, n_samples)
    one = np.ones_like(s)
    r = np.stack([s, 0 * s], -1)
    e_t = np.stack([one, 0 * s], -1)
    e_n = np.stack([0 * s, one], -1)
    return Arc(s, r, a * e_t, s / a, e_t, e_n, 0 * s, a * one, 0 * s, 0 * s, 0 * s,
               dcoef * one, a ** 2 / 2)


# ---------------------------------------------------------- periodic orbit

@dataclass
class Reflection:
    position: tuple
    theta: float
    wall: int


@dataclass
class PeriodicOrbit:
    """Closed two-bounce orbit.  ``arcs[0]`` leaves (0, 0) toward x = d,
    ``arcs[1]`` returns from (d, 0).  ``reflections[i]`` is the bounce at the
    end of ``arcs[i]``."""

    arcs: list
    reflections: list
    period: float
    length: float
    energy: float
    area: float
    launch_angle: float

    def birkhoff(self, params: SystemParams):
        """(y, p_y) of the bounce at the x = 0 wall (outgoing momentum)."""
        arc = self.arcs[0]
        return float(arc.r[0, 1]), float(params.mass * arc.v[0, 1])

    def points(self):
        return np.concatenate([self.arcs[0].r, self.arcs[1].r[1:]])


def _y_at_far_wall(E, theta, params, potential=None):
    st = launch_state(E, theta, params)
    tr = integrate_eom(st, params, dt=1e3, t_max=1e3, potential=potential)
    if not tr.events:
        return np.nan, None
    e = tr.events[0]
    if e.wall != 1:
        return np.nan, tr
    return e.y, tr


def _is_bell(tr: Trajectory, params):
    seg = tr.segments[0]
    t = np.linspace(seg[0], seg[1], 801)
    Y = seg[2](t)
    if np.any(Y[2] <= 0):
        return False, 0.0
    dy = np.diff(Y[1])
    turns = np.sum(np.sign(dy[1:]) != np.sign(dy[:-1]))
    apex = Y[1][np.argmax(np.abs(Y[1]))]
    return turns == 1, float(apex)


def find_bell_angle_brackets(E, params: SystemParams, n_scan: int = 241, potential=None):
    """Scan launch angles for sign changes of y(d) belonging to bell-shaped
    (single-hump, x-monotone) orbits; returns a list of (lo, hi, apex)."""
    ths = np.linspace(-1.5, 1.5, n_scan)
    ys = np.array([_y_at_far_wall(E, t, params, potential)[0] for t in ths])
    out = []
    for i in range(n_scan - 1):
        if not (np.isfinite(ys[i]) and np.isfinite(ys[i + 1])):
            continue
        if ys[i] * ys[i + 1] < 0:
            th = brentq(lambda t: _y_at_far_wall(E, t, params, potential)[0], ths[i], ths[i + 1],
                        xtol=1e-8)
            ok, apex = _is_bell(_y_at_far_wall(E, th, params, potential)[1], params)
            if ok:
                out.append((ths[i], ths[i + 1], apex))
    return out


def default_bell_bracket(E, params: SystemParams, potential=None):
    """Bracket of the bell orbit with the largest excursion from the axis."""
    br = find_bell_angle_brackets(E, params, potential=potential)
    if not br:
        raise OrbitNotFoundError(f"no bell-shaped orbit found at E={E}")
    lo, hi, _ = max(br, key=lambda b: abs(b[2]))
    return lo, hi


def _shoot(E, params, bracket, potential):
    f = lambda t: _y_at_far_wall(E, t, params, potential)[0]
    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise OrbitNotFoundError(f"no sign change of y(d) in angle bracket {bracket}")
    th = brentq(f, lo, hi, xtol=1e-15, maxiter=200)
    if abs(f(th)) > 1e-10 * params.d:
        raise OrbitNotFoundError("shooting did not converge")
    return th


def signed_area(arcs) -> float:
    """(1/2) closed integral of (x dy - y dx), positive for counterclockwise."""
    tot = 0.0
    for arc in arcs:
        integrand = arc.r[:, 0] * arc.e_t[:, 1] - arc.r[:, 1] * arc.e_t[:, 0]
        tot += 0.5 * simpson(integrand, x=arc.s)
    return float(tot)


def find_bell_orbit(E: float, params: SystemParams, bracket=None, n_samples: int = 2001,
                    potential=None) -> PeriodicOrbit:
    """Shoot from (0, 0) on the launch angle until the orbit hits (d, 0).

    The return arc is integrated from (d, 0) with the reflected velocity; by
    symmetry of the benchmark it is the image of the first arc under the
    inversion (x, y) -> (d - x, -y), which closes the orbit.
    """
    if E <= 0:
        raise InputError("energy must be positive")
    if bracket is None:
        bracket = default_bell_bracket(E, params, potential)
    th = _shoot(E, params, bracket, potential)
    if abs(abs(th) - np.pi / 2) < 1e-3:
        raise DegenerateOrbitError("orbit grazes the wall")
    st = launch_state(E, th, params)
    tr1 = integrate_eom(st, params, dt=1e3, t_max=1e3, potential=potential)
    arc1 = build_arc(tr1, params, E, n_samples, potential)
    ev = tr1.events[0]
    st2 = PhaseState(params.d, 0.0, -ev.vx_in, ev.vy, 0.0)
    tr2 = integrate_eom(st2, params, dt=1e3, t_max=1e3, potential=potential)
    if not tr2.events or tr2.events[0].wall != 0:
        raise OrbitNotFoundError("return arc does not reach x = 0")
    arc2 = build_arc(tr2, params, E, n_samples, potential)
    if np.hypot(*arc2.r[-1]) > 1e-7 * params.d:
        raise OrbitNotFoundError("orbit does not close")
    refl = [Reflection((params.d, float(arc1.r[-1, 1])), tr1.events[0].theta, 1),
            Reflection((0.0, float(arc2.r[-1, 1])), tr2.events[0].theta, 0)]
    if max(abs(r.theta) for r in refl) > np.pi / 2 - 1e-3:
        raise DegenerateOrbitError("orbit grazes the wall")
    return PeriodicOrbit([arc1, arc2], refl, arc1.duration + arc2.duration,
                         arc1.length + arc2.length, E, signed_area([arc1, arc2]), float(th))


# ------------------------------------------------------------- Poincare

def poincare_section(E: float, params: SystemParams, seeds, n_bounces: int = 100,
                     potential=None):
    """Birkhoff coordinates (y, p_y) of successive bounces on the x = 0 wall.

    Each seed (y, p_y) is launched from x = 0 into the strip; one entry (an
    (n_bounces+1, 2) array including the seed) is returned per seed.
    """
    m = params.mass
    out = []
    for y0, py0 in np.atleast_2d(seeds):
        ekin = E - 0.5 * m * params.omega0 ** 2 * y0 ** 2 - py0 ** 2 / (2 * m)
        if ekin < 0:
            raise InputError(f"seed ({y0}, {py0}) lies outside the energy surface")
        st = PhaseState(0.0, y0, np.sqrt(2 * ekin / m), py0 / m)
        pts = [(y0, py0)]
        count = [0]

        def stop(e):
            if e.wall == 0:
                pts.append((e.y, m * e.vy))
                count[0] += 1
            return count[0] >= n_bounces
        integrate_eom(st, params, dt=1e6, stop=stop, t_max=1e6, potential=potential)
        out.append(np.array(pts))
    return out
