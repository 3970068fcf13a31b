"""Special functions used by the boundary-layer wavefunctions.

* Hermite polynomials H_m (physicists' convention) by recurrence.
* Kummer's confluent hypergeometric function M(a, b, x) by its power series.
* Parabolic cylinder functions D_xi(z) for complex order and argument:
  Kummer two-term representation near the origin, the large-|z| asymptotic
  expansion far out, and Taylor-series continuation of the Weber equation
  D'' = (z^2/4 - xi - 1/2) D in between.
* Bessel J_{-1/4} (and J_{+1/4}) by ascending series / Hankel asymptotics.

Complex Gamma values come from :mod:`scipy.special`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, rgamma, loggamma


class AccuracyError(ArithmeticError):
    """A kernel detected that it cannot deliver the requested accuracy."""


@dataclass(frozen=True)
class SpecFunConfig:
    series_tolerance: float = 1e-16
    max_terms: int = 600
    pcf_inner_radius: float = 4.0   # Kummer series for |z| <= this
    pcf_outer_radius: float = 8.0   # asymptotic expansion for |z| >= this
    pcf_max_radius: float = 60.0
    bessel_switch: float = 12.0
    taylor_step: float = 0.25

    def __post_init__(self):
        if not (0 < self.series_tolerance <= 1e-6):
            raise ValueError("series_tolerance must lie in (0, 1e-6]")
        if not (self.pcf_inner_radius > 0 and self.pcf_outer_radius > self.pcf_inner_radius
                and self.bessel_switch > 0):
            raise ValueError("switchover radii must be positive and ordered")


DEFAULT = SpecFunConfig()


# ---------------------------------------------------------------- Hermite

def hermite(m: int, x):
    """Physicists' Hermite polynomial H_m(x) via H_{k+1} = 2x H_k - 2k H_{k-1}."""
    if m < 0 or int(m) != m:
        raise ValueError("order must be a non-negative integer")
    if m > 200:
        raise OverflowError("hermite: order above 200 is not supported")
    x = np.asarray(x)
    h0 = np.ones_like(x, dtype=np.result_type(x, float))
    if m == 0:
        return h0
    h1 = 2 * x * h0
    for k in range(1, m):
        h0, h1 = h1, 2 * x * h1 - 2 * k * h0
    return h1


# ------------------------------------------------------------------ Kummer

def kummer_m(a, b, x, cfg: SpecFunConfig = DEFAULT, return_scale: bool = False):
    """Power series of M(a, b, x) for scalar complex arguments.

    With ``return_scale`` the largest term modulus is returned as well so
    callers can judge cancellation.
    """
    a = complex(a)
    b = complex(b)
    x = complex(x)
    term = 1.0 + 0j
    total = term
    big = 1.0
    for k in range(cfg.max_terms):
        term *= (a + k) / ((b + k) * (k + 1)) * x
        total += term
        at = abs(term)
        big = max(big, at)
        if at <= cfg.series_tolerance * abs(total) and k > abs(x):
            break
        if term == 0:
            break
    else:
        raise AccuracyError("Kummer series did not converge")
    return (total, big) if return_scale else total


# -------------------------------------------------------- parabolic cylinder

def _pcf_kummer(xi, z, cfg):
    """D_xi(z) = U(a, z), a = -xi - 1/2, by the even/odd Kummer solutions."""
    a = -xi - 0.5
    u0 = np.sqrt(np.pi) * 2.0 ** (-a / 2 - 0.25) * rgamma(0.75 + a / 2)
    du0 = -np.sqrt(np.pi) * 2.0 ** (-a / 2 + 0.25) * rgamma(0.25 + a / 2)
    x = z * z / 2
    m1, s1 = kummer_m(a / 2 + 0.25, 0.5, x, cfg, True)
    m2, s2 = kummer_m(a / 2 + 0.75, 1.5, x, cfg, True)
    g = np.exp(-z * z / 4)
    t1 = u0 * g * m1
    t2 = du0 * z * g * m2
    val = t1 + t2
    scale = max(abs(u0 * g) * s1, abs(du0 * z * g) * s2, abs(t1), abs(t2))
    if val != 0 and scale * 1e-16 > 1e-9 * abs(val) + 1e-300:
        raise AccuracyError(f"cancellation in Kummer representation at z={z}")
    return val


def _asym_sum(c, z, nmax=80):
    """sum_s (c)_{2s} / (s! (2 z^2)^s) with optimal truncation."""
    tot = 1.0 + 0j
    term = 1.0 + 0j
    last = np.inf
    w = 1.0 / (2 * z * z)
    for s in range(nmax):
        term = term * (c + 2 * s) * (c + 2 * s + 1) / (s + 1) * w
        at = abs(term)
        if at > last:
            break
        tot += term
        last = at
        if at < 1e-17 * abs(tot):
            break
    return tot


def _asym_sum_alt(c, z, nmax=80):
    """sum_s (-1)^s (c)_{2s} / (s! (2 z^2)^s)."""
    return _asym_sum(c, 1j * z, nmax)


def _pcf_asymptotic(xi, z):
    """Large-|z| expansion of U(a, z) = D_xi(z), a = -xi - 1/2, for
    |ph z| <= pi/2.

    In this sector the companion series exp(+z^2/4) z^(a-1/2) (...) is either
    absent (below the Stokes line) or exponentially subdominant, so the single
    series is used; larger phases are reduced with the connection formula.
    """
    a = -xi - 0.5
    lz = np.log(z)
    return np.exp(-z * z / 4 + (-a - 0.5) * lz) * _asym_sum_alt(0.5 + a, z)


def _weber_taylor(xi, z0, D0, dD0, z1, step):
    """Continue (D, D') of D'' = (z^2/4 - xi - 1/2) D from z0 to z1 along the
    straight segment with local Taylor series."""
    n_steps = max(1, int(np.ceil(abs(z1 - z0) / step)))
    h = (z1 - z0) / n_steps
    z, D, dD = complex(z0), complex(D0), complex(dD0)
    for _ in range(n_steps):
        q0 = z * z / 4 - xi - 0.5
        q1 = z / 2
        c = [D, dD]
        # (k+2)(k+1) c_{k+2} = q0 c_k + q1 c_{k-1} + c_{k-2}/4
        for k in range(0, 60):
            v = q0 * c[k]
            if k >= 1:
                v += q1 * c[k - 1]
            if k >= 2:
                v += 0.25 * c[k - 2]
            c.append(v / ((k + 2) * (k + 1)))
            if k > 8 and abs(c[-1]) * abs(h) ** (k + 2) < 1e-18 * (abs(D) + abs(dD) * abs(h)):
                break
        hp = np.array([h ** j for j in range(len(c))])
        cs = np.array(c)
        Dn = np.sum(cs * hp)
        dDn = np.sum(cs[1:] * np.arange(1, len(c)) * hp[:-1])
        z, D, dD = z + h, Dn, dDn
    return D, dD


def _pcf_pair(xi, z, cfg, method):
    """(D_xi(z), D_xi'(z)) using D' = z D/2 - D_{xi+1}."""
    if method == "kummer":
        f = lambda o: _pcf_kummer(o, z, cfg)
    else:
        f = lambda o: _pcf_asymptotic(o, z)
    D = f(xi)
    D1 = f(xi + 1)
    return D, 0.5 * z * D - D1


def _pcf_scalar(xi, z, cfg: SpecFunConfig):
    r = abs(z)
    if r > cfg.pcf_max_radius:
        raise ValueError(f"|z| = {r} exceeds the configured maximum radius")
    if r <= cfg.pcf_inner_radius:
        return _pcf_kummer(xi, z, cfg)
    ph = np.angle(z)
    if abs(ph) > np.pi / 2:
        # connection formula: reduce to arguments with |ph| <= pi/2, where the
        # direct paths below are numerically stable
        s = 1.0 if ph > 0 else -1.0
        first = np.exp(s * 1j * np.pi * xi) * _pcf_scalar(xi, -z, cfg)
        rg = rgamma(-xi)
        if rg == 0:
            return first
        second = (np.sqrt(2 * np.pi) * rg * np.exp(s * 1j * np.pi * (xi + 1) / 2)
                  * _pcf_scalar(-xi - 1, -s * 1j * z, cfg))
        return first + second
    r_out = max(cfg.pcf_outer_radius, 2.5 * np.sqrt(abs(xi) + 1.0) + 4.0)
    if r >= r_out:
        return _pcf_asymptotic(xi, z)
    u = z / r
    if r * r * np.cos(2 * ph) > 2 * xi.real + 1:
        # D is recessive outward here: integrate inward from the asymptotic zone
        z0 = u * r_out
        D0, dD0 = _pcf_pair(xi, z0, cfg, "asym")
        return _weber_taylor(xi, z0, D0, dD0, z, cfg.taylor_step)[0]
    # dominant outward: start from the Kummer zone (shrinking the start
    # radius if the series suffers cancellation there)
    for r0 in (cfg.pcf_inner_radius, 0.75 * cfg.pcf_inner_radius, 0.5 * cfg.pcf_inner_radius,
               0.25 * cfg.pcf_inner_radius):
        try:
            z0 = u * min(r0, r)
            D0, dD0 = _pcf_pair(xi, z0, cfg, "kummer")
            break
        except AccuracyError:
            continue
    else:
        raise AccuracyError(f"no stable start point for D_{xi}({z})")
    return _weber_taylor(xi, z0, D0, dD0, z, cfg.taylor_step)[0]


def parabolic_cylinder_d(xi, zz, cfg: SpecFunConfig = DEFAULT):
    """Parabolic cylinder function D_xi(z) (Whittaker's notation) for complex
    order ``xi`` and complex argument ``zz`` (scalar or array)."""
    xi = complex(xi)
    arr = np.asarray(zz, dtype=complex)
    out = np.empty(arr.shape, dtype=complex)
    for idx, z in np.ndenumerate(arr):
        out[idx] = _pcf_scalar(xi, complex(z), cfg)
    return out if arr.ndim else complex(out)


# ------------------------------------------------------------------ Bessel

def _bessel_series(nu, x, cfg):
    x = np.asarray(x, float)
    h = (x / 2) ** 2
    term = np.ones_like(x) * rgamma(nu + 1)
    tot = term.copy()
    for k in range(1, cfg.max_terms):
        term = -term * h / (k * (k + nu))
        tot += term
        if np.all(np.abs(term) <= cfg.series_tolerance * np.abs(tot)):
            break
    with np.errstate(divide="ignore", invalid="ignore"):
        return tot * (x / 2) ** nu


def _bessel_hankel(nu, x, nterms=30):
    x = np.asarray(x, float)
    mu = 4 * nu * nu
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    term = np.ones_like(x)
    last = np.full_like(x, np.inf)
    done = np.zeros(x.shape, bool)
    for k in range(1, 2 * nterms):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8 * x)
        at = np.abs(term)
        done |= at > last
        upd = ~done
        if k % 2 == 1:
            Q = np.where(upd, Q + (term if (k // 2) % 2 == 0 else -term), Q)
        else:
            P = np.where(upd, P + (-term if (k // 2) % 2 == 1 else term), P)
        last = np.where(upd, at, last)
        if np.all(done | (at < 1e-17)):
            break
    chi = x - (nu / 2 + 0.25) * np.pi
    return np.sqrt(2 / (np.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def _bessel(nu, x, cfg):
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise ValueError("Bessel kernel requires a non-negative argument")
    out = np.empty_like(x)
    lo = x < cfg.bessel_switch
    if np.any(lo):
        out[lo] = _bessel_series(nu, x[lo], cfg)
    if np.any(~lo):
        out[~lo] = _bessel_hankel(nu, x[~lo])
    return out if out.ndim else float(out)


def bessel_j_m14(x, cfg: SpecFunConfig = DEFAULT):
    """J_{-1/4}(x) for x >= 0."""
    return _bessel(-0.25, x, cfg)


def bessel_j_p14(x, cfg: SpecFunConfig = DEFAULT):
    """J_{+1/4}(x) for x >= 0 (companion kernel used for Wronskian checks)."""
    return _bessel(0.25, x, cfg)


def x14_j_m14(x, cfg: SpecFunConfig = DEFAULT):
    """x^{1/4} J_{-1/4}(x), finite at x = 0 (value 2^{1/4}/Gamma(3/4))."""
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise ValueError("negative argument")
    out = np.empty_like(x)
    lo = x < cfg.bessel_switch
    if np.any(lo):
        h = (x[lo] / 2) ** 2
        term = np.ones_like(h) * rgamma(0.75)
        tot = term.copy()
        for k in range(1, cfg.max_terms):
            term = -term * h / (k * (k - 0.25))
            tot += term
            if np.all(np.abs(term) <= cfg.series_tolerance * np.abs(tot)):
                break
        out[lo] = tot * 2.0 ** 0.25
    if np.any(~lo):
        out[~lo] = x[~lo] ** 0.25 * _bessel_hankel(-0.25, x[~lo])
    return out if out.ndim else float(out)


__all__ = ["SpecFunConfig", "AccuracyError", "hermite", "kummer_m", "parabolic_cylinder_d",
           "bessel_j_m14", "bessel_j_p14", "x14_j_m14", "gamma", "loggamma"]
