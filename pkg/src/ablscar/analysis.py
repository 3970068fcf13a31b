"""Comparison layer: Husimi maps of the wall normal derivative in Birkhoff
coordinates, line profiles with boxcar averaging, inversion parity of
fields, and the ABL-versus-exact comparison report."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.optimize import minimize

from .model import SystemParams, InputError, symmetric_to_landau_phase


# --------------------------------------------------------------- Husimi

def coherent_state(y, y0, p0, sigma, hbar=1.0):
    """Normalized Gaussian wave packet of width sigma centred at (y0, p0)."""
    y = np.asarray(y, float)
    return ((np.pi * sigma ** 2) ** -0.25
            * np.exp(-(y - y0) ** 2 / (2 * sigma ** 2) + 1j * p0 * (y - y0) / hbar))


def _quadrature_grid(y_grid, sigma, n_per_sigma=16, pad=8.0):
    lo = np.min(y_grid) - pad * sigma
    hi = np.max(y_grid) + pad * sigma
    n = int(np.ceil((hi - lo) / sigma * n_per_sigma)) + 1
    return np.linspace(lo, hi, n)


@dataclass
class HusimiMap:
    y: np.ndarray
    p: np.ndarray
    H: np.ndarray           # shape (len(p), len(y))
    sigma: float
    energy: Optional[float] = None
    params: Optional[SystemParams] = None

    def peak(self, refine_with: Optional[Callable] = None):
        """Grid maximum (p index, y index) -> (y, p); optionally refined by
        a local maximization of ``refine_with(y, p)``."""
        k = np.unravel_index(np.argmax(self.H), self.H.shape)
        y0, p0 = float(self.y[k[1]]), float(self.p[k[0]])
        if refine_with is not None:
            r = minimize(lambda v: -refine_with(v[0], v[1]), [y0, p0], method="Nelder-Mead",
                         options={"xatol": 1e-6, "fatol": 1e-14, "maxiter": 400})
            y0, p0 = float(r.x[0]), float(r.x[1])
        return y0, p0

    def accessible(self):
        """Mask of the energetically accessible disc p^2/2m + u(0, y) <= E."""
        if self.energy is None or self.params is None:
            return np.ones_like(self.H, bool)
        Y, P = np.meshgrid(self.y, self.p)
        pr = self.params
        return P ** 2 / (2 * pr.mass) + 0.5 * pr.mass * pr.omega0 ** 2 * Y ** 2 <= self.energy


def husimi_map(sampler, y_grid, p_grid, sigma: float, hbar: float = 1.0,
               energy: Optional[float] = None, params: Optional[SystemParams] = None,
               n_per_sigma: int = 16) -> HusimiMap:
    """H(y0, p0) = |int dy g*(y; y0, p0) f(y)|^2 with f = sampler(y).

    The overlap is evaluated with the trapezoidal rule on a uniform grid of
    ``n_per_sigma`` points per sigma extending 8 sigma beyond the map; for
    the Gaussian-weighted smooth integrands this is spectrally accurate.
    """
    if not sigma > 0:
        raise InputError("sigma must be positive")
    y_grid = np.asarray(y_grid, float)
    p_grid = np.asarray(p_grid, float)
    q = _quadrature_grid(y_grid, sigma, n_per_sigma)
    dq = q[1] - q[0]
    f = np.asarray(sampler(q), complex)
    # A[y0, q] = f(q) * envelope(q - y0); B[p0, y0] = sum_q A exp(-i p0 q/hbar)
    env = (np.pi * sigma ** 2) ** -0.25 * np.exp(-(q[None, :] - y_grid[:, None]) ** 2 / (2 * sigma ** 2))
    A = env * f[None, :] * dq
    Ex = np.exp(-1j * np.outer(p_grid, q) / hbar)
    B = Ex @ A.T
    return HusimiMap(y_grid, p_grid, np.abs(B) ** 2, float(sigma), energy, params)


def husimi_value(sampler, y0, p0, sigma, hbar=1.0, n_per_sigma=16):
    return float(husimi_map(sampler, [y0], [p0], sigma, hbar, n_per_sigma=n_per_sigma).H[0, 0])


def energy_circle(E, params: SystemParams, n: int = 256):
    """Points (y, p_y) on p_y^2/2m + m omega0^2 y^2/2 = E (the boundary of the
    accessible region at the x = 0 wall)."""
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
    p = params
    return (np.sqrt(2 * E / (p.mass * p.omega0 ** 2)) * np.cos(phi),
            np.sqrt(2 * p.mass * E) * np.sin(phi))


def accessible_samples(E, params: SystemParams, n: int = 48):
    """Uniform (y, p_y) samples of the accessible disc at the x = 0 wall."""
    ym = np.sqrt(2 * E / (params.mass * params.omega0 ** 2))
    pm = np.sqrt(2 * params.mass * E)
    Y, P = np.meshgrid(np.linspace(-ym, ym, n), np.linspace(-pm, pm, n))
    m = (Y / ym) ** 2 + (P / pm) ** 2 <= 1.0
    return Y[m], P[m]


@dataclass
class ScarTest:
    value: float          # Husimi value at the orbit point
    reference: float      # median over the reference set
    ratio: float
    passed: bool


def scar_test(sampler, orbit_point, E, params: SystemParams, sigma=None, threshold=3.0,
              reference: str = "circle", n=48) -> ScarTest:
    """Husimi value at the orbit's Birkhoff point against the median Husimi
    value over the energy surface at the wall.

    ``reference="circle"`` (default) uses the energy circle
    p^2/2m + u(0,y) = E, ``"disc"`` the accessible region it encloses.
    """
    sigma = params.l_B if sigma is None else sigma
    if reference == "circle":
        ys, ps = energy_circle(E, params, 4 * n)
    elif reference == "disc":
        ys, ps = accessible_samples(E, params, n)
    else:
        raise InputError(f"unknown reference set {reference!r}")
    q = _quadrature_grid(np.array([np.min(ys), np.max(ys), orbit_point[0]]), sigma)
    dq = q[1] - q[0]
    f = np.asarray(sampler(q), complex)

    def hv(y0, p0):
        g = coherent_state(q, y0, p0, sigma, params.hbar)
        return np.abs(np.sum(np.conj(g) * f) * dq) ** 2
    ref = np.median([hv(a, b) for a, b in zip(ys, ps)])
    val = hv(*orbit_point)
    ratio = val / ref if ref > 0 else np.inf
    return ScarTest(float(val), float(ref), float(ratio), bool(ratio >= threshold))


# ------------------------------------------------------------ profiles

def boxcar(values, x, window):
    """Centred running mean over ``window`` (length units) on a uniform grid."""
    x = np.asarray(x, float)
    dx = x[1] - x[0]
    if window < dx:
        raise InputError("averaging window must be at least one grid step")
    size = max(1, int(round(window / dx)))
    if size % 2 == 0:
        size += 1
    return uniform_filter1d(np.asarray(values, float), size, mode="nearest")


def line_profile(field, x, y0: float = 0.0, window: Optional[float] = None,
                 params: Optional[SystemParams] = None):
    """|Psi(x, y0)| on the x samples, boxcar averaged over ``window``
    (default 0.05 d).  ``field`` is a callable (x, y) -> Psi or an array of
    samples on x."""
    x = np.asarray(x, float)
    if callable(field):
        vals = np.abs(field(x, np.full_like(x, y0)))
    else:
        vals = np.abs(np.asarray(field))
    if window is None:
        d = params.d if params is not None else (x[-1] - x[0])
        window = 0.05 * d
    return boxcar(vals, x, window)


def profile_correlation(a, b, x, x_max=None):
    """Pearson correlation of two profiles restricted to x <= x_max."""
    x = np.asarray(x, float)
    m = np.ones_like(x, bool) if x_max is None else x <= x_max
    return float(np.corrcoef(np.asarray(a)[m], np.asarray(b)[m])[0, 1])


# --------------------------------------------------------------- parity

@dataclass
class ParityResult:
    parity: int
    residual: float       # max |F - parity * P F| / max |F|
    correlation: float    # Re <F, P F> / <F, F>


def parity_of_grid(F) -> ParityResult:
    """Inversion parity of a field sampled on a grid symmetric about the
    inversion centre (both axes reversed by the inversion)."""
    F = np.asarray(F, complex)
    PF = F[::-1, ::-1]
    c = float(np.real(np.vdot(F, PF)) / np.real(np.vdot(F, F)))
    par = 1 if c >= 0 else -1
    res = float(np.max(np.abs(F - par * PF)) / np.max(np.abs(F)))
    return ParityResult(par, res, c)


def parity_of_field(field, params: SystemParams, nx=101, ny=161, y_max=None,
                    gauge: str = "landau") -> ParityResult:
    """Parity of Psi about (d/2, 0).  Fields in the symmetric gauge are
    converted to the Landau gauge first (the inversion-covariant gauge)."""
    y_max = y_max or 0.8 * params.d
    x = np.linspace(0, params.d, nx)
    y = np.linspace(-y_max, y_max, ny)
    X, Y = np.meshgrid(x, y)
    F = field(X, Y)
    if gauge == "symmetric":
        F = F * symmetric_to_landau_phase(X, Y, params)
    return parity_of_grid(F)


# --------------------------------------------------------------- report

@dataclass
class ComparisonRecord:
    n: int
    E_abl: float
    E_exact: Optional[float]
    spacing: Optional[float]
    rel_error: Optional[float]
    scar_ratio: Optional[float]
    n_scarred_in_window: int
    husimi_peak: Optional[tuple]
    birkhoff_point: tuple
    peak_offset_sigma: Optional[float]
    profile_correlation: Optional[float]
    parity_abl: int
    parity_abl_residual: float
    parity_exact: Optional[int]
    parity_exact_correlation: Optional[float]
    parity_expected: int
    flags: dict = field(default_factory=dict)


@dataclass
class ComparisonReport:
    records: list
    exact_scars: list         # energies of exact states passing the scar test
    spacings_equal: bool
    criteria: dict
    gaps: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "records": [asdict(r) for r in self.records],
            "exact_scars": list(map(float, self.exact_scars)),
            "spacings_equal": bool(self.spacings_equal),
            "criteria": {k: bool(v) for k, v in self.criteria.items()},
            "gaps": self.gaps,
            "provenance": self.provenance,
        }


def expected_parity(n: int) -> int:
    """Parity rule stated for the benchmark: symmetric (+1) for odd n,
    antisymmetric (-1) for even n."""
    return 1 if n % 2 else -1


def match_scars(abl_states: Sequence, exact_states: Sequence, params: SystemParams,
                sigma: Optional[float] = None, threshold: float = 3.0,
                reference: str = "circle"):
    """Scar-test every exact state and assign the strongest scar to each n.

    Each exact state is tested against the orbit at the nearest ABL energy.
    For state k (sorted by n) the window is |E - E_k| <= dE/2 with dE the
    local ABL spacing.  Returns ``(tests, windows, matches)``: the
    :class:`ScarTest` per exact state, the scarred indices per window, and
    the matched exact index per window (``None`` for an empty window).
    """
    sigma = params.l_B if sigma is None else sigma
    abl_states = sorted(abl_states, key=lambda s: s.n)
    E_abl = np.array([s.E for s in abl_states])
    tests = []
    for st in exact_states:
        k = int(np.argmin(np.abs(E_abl - st.energy)))
        bp = abl_states[k].point.orbit.birkhoff(params)
        tests.append(scar_test(lambda y, st=st: st.wall_derivative(y), bp, st.energy, params,
                               sigma, threshold, reference))
    scarred = [i for i, t in enumerate(tests) if t.passed]
    windows, matches = [], []
    for k, ab in enumerate(abl_states):
        if len(abl_states) > 1:
            dE = (E_abl[k + 1] - E_abl[k]) if k + 1 < len(abl_states) else (E_abl[k] - E_abl[k - 1])
        else:
            dE = np.inf
        inwin = [i for i in scarred if abs(exact_states[i].energy - ab.E) <= dE / 2]
        windows.append(inwin)
        matches.append(max(inwin, key=lambda i: tests[i].ratio) if inwin else None)
    return tests, windows, matches


def compare_report(abl_states: Sequence, exact_states: Sequence, params: SystemParams,
                   sigma: Optional[float] = None, threshold: float = 3.0,
                   reference: str = "circle", profile_nx: int = 401,
                   abl_field: Optional[Callable] = None, provenance: Optional[dict] = None,
                   parity_grid=(101, 161)) -> ComparisonReport:
    """Compare quantized ABL states with exact eigenstates.

    ``abl_states`` are :class:`~ablscar.semiclassics.ABLState` objects
    (sorted by n); ``exact_states`` are :class:`~ablscar.exactqm.ExactState`
    objects covering the energy range.  For each n the window
    [E_n - dE/2, E_n + dE/2] (dE = local ABL spacing) is searched for exact
    states passing the Husimi scar test at the orbit's Birkhoff point; the
    strongest one is matched to n.
    """
    sigma = params.l_B if sigma is None else sigma
    abl_states = sorted(abl_states, key=lambda s: s.n)
    d = params.d
    tests, windows, _ = match_scars(abl_states, exact_states, params, sigma, threshold, reference)
    scarred = [i for i, t in enumerate(tests) if t.passed]
    x = np.linspace(0, d, profile_nx)
    records, gaps = [], []
    matched_E = []
    for k, ab in enumerate(abl_states):
        inwin = windows[k]
        bp = ab.point.orbit.birkhoff(params)
        fieldf = abl_field(ab) if abl_field is not None else ab
        # ABL parity (symmetric gauge -> Landau)
        pr = parity_of_field(fieldf, params, *parity_grid, gauge="symmetric")
        rec = ComparisonRecord(ab.n, float(ab.E), None, None, None, None, len(inwin), None,
                               (float(bp[0]), float(bp[1])), None, None, pr.parity, pr.residual,
                               None, None, expected_parity(ab.n))
        if not inwin:
            gaps.append(ab.n)
            matched_E.append(np.nan)
            records.append(rec)
            continue
        best = max(inwin, key=lambda i: tests[i].ratio)
        ex = exact_states[best]
        rec.E_exact = float(ex.energy)
        rec.scar_ratio = tests[best].ratio
        matched_E.append(ex.energy)
        # Husimi peak (refined) of the matched exact state
        sampler = lambda y, ex=ex: ex.wall_derivative(y)
        ym = np.sqrt(2 * ex.energy / (params.mass * params.omega0 ** 2))
        pm = np.sqrt(2 * params.mass * ex.energy)
        hm = husimi_map(sampler, np.linspace(-ym, ym, 57), np.linspace(-pm, pm, 57), sigma,
                        params.hbar, ex.energy, params)
        Hm = np.where(hm.accessible(), hm.H, 0.0)
        kk = np.unravel_index(np.argmax(Hm), Hm.shape)
        y0, p0 = hm.y[kk[1]], hm.p[kk[0]]
        r = minimize(lambda v: -husimi_value(sampler, v[0], v[1], sigma, params.hbar),
                     [y0, p0], method="Nelder-Mead", options={"xatol": 1e-5, "fatol": 1e-16})
        peak = (float(r.x[0]), float(r.x[1]))
        rec.husimi_peak = peak
        rec.peak_offset_sigma = float(np.hypot((peak[0] - bp[0]) / sigma,
                                               (peak[1] - bp[1]) * sigma / params.hbar))
        # profiles along y = 0 (gauge-invariant magnitudes)
        pa = line_profile(lambda xx, yy: fieldf(xx, yy), x, 0.0, None, params)
        pe = line_profile(lambda xx, yy: ex(xx, yy), x, 0.0, None, params)
        rec.profile_correlation = profile_correlation(pa, pe, x, 0.15 * d)
        # exact parity from the field itself
        pex = parity_of_field(ex, params, *parity_grid, gauge="landau")
        rec.parity_exact = pex.parity
        rec.parity_exact_correlation = pex.correlation
        records.append(rec)
    # spacings between matched exact energies
    mE = np.array(matched_E)
    for k, rec in enumerate(records):
        if rec.E_exact is None:
            continue
        if k + 1 < len(records) and np.isfinite(mE[k + 1]):
            sp = mE[k + 1] - mE[k]
        elif k > 0 and np.isfinite(mE[k - 1]):
            sp = mE[k] - mE[k - 1]
        else:
            sp = None
        rec.spacing = None if sp is None else float(sp)
        rec.rel_error = None if sp is None else float(abs(rec.E_abl - rec.E_exact) / sp)
    sps = np.diff(mE)
    sps = sps[np.isfinite(sps)]
    spacings_equal = bool(len(sps) > 0 and (sps.max() - sps.min()) / sps.mean() < 0.10)
    ok = lambda v: v is not None
    crit = {
        "energy_agreement": all(ok(r.rel_error) and r.rel_error < 0.05 for r in records) and spacings_equal,
        "single_scar_per_window": all(r.n_scarred_in_window == 1 for r in records),
        "husimi_localization": all(ok(r.peak_offset_sigma) and r.peak_offset_sigma <= 1.0 for r in records),
        "profile_agreement": all(ok(r.profile_correlation) and r.profile_correlation >= 0.9 for r in records),
        "parity": all(r.parity_exact is not None and r.parity_abl == r.parity_exact
                      and r.parity_abl == r.parity_expected and r.parity_abl_residual < 1e-2
                      and r.parity_exact * r.parity_exact_correlation > 0 for r in records),
        "parity_abl_matches_exact": all(r.parity_exact is not None and r.parity_abl == r.parity_exact
                                        for r in records),
    }
    for r in records:
        r.flags = {
            "energy": bool(ok(r.rel_error) and r.rel_error < 0.05),
            "single_scar": r.n_scarred_in_window == 1,
            "husimi": bool(ok(r.peak_offset_sigma) and r.peak_offset_sigma <= 1.0),
            "profile": bool(ok(r.profile_correlation) and r.profile_correlation >= 0.9),
            "parity_rule": r.parity_abl == r.parity_expected,
            "parity_match": r.parity_exact == r.parity_abl,
        }
    return ComparisonReport(records, [float(exact_states[i].energy) for i in scarred],
                            spacings_equal, crit, gaps, provenance or {})
