"""Exact quantum reference solutions of the strip resonator.

Two solvers are provided, both in the Landau gauge A = -B y e_x where the
wall-free problem separates:

* Channel collocation: modes exp(i k x) chi_n(y - y_k) of the wall-free
  problem, Dirichlet conditions at x = 0 and x = d imposed on a y grid, and
  eigenenergies located as minima of the smallest singular value of the
  boundary matrix.  Exact and fast for B = 0; with a field the finite
  channel set is either incomplete or numerically overcomplete on the wall
  lines, so the scan is kept for the field-free reference.
* Legendre-Galerkin: a Dirichlet Legendre basis P_{k+2} - P_k in x times
  oscillator functions centred at y = 0 in y, giving a generalized
  Hermitian eigenproblem split by inversion parity.  This is the reference
  used for the benchmark spectrum and eigenstates.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.linalg import eigh
from scipy.optimize import minimize_scalar

from .model import SystemParams, InputError


class ConditioningError(RuntimeError):
    pass


class NoEigenstateError(RuntimeError):
    pass


class EmptyChannelWarning(UserWarning):
    pass


# ------------------------------------------------------------ channels

def oscillator_functions(n_max: int, u):
    """Normalized Hermite functions h_0..h_{n_max} of the (possibly complex)
    dimensionless coordinate u, by the stable three-term recurrence."""
    u = np.asarray(u)
    dt = complex if np.iscomplexobj(u) else float
    out = np.zeros((n_max + 1,) + u.shape, dt)
    out[0] = np.pi ** -0.25 * np.exp(-u ** 2 / 2)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * u * out[0]
    for k in range(1, n_max):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * u * out[k] - np.sqrt(k / (k + 1)) * out[k - 1]
    return out


@dataclass(frozen=True)
class ChannelMode:
    """exp(i k x) chi_n(y - y_k) with chi_n the oscillator state of frequency Omega."""

    n: int
    k: complex
    y_k: complex
    Omega: float
    energy: float

    @property
    def evanescent(self) -> bool:
        return abs(np.imag(self.k)) > 0

    def values(self, x, y, params: SystemParams, x_ref: float = 0.0):
        """Mode values; ``x_ref`` shifts the longitudinal phase reference
        (exp(i k (x - x_ref))) to keep evanescent modes bounded."""
        beta = np.sqrt(params.mass * self.Omega / params.hbar)
        chi = oscillator_functions(self.n, beta * (np.asarray(y) - self.y_k))[self.n] * np.sqrt(beta)
        return np.exp(1j * self.k * (np.asarray(x) - x_ref)) * chi

    def dx_values(self, x, y, params: SystemParams, x_ref: float = 0.0):
        return 1j * self.k * self.values(x, y, params, x_ref)


def dispersion_k(E, n, params: SystemParams):
    """k^2 from E = hbar Omega (n + 1/2) + hbar^2 k^2 omega0^2 / (2 m Omega^2)."""
    p = params
    Om = p.Omega
    if p.omega0 == 0:
        raise InputError("the channel dispersion needs omega0 > 0")
    return (E - p.hbar * Om * (n + 0.5)) * 2 * p.mass * Om ** 2 / (p.hbar ** 2 * p.omega0 ** 2)


def channel_basis(E: float, params: SystemParams, n_max: int = 80,
                  include_evanescent: bool = True, kappa_max: Optional[float] = None):
    """Open (real k) and evanescent (imaginary k, |k| <= kappa_max) channels
    at energy E, both signs of k; y_k = -hbar k omega_c/(m Omega^2) with the
    signed cyclotron frequency."""
    if n_max < 1:
        raise InputError("n_max must be >= 1")
    p = params
    kappa_max = 10.0 / p.d if kappa_max is None else kappa_max
    Om = p.Omega
    out = []
    n_open = 0
    for n in range(n_max + 1):
        k2 = dispersion_k(E, n, p)
        if k2 > 0:
            ks = [np.sqrt(k2)]
            n_open += 1
        elif k2 == 0:
            ks = [0.0]
            n_open += 1
        elif include_evanescent and np.sqrt(-k2) <= kappa_max:
            ks = [1j * np.sqrt(-k2)]
        else:
            continue
        for k0 in ks:
            for sg in ((+1, -1) if k0 != 0 else (+1,)):
                k = sg * k0
                yk = -p.hbar * k * p.omega_c_signed / (p.mass * Om ** 2)
                out.append(ChannelMode(n, complex(k), complex(yk), Om, float(E)))
    if n_open == 0:
        warnings.warn("energy below the lowest channel: evanescent-only basis", EmptyChannelWarning)
    return out


def wall_free_hamiltonian_fd(mode: ChannelMode, params: SystemParams, y, h=None):
    """Apply the wall-free Landau-gauge Hamiltonian to a channel mode on a
    y grid (x-dependence exp(i k x) handled analytically); returns H psi
    and psi at x = 0.  Second derivative by a sixth-order stencil."""
    p = params
    y = np.asarray(y, float)
    h = (y[1] - y[0]) if h is None else h
    c = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
    ext = y[:, None] + h * np.arange(-3, 4)[None, :]
    f = mode.values(0.0, ext, p)
    fyy = (f @ c) / h ** 2
    f0 = f[:, 3]
    kin_x = (p.hbar * mode.k + p.eB * y) ** 2 / (2 * p.mass)
    Hf = kin_x * f0 - p.hbar ** 2 / (2 * p.mass) * fyy + 0.5 * p.mass * p.omega0 ** 2 * y ** 2 * f0
    return Hf, f0


# ------------------------------------------------- collocation SVD scan

def collocation_grid(E: float, params: SystemParams, n_rows: int = 400, factor: float = 1.5):
    """y grid |y| <= factor * classical turning point at energy E."""
    yt = np.sqrt(2 * E / (params.mass * params.omega0 ** 2))
    return np.linspace(-factor * yt, factor * yt, n_rows)


def _pair_transform(modes, d, norms, refs):
    """Column transform acting on the unit-norm mode columns.  Each pair
    (n, +k), (n, -k) that is open, or closed with |k| d <= 1, is rewritten
    on the common reference x = 0 and replaced by the even and odd
    combinations (e+ + e-)/2 and (e+ - e-)/(2 i kk), with e+- = exp(+-i k x)
    chi_n and kk = k max(1, 1/(|k| d)).  The raw pair becomes parallel as
    k -> 0 (channel threshold), which would fake a small singular value;
    the combinations stay independent and of order one (the odd one tends
    to x chi_n / d)."""
    T = np.eye(len(modes), dtype=complex)
    seen = {}
    for i, md in enumerate(modes):
        if md.k == 0 or (md.evanescent and abs(md.k) * d > 1.0):
            continue
        key = md.n
        if key in seen:
            j = seen.pop(key)
            kp = modes[j].k
            kk = kp * max(1.0, 1.0 / (abs(kp) * d))
            s = 0.5 * (norms[j] + norms[i])
            # unit column c = exp(i k (x - r)) chi / norm
            fj = norms[j] * np.exp(1j * kp * refs[j]) / s
            fi = norms[i] * np.exp(1j * modes[i].k * refs[i]) / s
            T[np.ix_([j, i], [j, i])] = [[0.5 * fj, fj / (2j * kk)],
                                         [0.5 * fi, -fi / (2j * kk)]]
        else:
            seen[key] = i
    return T


def boundary_matrix(E: float, params: SystemParams, y, n_max=80, kappa_max=None):
    """Values of all channel modes at x = 0 (first rows) and x = d; columns
    are normalized at the nearer wall and to unit norm, then near-parallel
    pairs are recombined (see :func:`_pair_transform`).

    Returns ``(A, modes, refs, C)`` where ``C`` maps coefficients of the
    columns of ``A`` to coefficients of the individual modes."""
    modes = channel_basis(E, params, n_max, True, kappa_max)
    d = params.d
    cols = []
    refs = []
    for md in modes:
        # evanescent modes decaying into the strip from x = 0 have Im k > 0
        x_ref = d if np.imag(md.k) < 0 else 0.0
        col = np.concatenate([md.values(0.0, y, params, x_ref), md.values(d, y, params, x_ref)])
        cols.append(col)
        refs.append(x_ref)
    A = np.array(cols).T
    norms = np.linalg.norm(A, axis=0)
    if np.any(~np.isfinite(norms)) or np.any(norms == 0):
        raise ConditioningError("channel columns overflow; reduce kappa_max")
    # normalize the raw columns (smooth in E), then recombine open pairs;
    # no renormalization afterwards, since at B = 0 a recombined column
    # vanishes exactly at an eigenvalue
    T = _pair_transform(modes, d, norms, refs)
    A = (A / norms) @ T
    return A, modes, np.array(refs), T / norms[:, None]


def sigma_min(E, params, y, n_max=80, kappa_max=None, return_vector=False):
    A, modes, refs, C = boundary_matrix(E, params, y, n_max, kappa_max)
    if A.shape[0] < 2 * A.shape[1]:
        raise InputError("collocation rows must be at least twice the basis size")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    if return_vector:
        return s[-1], C @ np.conj(Vh[-1]), modes, refs
    return s[-1]


@dataclass
class ScanResult:
    energies: np.ndarray
    sigma: np.ndarray
    minima: list


def scan_grid(E_range, params: SystemParams, step: float, n_max: int = 80,
              k_scale: float = 2.0, min_step: Optional[float] = None):
    """Energy grid with spacing ``step * min(1, (k_min / k_scale)^2)``, where
    k_min is the smallest |k| over all channels.  Near a channel threshold
    the minima of the smallest singular value narrow like k^2, so a uniform
    grid would step over them."""
    lo, hi = E_range
    min_step = step / 100 if min_step is None else min_step
    p = params
    n = np.arange(n_max + 1)
    out = [lo]
    E = lo
    while E < hi:
        k_min = np.sqrt(np.min(np.abs(dispersion_k(E, n, p))))
        E = E + max(min_step, step * min(1.0, (k_min / k_scale) ** 2))
        out.append(min(E, hi))
    return np.array(out)


def spectrum_scan(E_range, params: SystemParams, n_max: int = 80, kappa_max=None,
                  step: float = 0.02, n_rows: int = 400, threshold: Optional[float] = None,
                  refine: bool = True, accept: float = 1e-6) -> ScanResult:
    """Smallest singular value of the boundary matrix on an adaptive energy
    grid (see :func:`scan_grid`) and its refined local minima.

    Every grid-local minimum below ``threshold`` (default: no filter) is
    refined; with ``refine`` only minima whose refined singular value is
    below ``accept`` are returned as eigenenergies.  Shallow minima at
    channel thresholds are rejected this way."""
    Es = scan_grid(E_range, params, step, n_max)
    y = collocation_grid(E_range[1], params, n_rows)
    sv = np.array([sigma_min(E, params, y, n_max, kappa_max) for E in Es])
    thr = np.inf if threshold is None else threshold
    mins = []
    for i in range(1, len(Es) - 1):
        if sv[i] <= sv[i - 1] and sv[i] < sv[i + 1] and sv[i] < thr:
            if refine:
                r = minimize_scalar(lambda E: sigma_min(E, params, y, n_max, kappa_max),
                                    bracket=(Es[i - 1], Es[i], Es[i + 1]), method="golden",
                                    tol=1e-10)
                if r.fun < accept:
                    mins.append((float(r.x), float(r.fun)))
            else:
                mins.append((float(Es[i]), float(sv[i])))
    return ScanResult(Es, sv, mins)


@dataclass
class ExactState:
    """Exact eigenstate in the Landau gauge.

    ``kind`` is "galerkin" (coefficients C[j, n] on Legendre x oscillator
    functions) or "channels" (coefficients on channel modes).
    """

    energy: float
    params: SystemParams
    kind: str
    coeffs: np.ndarray
    parity: int = 0
    basis: object = None
    norm: float = 1.0

    def __call__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        xb, yb = np.broadcast_arrays(x, y)
        if self.kind == "galerkin":
            gb = self.basis
            Px = gb.x_functions(xb.ravel())            # (J, P)
            Qy = gb.y_functions(yb.ravel())            # (N, P)
            vals = np.einsum("jp,jn,np->p", Px, self.coeffs, Qy)
        else:
            modes, refs = self.basis
            vals = sum(c * md.values(xb.ravel(), yb.ravel(), self.params, xr)
                       for c, md, xr in zip(self.coeffs, modes, refs))
        return (vals / self.norm).reshape(xb.shape)

    def on_grid(self, x, y):
        """Psi on the tensor grid, shape (len(y), len(x))."""
        if self.kind == "galerkin":
            gb = self.basis
            return (gb.y_functions(np.asarray(y)).T @ self.coeffs.T @ gb.x_functions(np.asarray(x))) / self.norm
        X, Y = np.meshgrid(x, y)
        return self(X, Y)

    def wall_derivative(self, y, wall: int = 0):
        """d Psi/dx at x = 0 (wall=0) or x = d (wall=1), sampled on y."""
        y = np.asarray(y, float)
        if self.kind == "galerkin":
            gb = self.basis
            dphi = gb.wall_derivatives(wall)
            return (dphi @ self.coeffs @ gb.y_functions(y)) / self.norm
        modes, refs = self.basis
        xw = 0.0 if wall == 0 else self.params.d
        return sum(c * md.dx_values(xw, y, self.params, xr)
                   for c, md, xr in zip(self.coeffs, modes, refs)) / self.norm


def eigenstate(E_star: float, params: SystemParams, y=None, n_max=80, kappa_max=None,
               tol: float = 1e-6) -> ExactState:
    """Eigenstate from the null vector of the boundary matrix at E_star."""
    y = collocation_grid(E_star, params) if y is None else y
    s, v, modes, refs = sigma_min(E_star, params, y, n_max, kappa_max, return_vector=True)
    if s > tol:
        raise NoEigenstateError(f"sigma_min = {s:.3g} at E = {E_star}: not an eigenstate")
    st = ExactState(float(E_star), params, "channels", v, 0, (modes, refs))
    # normalize on the strip by quadrature
    xs = np.linspace(0, params.d, 201)
    ys = collocation_grid(E_star, params, 301, 1.3)
    X, Y = np.meshgrid(xs, ys)
    from scipy.integrate import simpson
    nrm = np.sqrt(simpson(simpson(np.abs(st(X, Y)) ** 2, x=xs, axis=1), x=ys))
    st.norm = float(nrm)
    return st


# --------------------------------------------------- Legendre Galerkin

class GalerkinBasis:
    """phi_j(t) = P_{j+2}(t) - P_j(t), t = 2x/d - 1 (vanishing at both walls),
    times normalized oscillator functions chi_n(y) of frequency Omega."""

    def __init__(self, params: SystemParams, J: int = 110, N: int = 70):
        self.params = params
        self.J = int(J)
        self.N = int(N)
        self.beta = np.sqrt(params.mass * params.Omega / params.hbar)

    def _coef(self, j):
        c = np.zeros(j + 3)
        c[j + 2] = 1.0
        c[j] = -1.0
        return c

    def x_functions(self, x):
        t = 2.0 * np.asarray(x, float) / self.params.d - 1.0
        return np.array([npleg.legval(t, self._coef(j)) for j in range(self.J)])

    def x_derivatives(self, x):
        t = 2.0 * np.asarray(x, float) / self.params.d - 1.0
        return np.array([npleg.legval(t, npleg.legder(self._coef(j)))
                         for j in range(self.J)]) * (2.0 / self.params.d)

    def wall_derivatives(self, wall: int = 0):
        """phi_j'(x) at x = 0 or x = d from P_n'(+-1) = (+-1)^(n+1) n(n+1)/2."""
        sg = -1.0 if wall == 0 else 1.0
        j = np.arange(self.J)
        dP = lambda n: sg ** (n + 1) * n * (n + 1) / 2.0
        return (dP(j + 2) - dP(j)) * (2.0 / self.params.d)

    def y_functions(self, y):
        b = self.beta
        return oscillator_functions(self.N - 1, b * np.asarray(y, float)) * np.sqrt(b)

    def x_matrices(self):
        J = self.J
        t, w = npleg.leggauss(J + 8)
        V = np.array([npleg.legval(t, self._coef(j)) for j in range(J)])
        D = np.array([npleg.legval(t, npleg.legder(self._coef(j))) for j in range(J)])
        D = D * (2.0 / self.params.d)
        s = self.params.d / 2.0
        M = (V * w) @ V.T * s
        K = (D * w) @ D.T * s
        P = -1j * self.params.hbar * (V * w) @ D.T * s
        return M, K, P

    def parity_mask(self, parity: int):
        j = np.arange(self.J)
        n = np.arange(self.N)
        return (((-1.0) ** np.add.outer(j, n)).ravel()) == parity

    def matrices(self, parity: Optional[int] = None):
        """Hamiltonian and overlap; restricted to one inversion-parity block
        (parity of phi_j(t) chi_n(y) is (-1)^(j+n)) when ``parity`` is given."""
        p = self.params
        M, K, P = self.x_matrices()
        N = self.N
        n = np.arange(N)
        i = np.arange(N - 1)
        Y = np.zeros((N, N))
        Y[i, i + 1] = np.sqrt((i + 1) / 2.0) / self.beta
        Y[i + 1, i] = Y[i, i + 1]
        H = (np.kron(p.hbar ** 2 * K / (2 * p.mass), np.eye(N))
             + (p.eB / p.mass) * np.kron(P, Y)
             + np.kron(M, np.diag(p.hbar * p.Omega * (n + 0.5))))
        S = np.kron(M, np.eye(N))
        if parity is None:
            return H, S
        sel = self.parity_mask(parity)
        return H[np.ix_(sel, sel)], S[np.ix_(sel, sel)]


@dataclass
class GalerkinSpectrum:
    energies: np.ndarray
    parities: np.ndarray
    states: list = field(default_factory=list)


def galerkin_spectrum(params: SystemParams, E_range, J: int = 110, N: int = 70,
                      parities=(1, -1), states: bool = True) -> GalerkinSpectrum:
    """Eigenvalues (and eigenstates) in ``E_range`` for the requested parity
    blocks, sorted by energy."""
    gb = GalerkinBasis(params, J, N)
    Es, Ps, Sts = [], [], []
    for par in parities:
        H, S = gb.matrices(par)
        if states:
            ev, V = eigh(H, S, subset_by_value=tuple(E_range))
        else:
            ev = eigh(H, S, subset_by_value=tuple(E_range), eigvals_only=True)
            V = None
        sel = gb.parity_mask(par)
        for k, E in enumerate(ev):
            Es.append(float(E))
            Ps.append(par)
            if states:
                c = np.zeros(gb.J * gb.N, complex)
                c[sel] = V[:, k]
                Sts.append(ExactState(float(E), params, "galerkin", c.reshape(gb.J, gb.N), par, gb))
    order = np.argsort(Es)
    return GalerkinSpectrum(np.array(Es)[order], np.array(Ps)[order],
                            [Sts[i] for i in order] if states else [])


def separable_spectrum(params: SystemParams, E_max: float, n_max: int = 200, j_max: int = 400):
    """B = 0 reference levels hbar omega0 (n + 1/2) + hbar^2 (pi j/d)^2/(2m)."""
    p = params
    out = []
    for n in range(n_max):
        e0 = p.hbar * p.omega0 * (n + 0.5)
        if e0 > E_max:
            break
        for j in range(1, j_max):
            E = e0 + (p.hbar * np.pi * j / p.d) ** 2 / (2 * p.mass)
            if E > E_max:
                break
            out.append(E)
    return np.sort(out)


_C1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_C2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def _fd(F, h, axis, c):
    out = np.zeros_like(F)
    for k, ck in zip(range(-4, 5), c):
        if ck:
            out += ck * np.roll(F, -k, axis)
    return out / h


def hamiltonian_residual(state: ExactState, nx: int = 1201, ny: int = 1201, y_cut=None):
    """||(H - E) Psi|| / ||Psi|| on the interior of a grid, with the
    Landau-gauge Hamiltonian applied by eighth-order central differences."""
    p = state.params
    y_cut = y_cut or 1.4 * np.sqrt(2 * state.energy / (p.mass * p.omega0 ** 2))
    x = np.linspace(0, p.d, nx)
    y = np.linspace(-y_cut, y_cut, ny)
    hx, hy = x[1] - x[0], y[1] - y[0]
    F = state.on_grid(x, y)             # (ny, nx)
    Y = y[:, None]
    hb, m, eB = p.hbar, p.mass, p.eB
    # (p_x + eB y)^2 = -hb^2 d_xx - 2 i hb eB y d_x + eB^2 y^2
    HF = (-hb ** 2 * _fd(F, hx * hx, 1, _C2) - 2j * hb * eB * Y * _fd(F, hx, 1, _C1)
          + (eB * Y) ** 2 * F) / (2 * m)
    HF += -hb ** 2 * _fd(F, hy * hy, 0, _C2) / (2 * m) + 0.5 * m * p.omega0 ** 2 * Y ** 2 * F
    R = (HF - state.energy * F)[4:-4, 4:-4]
    return float(np.linalg.norm(R) / np.linalg.norm(F[4:-4, 4:-4]))
