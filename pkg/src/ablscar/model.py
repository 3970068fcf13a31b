"""Physical system: a strip resonator with parabolic confinement in a
perpendicular, uniform magnetic field.

The particle moves in the strip ``0 <= x <= d`` (hard walls at ``x = 0`` and
``x = d``) under the potential ``U(y) = m omega0^2 y^2 / 2`` and the field
``B e_z``.  Everything is expressed in terms of the constants held by
:class:`SystemParams`; the defaults are natural units ``hbar = m = e = B = 1``
(so ``omega_c = 1`` and ``l_B = 1``) with ``d = 10`` and ``omega0 = 2``.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict, replace
from typing import NamedTuple

import numpy as np


class InputError(ValueError):
    """Raised when an argument violates a documented precondition."""


@dataclass(frozen=True)
class SystemParams:
    """Constants of the benchmark system.

    ``charge * B`` is used with its sign: for ``charge * B > 0`` the
    cyclotron motion is clockwise.  ``energy_window`` is only a hint for
    scans and is not used by any formula.
    """

    hbar: float = 1.0
    mass: float = 1.0
    charge: float = 1.0
    B: float = 1.0
    omega0: float = 2.0
    d: float = 10.0
    energy_window: tuple = (86.0, 100.0)

    def __post_init__(self):
        if not self.hbar > 0:
            raise InputError("hbar must be positive")
        if not self.mass > 0:
            raise InputError("mass must be positive")
        if not self.d > 0:
            raise InputError("wall separation d must be positive")
        if not self.omega0 >= 0:
            raise InputError("omega0 must be non-negative")

    @property
    def eB(self) -> float:
        """Signed product charge*B (momentum per length)."""
        return self.charge * self.B

    @property
    def omega_c(self) -> float:
        """Cyclotron frequency |eB|/m."""
        return abs(self.eB) / self.mass

    @property
    def omega_c_signed(self) -> float:
        return self.eB / self.mass

    @property
    def Omega(self) -> float:
        """Frequency of the transverse oscillator, sqrt(omega_c^2 + omega0^2)."""
        return float(np.hypot(self.omega_c, self.omega0))

    @property
    def l_B(self) -> float:
        """Magnetic length sqrt(hbar/(m omega_c)); infinite for B = 0."""
        if self.omega_c == 0:
            return np.inf
        return float(np.sqrt(self.hbar / (self.mass * self.omega_c)))

    def with_(self, **kw) -> "SystemParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["energy_window"] = list(self.energy_window)
        return out


class PotentialJet(NamedTuple):
    """Taylor coefficients of u along a normal line: u(n) ~ u0 + u1 n + u2 n^2."""

    u0: float
    u1: float
    u2: float


class ParabolicPotential:
    """U(x, y) = m omega0^2 y^2 / 2 (independent of x).

    Provides value, gradient and Hessian; any object with the same three
    methods can be used wherever a potential is accepted.
    """

    def __init__(self, params: SystemParams):
        self.k = params.mass * params.omega0 ** 2

    def value(self, x, y):
        return 0.5 * self.k * np.asarray(y, float) ** 2 + 0.0 * np.asarray(x, float)

    def gradient(self, x, y):
        y = np.asarray(y, float)
        return np.stack([np.zeros_like(y) + 0.0 * np.asarray(x, float), self.k * y], axis=-1)

    def hessian(self, x, y):
        y = np.asarray(y, float) + 0.0 * np.asarray(x, float)
        h = np.zeros(y.shape + (2, 2))
        h[..., 1, 1] = self.k
        return h


def potential_jets(point, normal, params: SystemParams, potential=None) -> PotentialJet:
    """Value, first and half-second derivative of the potential along ``normal``.

    ``u1 = dU/dn`` and ``u2 = (1/2) d^2U/dn^2`` at ``point``; for the parabolic
    potential the quadratic reconstruction is exact.
    """
    normal = np.asarray(normal, float)
    nn = float(np.hypot(*normal))
    if abs(nn - 1.0) > 1e-8:
        raise InputError(f"normal must be a unit vector (|n| = {nn})")
    pot = potential if potential is not None else ParabolicPotential(params)
    x, y = float(point[0]), float(point[1])
    u0 = float(pot.value(x, y))
    u1 = float(pot.gradient(x, y) @ normal)
    u2 = 0.5 * float(normal @ pot.hessian(x, y) @ normal)
    return PotentialJet(u0, u1, u2)


def jets_along(r, e_n, params: SystemParams):
    """Vectorized potential jets for the parabolic potential.

    ``r`` and ``e_n`` are (N, 2) arrays; returns (u0, u1, u2) arrays.
    """
    k = params.mass * params.omega0 ** 2
    y = r[:, 1]
    ny = e_n[:, 1]
    return 0.5 * k * y ** 2, k * y * ny, 0.5 * k * ny ** 2


def vector_potential_symmetric(x, y, params: SystemParams):
    """A = B(-y, x)/2."""
    return -0.5 * params.B * np.asarray(y), 0.5 * params.B * np.asarray(x)


def vector_potential_landau(x, y, params: SystemParams):
    """A = -B y e_x; the gauge in which the strip problem separates."""
    return -params.B * np.asarray(y), 0.0 * np.asarray(x)


def symmetric_to_landau_phase(x, y, params: SystemParams):
    """Phase factor g with Psi_Landau = g * Psi_symmetric."""
    return np.exp(-1j * params.eB * np.asarray(x) * np.asarray(y) / (2 * params.hbar))


BENCHMARK = SystemParams()
