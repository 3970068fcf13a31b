"""
The semiclassical scar wavefunction
===================================

Around each arc of the orbit the wavefunction is a boundary-layer mode: a
transverse profile in the scaled normal coordinate nu, carried along the
orbit with the Floquet solutions.  For eta = 0 the profile is the
separatrix kernel sqrt(nu) J_{-1/4}.  The field in the strip is the sum of
the two arcs, with mirror images that enforce the hard walls.
"""

# %%
import numpy as np

from ablscar.model import SystemParams
from ablscar import semiclassics as sc
from ablscar.analysis import parity_of_field, line_profile

params = SystemParams()
family = sc.BellOrbitFamily(params)
state = sc.quantize_unstable(66, 0.0, params, family, E_start=92.5)
print(f"n = 66, E = {state.E:.5f}")

# %% Evaluate on a grid (symmetric gauge)
x = np.linspace(0, params.d, 101)
y = np.linspace(-8, 8, 161)
X, Y = np.meshgrid(x, y)
F = state(X, Y)
print("grid", F.shape, "max |Psi| =", float(np.abs(F).max()))
print("walls: max |Psi(0, y)| =", float(np.abs(F[:, 0]).max()),
      " max |Psi(d, y)| =", float(np.abs(F[:, -1]).max()))

# %% The primitive boundary-layer amplitude diverges like |z|^(-1/2) at focal
# points, where the Floquet solution z vanishes.  A short stretch of arc
# around each focal point (1% of the orbit length) is therefore masked:
# the field is zero there and largest at the mask edges.  Two focal points
# lie close together near the apex of each arc, so the whole apex region
# is masked.
iy, ix = np.unravel_index(np.argmax(np.abs(F)), F.shape)
print(f"maximum at (x, y) = ({x[ix]:.2f}, {y[iy]:.2f}), next to the apex focal pair")
row = np.abs(state(x, np.full_like(x, -6.6)))
print("|Psi(x, -6.6)| for x = 4.0 .. 6.0:", np.round(row[40:61:2], 3))

# %% Inversion parity about the strip centre (checked in the Landau gauge)
pr = parity_of_field(state, params, 101, 161, gauge="symmetric")
print(f"parity {pr.parity:+d}, residual {pr.residual:.1e}")

# %% Line profile |Psi(x, y0)| averaged over 0.05 d along y0 = -4.7, the
# row of the isolated focal points
prof = line_profile(state, x, -4.7, params=params)
print("profile along y = -4.7, x = 2, 3, ..., 8:", np.round(prof[20:81:10], 3) + 0.0)
