"""
Linear stability and focal points of the bell orbit
===================================================

Small deviations from the orbit obey a linear equation in the normal
coordinate.  Integrating it around the orbit, including the reflection
matrix at each bounce, gives the monodromy matrix M.  For the bell orbit
|Tr M| > 2: the orbit is unstable, with stretching factor Lambda and
Lyapunov exponent lambda = ln Lambda.  The complex periodic solutions
(Floquet solutions) of the variation equation vanish at focal points;
their number is the Maslov index alpha used by the quantization.
"""

# %%
import numpy as np

from ablscar.model import SystemParams
from ablscar.classical import find_bell_orbit
from ablscar.variation import monodromy_classify, periodic_solutions

params = SystemParams()
orbit = find_bell_orbit(92.55, params)

# %% Monodromy matrix
mono = monodromy_classify(orbit, params.eB)
print("M =\n", np.round(mono.M, 5))
print(f"det M = {np.linalg.det(mono.M):.12f}  (area preserving)")
print(f"Tr M  = {mono.trace:.5f} -> {mono.classification}")
print(f"Lambda = {mono.Lambda:.4f}, lambda = {mono.lam:.4f}, lambda/T = {mono.lambda_T:.4f}")

# %% Floquet solutions and their Wronskian, conserved along the orbit
flo = periodic_solutions(orbit, mono, params.eB)
print(f"Wronskian w = {flo.w:.6f}")

# %% Focal points: zeros of the Floquet solutions along the orbit.  Four are
# isolated, the other four come in two close pairs near the apex.
census = flo.census
print(f"alpha = {census.alpha} focal points")
for fp in census.points:
    print(f"  arc {fp.arc}, s = {fp.s:8.4f}, position = ({fp.position[0]:7.4f}, {fp.position[1]:8.4f})")
