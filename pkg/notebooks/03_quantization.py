"""
Quantizing the unstable orbit
=============================

The action of the bell orbit plus the magnetic flux it encloses must equal
hbar (2 pi n + eta lambda + pi alpha / 2).  With eta = 0 (the separatrix
mode, which dominates scar formation) this gives one energy per integer n.
The orbit, its Lyapunov exponent and its Maslov index are recomputed at
every trial energy.
"""

# %%
import numpy as np

from ablscar.model import SystemParams
from ablscar import semiclassics as sc

params = SystemParams()
family = sc.BellOrbitFamily(params)

# %% Solve for n = 66..69.  Each solution seeds the next through the level
# spacing 2 pi hbar / T.
states = []
E0 = 92.5
for n in (66, 67, 68, 69):
    st = sc.quantize_unstable(n, 0.0, params, family, E_start=E0)
    states.append(st)
    E0 = st.E + 2 * np.pi * params.hbar / st.point.orbit.period
    print(f"n = {n}: E = {st.E:.5f}, residual = {st.residual:.1e}, "
          f"Lambda = {st.point.mono.Lambda:.3f}, alpha = {st.point.alpha}")

# %% The spacing is close to 2 pi hbar / T
E = np.array([s.E for s in states])
print("spacings:", np.round(np.diff(E), 5))
print("2 pi / T:", round(2 * np.pi / states[0].point.orbit.period, 5))

# %% Validity of the construction: the period must be short compared with
# the Ehrenfest time t_E = ln(N_ph) / (lambda / T).
for st in states:
    dg = sc.ehrenfest_diagnostics(st.point.orbit, st.point.mono, params, st.point.floquet)
    print(f"n = {st.n}: T / t_E = {dg.T / dg.t_Ehr:.3f}, N_ph = {dg.N_ph:.1f}")
