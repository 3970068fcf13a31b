"""
Exact eigenstates of the strip
==============================

Two exact solvers are provided.  The Galerkin solver expands in
P_{j+2}(t) - P_j(t) (Legendre polynomials in t = 2x/d - 1, vanishing at
both walls) times oscillator functions of y, and diagonalizes the
Hamiltonian separately in the two inversion-parity blocks.  The
collocation solver matches channel modes (plane waves along x times
shifted oscillator states in y) to the wall conditions and looks for
energies where the boundary matrix becomes singular.  At B = 0 the problem
separates, which gives an exact check of both.
"""

# %%
import numpy as np

from ablscar.model import SystemParams
from ablscar import exactqm as ex

# %% B = 0: E = hbar omega0 (n + 1/2) + (hbar j pi / d)^2 / 2m
p0 = SystemParams(B=0.0)
ref = ex.separable_spectrum(p0, 12.0)
ref = ref[(ref > 10.0) & (ref < 12.0)]
g = ex.galerkin_spectrum(p0, (10.0, 12.0), J=40, N=20, states=False)
print("Galerkin    max error:", float(np.max(np.abs(g.energies - ref))))

# The collocation scan refines its energy grid near channel thresholds,
# where singular-value minima become narrow.
scan = ex.spectrum_scan((10.0, 12.0), p0, n_max=40, step=0.01, n_rows=200)
found = np.array([m[0] for m in scan.minima])
print("collocation max error:", float(np.max(np.abs(found - ref))),
      f"({len(found)} of {len(ref)} levels, {len(scan.energies)} grid points)")

# %% B = 1: a small window of the benchmark spectrum.  The full window
# 86 < E < 100 with J = 110, N = 70 takes about a minute.
p = SystemParams()
spec = ex.galerkin_spectrum(p, (92.0, 93.0), J=90, N=56)
print(f"{len(spec.states)} states in (92, 93)")
for st in spec.states[:6]:
    print(f"  E = {st.energy:.5f}, parity {st.parity:+d}")
