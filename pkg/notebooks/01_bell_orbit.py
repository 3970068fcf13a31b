"""
The bell-shaped periodic orbit of the strip resonator
=====================================================

A charged particle moves in the strip 0 <= x <= d between two hard walls,
confined transversally by u(y) = m omega0^2 y^2 / 2 and bent by a
perpendicular magnetic field B.  At E = 92.55 (units hbar = m = e = B = 1,
omega0 = 2, d = 10) there is a two-bounce orbit shaped like a bell: it
leaves the origin of the left wall, bounces once on the right wall and
returns.  This script finds it by shooting on the launch angle and shows a
Poincare section of the surrounding (mostly chaotic) dynamics.
"""

# %%
import numpy as np

from ablscar.model import SystemParams
from ablscar.classical import find_bell_orbit, poincare_section

params = SystemParams()
print(params)

# %% Shoot for the orbit
orbit = find_bell_orbit(92.55, params)
print(f"period T        = {orbit.period:.4f}")
print(f"length L        = {orbit.length:.4f}")
print(f"launch angle    = {orbit.launch_angle:.4f} rad")
print(f"enclosed area   = {orbit.area:.4f}")
y_b, p_b = orbit.birkhoff(params)
print(f"Birkhoff point  = (y, p_y) = ({y_b:.4f}, {p_b:.4f})")

# %% The orbit is made of two arcs; each stores arclength samples, positions,
# velocities and the signed curvature of the path.
for i, arc in enumerate(orbit.arcs):
    k = np.argmax(np.abs(arc.r[:, 1]))
    print(f"arc {i}: {len(arc.s)} samples, farthest from the axis at "
          f"({arc.r[k, 0]:.3f}, {arc.r[k, 1]:.3f}), curvature range "
          f"[{arc.kappa.min():.3f}, {arc.kappa.max():.3f}]")
for r in orbit.reflections:
    print(f"bounce on wall {r.wall} at {np.round(r.position, 4)}, angle {r.theta:.4f}")

# %% Poincare section on the left wall: successive bounces (y, p_y) of a few
# trajectories started inside the energy ellipse.
rng = np.random.default_rng(0)
seeds = [(rng.uniform(-4, 4), rng.uniform(-8, 8)) for _ in range(4)]
sections = poincare_section(92.55, params, seeds, n_bounces=30)
for seed, pts in zip(seeds, sections):
    spread = np.ptp(pts, axis=0)
    print(f"seed {np.round(seed, 2)}: {len(pts)} bounces, spread in (y, p_y) = {np.round(spread, 2)}")
