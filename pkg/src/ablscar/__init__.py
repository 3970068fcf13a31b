"""Asymptotic boundary-layer (ABL) scar wavefunctions on unstable periodic
orbits, with an exact quantum reference solver for a strip resonator."""

__version__ = "0.1.0"
