"""Continuous Steiner symmetrization and the energies it decreases.

Modules
-------
interval_sets   finite interval unions and their symmetric rearrangement flow
grid_functions  sampled functions, level sets and layer-cake reconstruction
symmetrize      continuous, truncated and full Steiner symmetrization of grids
energies        fractional seminorms, regularized energies, fractional Laplacian
good_funcs      piecewise-linear profiles and exact derivatives at tau = 0
height_interp   height-function interpolation between radial profiles
thinfilm        explicit stationary states and the descent experiment
cli             command-line front end
"""

__version__ = "0.1.0"
