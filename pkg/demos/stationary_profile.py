"""The explicit stationary thin-film profile and the descent experiment.

Checks that the fractional Laplacian of the profile is a quadratic, then
shows the energy of a shifted copy decreasing under truncated
symmetrization while the centered profile stays put.
"""

import numpy as np

from rearrange import fixtures
from rearrange.symmetrize import TruncationSpec
from rearrange.thinfilm import descent_experiment, explicit_solution, stationary_residual

for s in (0.25, 0.45):
    fit = stationary_residual(explicit_solution(1.0, s, 1))
    print(f"s={s}: (-Delta)^s v = {fit.a:.6f} {fit.b:+.6f} x^2, fit residual {fit.residual:.1e}")

s, beta = 0.3, 1.0
taus = np.linspace(0.0, 0.02, 5)
trunc = TruncationSpec(0.1)
for label, shift in (("centered", 0.0), ("shifted", 0.3)):
    rep = descent_experiment(fixtures.stationary(s, grid_n=1025, shift=shift), s, beta, trunc, taus)
    energies = " ".join(f"{e:.6f}" for e in rep.energies)
    print(f"{label:8s} E(tau) = {energies}")
