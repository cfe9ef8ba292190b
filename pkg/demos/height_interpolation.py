"""Blend a triangle into a parabola through their height functions.

Prints the H^s energy, ||f_t||_p^p for p = 1.5, 2, 3 and the W^{1,2}
energy along t, together with their second differences.
"""

import numpy as np

from rearrange import fixtures
from rearrange.height_interp import convexity_curve, height_function

t = np.linspace(0.0, 1.0, 11)
A = height_function(fixtures.triangle_radial())
B = height_function(fixtures.parabola_radial())

curves = {
    "H^0.3": convexity_curve(A, B, "hs", t, s=0.3),
    "L^1.5": convexity_curve(A, B, "lp", t, p=1.5),
    "L^2": convexity_curve(A, B, "lp", t, p=2.0),
    "L^3": convexity_curve(A, B, "lp", t, p=3.0),
    "W^1,2": convexity_curve(A, B, "w1p", t, p=2.0),
}
for name, c in curves.items():
    sd = c.second_differences
    shape = "flat" if np.max(np.abs(sd)) <= 1e-6 * c.scale else ("convex" if sd.min() > 0 else "concave" if sd.max() < 0 else "mixed")
    print(f"{name:6s} t=0: {c.values[0]:.5f}  t=1: {c.values[-1]:.5f}  second differences in [{sd.min():+.2e}, {sd.max():+.2e}]  {shape}")
