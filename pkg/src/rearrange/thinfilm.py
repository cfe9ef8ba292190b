"""Stationary states of the rescaled fractional thin-film energy.

``E(v) = c_{n,s} [v]^2_{H^s} + (beta/2) int |y|^2 v`` has, up to scaling,
the single critical point ``v = lam^-s / kappa * (1 - lam |x|^2)_+^(1+s)``,
for which ``(-Delta)^s v`` is an exact quadratic on the support.  This
module builds that profile, measures how far a profile is from
satisfying the stationary equation, and runs the truncated
symmetrization descent experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, special

from .energies import KernelSpec, frac_laplacian_radial, thin_film_energy
from .grid_functions import GridFunction
from .height_interp import RadialProfile
from .symmetrize import TruncationSpec, steiner_truncated

__all__ = [
    "StationaryProfile",
    "RescalingExponents",
    "StationaryFit",
    "DescentReport",
    "kappa",
    "explicit_solution",
    "stationary_residual",
    "barenblatt_exponents",
    "descent_experiment",
]


def kappa(s: float, n: int) -> float:
    """``4^s Gamma(s+2) Gamma(s+n/2) / Gamma(n/2)``."""
    if not 0.0 <= s < 1.0:
        raise ValueError("s must lie in [0, 1)")
    # this grouping rounds kappa(1/2, 1) to exactly 3/2; others land one ulp off
    return special.gamma(s + 2.0) * (4.0**s * special.gamma(s + 0.5 * n) / special.gamma(0.5 * n))


@dataclass(frozen=True)
class RescalingExponents:
    alpha: float
    beta: float


def barenblatt_exponents(n: int, s: float) -> RescalingExponents:
    d = n + 2.0 * (1.0 + s)
    return RescalingExponents(alpha=n / d, beta=1.0 / d)


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    lam: float
    s: float
    n: int
    kappa: float
    profile: RadialProfile

    @property
    def support_radius(self) -> float:
        return self.lam**-0.5

    @property
    def peak(self) -> float:
        return self.lam ** (-self.s) / self.kappa

    def mass(self) -> float:
        return self.profile.mass()

    def to_grid(self, axes) -> GridFunction:
        return self.profile.to_grid(axes)


def _profile_values(lam, s, n, r):
    return lam ** (-s) / kappa(s, n) * np.maximum(1.0 - lam * r * r, 0.0) ** (1.0 + s)


def explicit_solution(lam: float, s: float, n: int = 1, samples: int = 4097) -> StationaryProfile:
    """Sample the explicit profile on a uniform radial grid over its support."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    R = lam**-0.5
    r = np.linspace(0.0, R, samples)
    vals = _profile_values(lam, s, n, r)
    vals[-1] = 0.0
    return StationaryProfile(lam, s, n, kappa(s, n), RadialProfile(n, r, vals))


@dataclass
class StationaryFit:
    """Least-squares fit ``(-Delta)^s v ~ a + b |x|^2`` on interior points."""

    points: np.ndarray
    laplacian: np.ndarray
    a: float
    b: float
    residual: float
    beta_implied: float
    params: dict = field(default_factory=dict)


def stationary_residual(v, s: float | None = None, points=None, fraction: float = 0.8, count: int = 17) -> StationaryFit:
    """Fit a quadratic to ``(-Delta)^s v`` on ``|x| <= fraction * radius``.

    Parameters
    ----------
    v : StationaryProfile or RadialProfile
    s : float
        Required when ``v`` is a bare RadialProfile.
    points : array_like, optional
        Radii for the fit; ``count`` equispaced radii by default.

    Returns
    -------
    StationaryFit
        ``residual`` is the largest fit deviation relative to the largest
        ``|(-Delta)^s v|``.  ``beta_implied = -4 b`` is the confinement
        strength for which ``v`` is critical for ``E`` (its first
        variation is ``2 (-Delta)^s v + (beta/2) |y|^2``).
    """
    prof = v.profile if isinstance(v, StationaryProfile) else v
    s = v.s if isinstance(v, StationaryProfile) else s
    if s is None:
        raise ValueError("s is required for a bare radial profile")
    if points is None:
        points = np.linspace(0.0, fraction * prof.radius, count)
    points = np.asarray(points, dtype=float)
    lap = frac_laplacian_radial(prof, s, points, n=prof.n)
    A = np.stack([np.ones_like(points), points**2], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, lap, rcond=None)
    resid = float(np.max(np.abs(A @ np.array([a, b]) - lap)) / np.max(np.abs(lap)))
    return StationaryFit(points, lap, float(a), float(b), resid, float(-4.0 * b), {"s": s, "n": prof.n})


@dataclass
class DescentReport:
    tau: np.ndarray
    energies: np.ndarray
    errors: np.ndarray
    support_preserved: list[bool]
    mass_errors: np.ndarray
    clip_counts: list[int]

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.energies) < 0))

    def max_relative_change(self) -> float:
        return float(np.max(np.abs(self.energies - self.energies[0])) / abs(self.energies[0]))

    def slope(self) -> float:
        """Least-squares slope of E against tau."""
        return float(np.polyfit(self.tau, self.energies, 1)[0])


def _component_masses(g: GridFunction, labels: np.ndarray, count: int) -> np.ndarray:
    return np.asarray(ndimage.sum(g.samples, labels, index=np.arange(1, count + 1))) * g.cell_volume


def descent_experiment(v: GridFunction, s: float, beta: float, trunc: TruncationSpec, tau_grid, n_heights: int = 512) -> DescentReport:
    """Energy along ``tau -> truncated symmetrization of v``.

    Every member, including tau = 0, is produced by the same level-set
    reconstruction.  Also records, per tau, whether the support is unchanged and the
    largest relative mass change over connected components of the support.
    """
    spec = KernelSpec(s=s, p=2.0)
    labels, count = ndimage.label(v.support())
    base_masses = _component_masses(v, labels, count)
    energies, errors, supports, mass_err, clips = [], [], [], [], []
    for tau in tau_grid:
        # tau = 0 goes through the same reconstruction so the curve is consistent
        g, info = steiner_truncated(v, float(tau), trunc, n_heights=n_heights, full_output=True)
        rep = thin_film_energy(g, spec, beta)
        energies.append(rep.value)
        errors.append(rep.error_estimate)
        supports.append(bool(np.array_equal(g.support(), v.support())))
        masses = _component_masses(g, labels, count)
        mass_err.append(float(np.max(np.abs(masses - base_masses) / base_masses)) if count else 0.0)
        clips.append(int(info["clip_count"]))
    return DescentReport(
        tau=np.asarray(tau_grid, dtype=float),
        energies=np.asarray(energies),
        errors=np.asarray(errors),
        support_preserved=supports,
        mass_errors=np.asarray(mass_err),
        clip_counts=clips,
    )
