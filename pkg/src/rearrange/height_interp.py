"""Height functions of radial decreasing profiles and interpolation between them.

For a unit-mass radially nonincreasing ``f`` the height function ``H`` on
(0, 1) is defined by ``int min(f, H(m)) dx = m``.  It is increasing and
convex, ``H'(m)`` is the reciprocal of the measure of ``{f > H(m)}`` and
``f`` is recovered from ``H`` alone.  Interpolating ``H_t = (1-t) H_0 + t H_1``
gives a family of unit-mass profiles along which several energies are
convex in ``t``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .energies import KernelSpec, gagliardo, potential_energy
from .grid_functions import Axis, GridFunction

__all__ = [
    "NotUnitMass",
    "NotDecreasing",
    "DegenerateHessian",
    "RadialProfile",
    "HeightFunction",
    "ConvexityCurve",
    "W1pReport",
    "unit_ball_volume",
    "height_function",
    "reconstruct",
    "interpolate",
    "lp_from_height",
    "w1p_from_height",
    "convexity_curve",
    "potential_convexity",
    "write_curve_csv",
    "read_rad",
    "write_rad",
]


class NotUnitMass(ValueError):
    pass


class NotDecreasing(ValueError):
    pass


class DegenerateHessian(ArithmeticError):
    """More than 5% of the m-cells have a nonpositive second derivative."""


def unit_ball_volume(n: int) -> float:
    return {1: 2.0, 2: math.pi}[n] if n in (1, 2) else math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _simpson(f0, fm, f1, width):
    return width * (f0 + 4.0 * fm + f1) / 6.0


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial samples ``values[k] = f(r[k])`` on a uniform grid ``0 = r[0] < ... < r[-1]``.

    ``f`` is read as piecewise linear in ``r`` and vanishes from ``r[-1]`` on.
    """

    n: int
    r: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)
        if self.n not in (1, 2):
            raise ValueError("n must be 1 or 2")
        if r.ndim != 1 or r.shape != v.shape or r.size < 3:
            raise ValueError("r and values must be 1D arrays of equal length")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("r must start at 0 and increase")
        if np.any(v < 0):
            raise ValueError("values must be nonnegative")

    @property
    def radius(self) -> float:
        return float(self.r[-1])

    def __call__(self, rad):
        return np.interp(np.abs(rad), self.r, self.values, right=0.0)

    def _weight(self, rad):
        return 2.0 * np.ones_like(rad) if self.n == 1 else 2.0 * math.pi * rad

    def mass(self) -> float:
        r0, r1 = self.r[:-1], self.r[1:]
        a, b = self.values[:-1], self.values[1:]
        rm = 0.5 * (r0 + r1)
        return float(np.sum(_simpson(a * self._weight(r0), 0.5 * (a + b) * self._weight(rm), b * self._weight(r1), r1 - r0)))

    def is_nonincreasing(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.values) <= tol * max(1.0, self.values.max())))

    def to_grid(self, axes: Sequence[Axis]) -> GridFunction:
        axes = tuple(axes)
        if len(axes) != self.n:
            raise ValueError("grid dimension does not match the profile")
        return GridFunction.from_callable(lambda *xs: self(np.sqrt(sum(x * x for x in xs))), axes)

    def scaled(self, factor: float) -> "RadialProfile":
        return RadialProfile(self.n, self.r, self.values * factor)


# ------------------------------------------------------------ height function


def _truncated_mass(f: RadialProfile, H: np.ndarray) -> np.ndarray:
    """``int min(f, H) dx`` for each entry of ``H``, exact for piecewise-linear f.

    Since f is nonincreasing, segments left of the one where f crosses H
    are capped (contributing H times their measure) and segments right
    of it contribute their full mass, which is precomputed.
    """
    r, v, w = f.r, f.values, f._weight
    seg_mass = _simpson(v[:-1] * w(r[:-1]), 0.5 * (v[:-1] + v[1:]) * w(0.5 * (r[:-1] + r[1:])), v[1:] * w(r[1:]), np.diff(r))
    after = np.r_[np.cumsum(seg_mass[::-1])[::-1], 0.0]  # mass of segments k, k+1, ...
    h = np.asarray(H, dtype=float)
    # segment k holds the crossing: v[k] > h >= v[k+1]
    k = np.clip(np.searchsorted(-v, -h, side="left") - 1, 0, v.size - 2)
    r0, r1, a, b = r[k], r[k + 1], v[k], v[k + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cut = np.where(a > b, r0 + (a - h) / (a - b) * (r1 - r0), np.where(a > h, r1, r0))
    rs = np.clip(cut, r0, r1)
    ball = unit_ball_volume(f.n) * r0**f.n
    capped = h * ball + _simpson(h * w(r0), h * w(0.5 * (r0 + rs)), h * w(rs), rs - r0)
    fs = np.where(a > b, a + (b - a) * (rs - r0) / (r1 - r0), a)
    free = _simpson(fs * w(rs), 0.5 * (fs + b) * w(0.5 * (rs + r1)), b * w(r1), r1 - rs)
    return capped + free + after[k + 1]


def _level_radius(f: RadialProfile, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Radius of ``{f > h}`` and ``|f'|`` there, for ``0 < h < max f``."""
    v, r = f.values, f.r
    # last index with v > h (v is nonincreasing)
    idx = np.searchsorted(-v, -np.asarray(h, dtype=float), side="left") - 1
    idx = np.clip(idx, 0, v.size - 2)
    a, b = v[idx], v[idx + 1]
    r0, r1 = r[idx], r[idx + 1]
    slope = (a - b) / (r1 - r0)
    rho = r0 + (a - h) / slope
    return rho, slope


@dataclass(frozen=True, eq=False)
class HeightFunction:
    """Samples of ``H`` and its first two derivatives at the midpoints of (0, 1).

    ``dH``/``d2H`` are exact for functions built by :func:`height_function`
    (from the measure of the superlevel sets and its derivative) and are
    blended linearly under interpolation.
    """

    m: np.ndarray
    H: np.ndarray
    dH: np.ndarray
    d2H: np.ndarray
    n: int

    @classmethod
    def from_samples(cls, H, n: int) -> "HeightFunction":
        """Build from ``H`` samples alone; derivatives by central differences."""
        H = np.asarray(H, dtype=float)
        m = (np.arange(H.size) + 0.5) / H.size
        dH = np.gradient(H, m)
        return cls(m, H, dH, np.gradient(dH, m), n)

    @property
    def c_n(self) -> float:
        return unit_ball_volume(self.n)

    @property
    def count(self) -> int:
        return self.m.size

    def radii(self) -> np.ndarray:
        """Radius of the level set at each m: ``(c_n H'(m))^(-1/n)``."""
        return (self.c_n * self.dH) ** (-1.0 / self.n)

    def blend(self, other: "HeightFunction", t: float) -> "HeightFunction":
        if other.n != self.n or other.count != self.count:
            raise ValueError("height functions must share n and the m-grid")
        mix = lambda a, b: (1.0 - t) * a + t * b  # noqa: E731
        return HeightFunction(self.m, mix(self.H, other.H), mix(self.dH, other.dH), mix(self.d2H, other.d2H), self.n)

    def is_convex(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.H) > 0) and np.all(self.d2H >= -tol))


def height_function(f: RadialProfile, count: int = 1024, mass_tol: float = 1e-3) -> HeightFunction:
    """Solve ``int min(f, H(m)) dx = m`` by bisection on the midpoint grid.

    Raises
    ------
    NotUnitMass
        If ``|int f - 1| > mass_tol``.
    NotDecreasing
        If the radial samples increase somewhere.
    """
    if not f.is_nonincreasing():
        raise NotDecreasing("profile must be nonincreasing in r")
    total = f.mass()
    if abs(total - 1.0) > mass_tol:
        raise NotUnitMass(f"mass is {total:.6g}, expected 1")
    m = (np.arange(count) + 0.5) / count
    target = m * total  # renormalize the last bit so H stays below max f
    lo = np.zeros(count)
    hi = np.full(count, float(f.values.max()))
    while np.max(hi - lo) > 1e-13 * hi.max():
        mid = 0.5 * (lo + hi)
        below = _truncated_mass(f, mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    H = 0.5 * (lo + hi)
    rho, slope = _level_radius(f, H)
    c = unit_ball_volume(f.n)
    mu = c * rho**f.n
    dmu = -f.n * c * rho ** (f.n - 1) / slope
    dH = 1.0 / mu
    d2H = -dmu * dH**3
    return HeightFunction(m, H, dH, d2H, f.n)


def reconstruct(H: HeightFunction, samples: int = 2049) -> RadialProfile:
    """Radial profile with height function ``H``.

    ``f(r) = int_0^1 1{rho(m) > r} H'(m) dm`` with ``rho`` the level radius;
    the m-integral up to ``rho(m) = r`` is ``H(m)``, so the profile is the
    curve ``(rho(m), H(m))`` read as a function of ``rho``.  The support
    radius is extrapolated to m = 0 and the center value by a quadratic
    through the three innermost levels.
    """
    rho = H.radii()
    if np.any(np.diff(rho) > 0):
        raise NotDecreasing("level radii must decrease; H' is not increasing")
    R0 = rho[0] + 0.5 * (rho[0] - rho[1])
    xs = np.r_[rho[::-1], R0]
    ys = np.r_[H.H[::-1], 0.0]
    r = np.linspace(0.0, R0, samples)
    vals = np.interp(r, xs, ys)
    inner = r < rho[-1]
    if np.any(inner):
        if np.ptp(rho[-3:]) > 1e-9 * rho[0]:
            coef = np.polyfit(rho[-3:], H.H[-3:], 2)
            vals[inner] = np.maximum(np.polyval(coef, r[inner]), H.H[-1])
        else:
            vals[inner] = H.H[-1]
    vals = np.maximum.accumulate(vals[::-1])[::-1]  # keep it nonincreasing
    vals[-1] = 0.0
    return RadialProfile(H.n, r, vals)


def interpolate(H0: HeightFunction, H1: HeightFunction, t: float, samples: int = 2049) -> RadialProfile:
    """Profile of ``(1 - t) H0 + t H1``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return reconstruct(H0.blend(H1, t), samples)


# ------------------------------------------------------------ functionals


def lp_from_height(H: HeightFunction, p: float) -> float:
    """``||f||_p^p = p int_0^1 H(m)^(p-1) dm``."""
    return float(p * np.mean(H.H ** (p - 1.0)))


@dataclass
class W1pReport:
    value: float
    tail: float
    excluded_cells: int


def _power_tail(m: np.ndarray, g: np.ndarray, width: float) -> float | None:
    """Integral over the last cell of ``A (1-m)^-gamma`` fitted to the last two samples."""
    d1, d2 = 1.0 - m[-1], 1.0 - m[-2]
    if g[-1] <= 0 or g[-2] <= 0:
        return None
    gamma = math.log(g[-1] / g[-2]) / math.log(d2 / d1)
    if not gamma < 1.0:
        return None
    A = g[-1] * d1**gamma
    return A * width ** (1.0 - gamma) / (1.0 - gamma)


def w1p_from_height(H: HeightFunction, p: float, full_output: bool = False):
    """``[f]^p_{W^{1,p}}`` from the height function.

    ``C_{n,p} int_0^1 H'^(p(2+1/n)-2) H''^(1-p) dm`` with
    ``C_{n,p} = n^p c_n^(p/n)``.  The last cell, where ``H'`` blows up, is
    integrated with a power law fitted to the two last samples.

    Raises
    ------
    DegenerateHessian
        If more than 5% of the cells have ``H'' <= 0``.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    n = H.n
    bad = H.d2H <= 0
    if bad.mean() > 0.05:
        raise DegenerateHessian(f"{int(bad.sum())} of {bad.size} cells have H'' <= 0")
    const = n**p * H.c_n ** (p / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(bad, 0.0, H.dH ** (p * (2.0 + 1.0 / n) - 2.0) * H.d2H ** (1.0 - p))
    dm = 1.0 / H.count
    body = float(np.sum(g[:-1]) * dm)
    tail = _power_tail(H.m, g, dm)
    if tail is None or bad[-1] or bad[-2]:
        tail = float(g[-1] * dm)
    value = const * (body + tail)
    if full_output:
        return W1pReport(value=value, tail=const * tail, excluded_cells=int(bad.sum()))
    return value


@dataclass
class ConvexityCurve:
    functional: str
    params: dict
    t: np.ndarray
    values: np.ndarray
    second_differences: np.ndarray = field(init=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.second_differences = self.values[:-2] - 2.0 * self.values[1:-1] + self.values[2:]

    @property
    def min_second_difference(self) -> float:
        return float(self.second_differences.min())

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))


def _grid_for(profiles: Sequence[RadialProfile], grid_n: int) -> tuple[Axis, ...]:
    R = max(p.radius for p in profiles)
    L = 1.25 * R
    return tuple(Axis(-L, L, grid_n) for _ in range(profiles[0].n))


def convexity_curve(
    H0: HeightFunction,
    H1: HeightFunction,
    functional: str,
    t_grid,
    *,
    s: float | None = None,
    p: float | None = None,
    V: Callable | None = None,
    grid_n: int = 2049,
) -> ConvexityCurve:
    """Evaluate a functional along ``t -> f_t`` and its second differences.

    ``functional`` is one of ``"hs"`` (needs ``s``; squared ``H^s``
    seminorm on a grid), ``"lp"`` (needs ``p``; ``||f_t||_p^p``), ``"w1p"``
    (needs ``p``; height formula) or ``"potential"`` (needs ``V``).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if functional == "lp":
        vals = [lp_from_height(H0.blend(H1, t), p) for t in t_grid]
        return ConvexityCurve("lp", {"p": p}, t_grid, vals)
    if functional == "w1p":
        vals = [w1p_from_height(H0.blend(H1, t), p) for t in t_grid]
        return ConvexityCurve("w1p", {"p": p, "n": H0.n}, t_grid, vals)
    if functional not in ("hs", "potential"):
        raise ValueError(f"unknown functional {functional!r}")
    profiles = [interpolate(H0, H1, t) for t in t_grid]
    axes = _grid_for(profiles, grid_n if H0.n == 1 else min(grid_n, 257))
    grids = [pr.to_grid(axes) for pr in profiles]
    if functional == "hs":
        spec = KernelSpec(s=s, p=2.0)
        vals = [gagliardo(g, spec).value for g in grids]
        return ConvexityCurve("hs", {"s": s, "n": H0.n}, t_grid, vals)
    vals = [potential_energy(g, V) for g in grids]
    return ConvexityCurve("potential", {"n": H0.n}, t_grid, vals)


def _ball_integral(V: Callable, n: int, radii: np.ndarray) -> np.ndarray:
    """``int_{|x| < rho} V(|x|) dx`` for each radius."""
    top = float(radii.max())
    r = np.linspace(0.0, top, 8193)
    dens = V(r) * (2.0 if n == 1 else 2.0 * math.pi * r)
    cum = integrate.cumulative_simpson(dens, x=r, initial=0.0)
    return np.interp(radii, r, cum)


def potential_convexity(H0: HeightFunction, H1: HeightFunction, V: Callable, dV: Callable, t: float) -> tuple[float, float]:
    """First and second t-derivatives of ``int V(|x|) f_t dx`` in closed form.

    ``d/dt = int (H1' - H0') [Phi(rho_t) - V(rho_t) |B(rho_t)|] dm`` and
    ``d2/dt2 = int V'(rho_t) H_t'^(-2-1/n) (H1' - H0')^2 / (n c_n^(1/n)) dm``
    with ``rho_t`` the level radius and ``Phi`` the integral of V over a ball.
    """
    Ht = H0.blend(H1, t)
    n, c = Ht.n, Ht.c_n
    rho = Ht.radii()
    diff = H1.dH - H0.dH
    first = np.mean(diff * (_ball_integral(V, n, rho) - V(rho) * c * rho**n))
    second = np.mean(dV(rho) * Ht.dH ** (-2.0 - 1.0 / n) * diff**2) / (n * c ** (1.0 / n))
    return float(first), float(second)


# ------------------------------------------------------------ files


def write_curve_csv(curve: ConvexityCurve, path) -> None:
    """Columns t, value, second_difference (empty at the two end points)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value", "second_difference"])
        for k, (t, v) in enumerate(zip(curve.t, curve.values)):
            sd = repr(float(curve.second_differences[k - 1])) if 0 < k < curve.t.size - 1 else ""
            w.writerow([repr(float(t)), repr(float(v)), sd])


def write_rad(f: RadialProfile, path) -> None:
    doc = {"format": "rad", "version": 1, "n": f.n, "r": f.r.tolist(), "values": f.values.tolist()}
    Path(path).write_text(json.dumps(doc) + "\n")


def read_rad(path) -> RadialProfile:
    doc = json.loads(Path(path).read_text())
    try:
        return RadialProfile(int(doc["n"]), doc["r"], doc["values"])
    except KeyError as exc:
        raise ValueError(f"malformed radial profile file: {exc}") from exc
