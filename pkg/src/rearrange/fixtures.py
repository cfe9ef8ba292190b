"""Named test functions shared by the CLI, the acceptance suite and the tests.

Grid fixtures are :class:`GridFunction` objects; analytic fixtures are
:class:`GoodProfile` (piecewise linear slices) or :class:`RadialProfile`.
"""

from __future__ import annotations

import math

import numpy as np

from .good_funcs import GoodProfile, ProfileSlice
from .grid_functions import Axis, GridFunction
from .height_interp import RadialProfile
from .thinfilm import explicit_solution

__all__ = [
    "UnknownFixture",
    "tent",
    "triangle",
    "shifted_triangle",
    "two_bump",
    "three_bump",
    "asymmetric_peak",
    "two_cones",
    "indicator",
    "stationary",
    "triangle_profile",
    "two_bump_profile",
    "three_bump_profile",
    "asymmetric_peak_profile",
    "two_cones_profile",
    "triangle_radial",
    "parabola_radial",
    "cosine_radial",
    "cone_radial",
    "paraboloid_radial",
    "grid_fixture",
    "GRID_FIXTURES",
]


class UnknownFixture(KeyError):
    pass


def tent(x, center, half_width, height=1.0):
    return height * np.maximum(0.0, 1.0 - np.abs(x - center) / half_width)


# bump layouts: (center, half_width, height)
TWO_BUMP = ((-0.9, 0.5, 1.0), (0.7, 0.4, 0.8))
THREE_BUMP = ((-1.1, 0.4, 0.7), (0.1, 0.3, 1.0), (1.0, 0.35, 0.6))


def _line(grid_n: int, half: float = 2.0) -> Axis:
    return Axis(-half, half, grid_n)


def triangle(grid_n: int = 1025, half: float = 2.0) -> GridFunction:
    """``(1 - |x|)_+``."""
    return GridFunction.from_callable(lambda x: tent(x, 0.0, 1.0), [_line(grid_n, half)])


def shifted_triangle(shift: float = 0.7, grid_n: int = 1025, half: float = 2.0) -> GridFunction:
    return GridFunction.from_callable(lambda x: tent(x, shift, 1.0), [_line(grid_n, half)])


def _bumps(layout, grid_n, half):
    return GridFunction.from_callable(
        lambda x: np.max([tent(x, c, w, h) for c, w, h in layout], axis=0), [_line(grid_n, half)]
    )


def two_bump(grid_n: int = 1025, half: float = 2.0) -> GridFunction:
    """Two tents of different sizes on opposite sides of the origin."""
    return _bumps(TWO_BUMP, grid_n, half)


def three_bump(grid_n: int = 1025, half: float = 2.0) -> GridFunction:
    return _bumps(THREE_BUMP, grid_n, half)


def asymmetric_peak(grid_n: int = 1025, half: float = 2.0, center: float = 0.1, slopes=(1.0, 2.0)) -> GridFunction:
    """Peak of height 1 at ``center`` rising with slope ``slopes[0]`` and falling with ``slopes[1]``."""
    a, b = slopes

    def f(x):
        return np.where(x < center, 1.0 - a * (center - x), 1.0 - b * (x - center))

    return GridFunction.from_callable(f, [_line(grid_n, half)])


def _cones(x, y):
    upper = 1.0 - np.hypot(x, y - 2.0)
    lower = 2.0 - 2.0 * np.hypot(x, y + 2.0)
    return np.maximum(np.maximum(upper, lower), 0.0)


def two_cones(grid_n: int = 129) -> GridFunction:
    """Two cones: ``1 - |(x, y-2)|`` and ``2 - 2|(x, y+2)|``, symmetrized along y."""
    axes = (Axis(-1.75, 1.75, grid_n), Axis(-3.5, 3.5, 2 * grid_n - 1))
    return GridFunction.from_callable(_cones, axes)


def indicator(grid_n: int = 2048) -> GridFunction:
    """``1_(0,1)`` on a grid whose cells (centered at the nodes) tile (0, 1) exactly.

    Read with the cell-constant interpolant this is exact; read piecewise
    linearly it differs from the indicator in one cell at each jump.
    """
    dx = 2.0 / grid_n
    lo = -0.5 + 0.5 * dx
    ax = Axis(lo, lo + dx * (grid_n - 1), grid_n)
    return GridFunction.from_callable(lambda x: ((x > 0) & (x < 1)).astype(float), [ax])


def stationary(s: float = 0.25, lam: float = 1.0, n: int = 1, grid_n: int = 1025, shift: float = 0.0) -> GridFunction:
    """Explicit stationary profile sampled on a grid, optionally translated along the last axis."""
    prof = explicit_solution(lam, s, n).profile
    half = 2.0 * lam**-0.5
    axes = tuple(_line(grid_n if d == n - 1 else (grid_n + 1) // 2, half) for d in range(n))
    return GridFunction.from_callable(
        lambda *xs: prof(np.sqrt(sum(x * x for x in xs[:-1]) + (xs[-1] - shift) ** 2)), axes
    )


# ------------------------------------------------------------ good profiles


def _tents_slice(layout) -> ProfileSlice:
    xs, fs = [], []
    for c, w, h in sorted(layout):
        xs += [c - w, c, c + w]
        fs += [0.0, h, 0.0]
    return ProfileSlice(0.0, 1.0, xs, fs)


def triangle_profile() -> GoodProfile:
    return GoodProfile.one_d([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])


def two_bump_profile() -> GoodProfile:
    return GoodProfile((_tents_slice(TWO_BUMP),), n=1)


def three_bump_profile() -> GoodProfile:
    return GoodProfile((_tents_slice(THREE_BUMP),), n=1)


def asymmetric_peak_profile(center: float = 0.1, slopes=(1.0, 2.0), height: float = 1.0) -> GoodProfile:
    a, b = slopes
    return GoodProfile.one_d([center - height / a, center, center + height / b], [0.0, height, 0.0])


def two_cones_profile(slices: int = 20, per_cone: int = 81) -> GoodProfile:
    """Two-cone function as midpoint slices in x, each cone sampled at ``per_cone`` points in y."""
    width = 2.0 / slices
    out = []
    for k in range(slices):
        x = -1.0 + (k + 0.5) * width
        rho = math.sqrt(1.0 - x * x)
        lower = np.linspace(-2.0 - rho, -2.0 + rho, per_cone)
        upper = np.linspace(2.0 - rho, 2.0 + rho, per_cone)
        ys = np.concatenate([lower, upper])
        fs = _cones(x, ys)
        fs[[0, per_cone - 1, per_cone, -1]] = 0.0
        out.append(ProfileSlice(x, width, ys, fs))
    return GoodProfile(tuple(out), n=2)


# ------------------------------------------------------------ radial, unit mass


def _radial(n, radius, func, samples=2049) -> RadialProfile:
    r = np.linspace(0.0, radius, samples)
    vals = func(r)
    vals[-1] = 0.0
    return RadialProfile(n, r, vals)


def triangle_radial() -> RadialProfile:
    return _radial(1, 1.0, lambda r: 1.0 - r)


def parabola_radial(radius: float = 1.5) -> RadialProfile:
    """``a (1 - r^2/R^2)`` with unit mass in 1D."""
    return _radial(1, radius, lambda r: 0.75 / radius * (1.0 - (r / radius) ** 2))


def cosine_radial(radius: float = 0.8) -> RadialProfile:
    """``cos^2(pi r / 2R) / R``, unit mass in 1D."""
    return _radial(1, radius, lambda r: np.cos(0.5 * np.pi * r / radius) ** 2 / radius)


def cone_radial(radius: float = 1.0) -> RadialProfile:
    """2D cone of unit mass."""
    return _radial(2, radius, lambda r: 3.0 / (math.pi * radius**2) * (1.0 - r / radius))


def paraboloid_radial(radius: float = 1.2) -> RadialProfile:
    """2D paraboloid cap of unit mass."""
    return _radial(2, radius, lambda r: 2.0 / (math.pi * radius**2) * (1.0 - (r / radius) ** 2))


GRID_FIXTURES = {
    "triangle": triangle,
    "shifted-triangle": shifted_triangle,
    "two-bump": two_bump,
    "three-bump": three_bump,
    "asymmetric-peak": asymmetric_peak,
    "two-cones": two_cones,
    "indicator": indicator,
    "stationary": stationary,
}


def grid_fixture(name: str, **params) -> GridFunction:
    try:
        factory = GRID_FIXTURES[name]
    except KeyError:
        raise UnknownFixture(name) from None
    return factory(**params)
