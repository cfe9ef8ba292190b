"""Nonnegative functions sampled on uniform 1D/2D grids.

Samples sit on the nodes ``min + i * (max - min) / (count - 1)`` of each
axis and are read as a piecewise-linear function along the last axis,
which is the symmetrization direction.  Boundary samples must vanish so
the function is compactly supported inside the box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .interval_sets import IntervalUnion

__all__ = [
    "Axis",
    "GridFunction",
    "HeightGrid",
    "InvalidGridFunction",
    "NonNestedSections",
    "superlevel_section",
    "slice_sections",
    "layer_cake",
    "reconstruct_interpolated",
    "read_gfn",
    "write_gfn",
]


class InvalidGridFunction(ValueError):
    pass


class NonNestedSections(ValueError):
    """A higher section sticks out of a lower one by more than a grid cell."""


@dataclass(frozen=True)
class Axis:
    min: float
    max: float
    count: int

    def __post_init__(self):
        if self.count < 3 or not self.max > self.min:
            raise InvalidGridFunction(f"bad axis {self}")

    @property
    def step(self) -> float:
        return (self.max - self.min) / (self.count - 1)

    @property
    def points(self) -> np.ndarray:
        return self.min + self.step * np.arange(self.count)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Sampled function; ``samples.shape`` equals the axis counts."""

    axes: tuple[Axis, ...]
    samples: np.ndarray

    def __post_init__(self):
        axes = tuple(self.axes)
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "samples", samples)
        if len(axes) not in (1, 2):
            raise InvalidGridFunction("only 1D and 2D grids are supported")
        if samples.shape != tuple(a.count for a in axes):
            raise InvalidGridFunction(
                f"samples shape {samples.shape} does not match axes"
            )
        if not np.all(np.isfinite(samples)):
            raise InvalidGridFunction("samples must be finite")
        if np.any(samples < 0):
            raise InvalidGridFunction("samples must be nonnegative")
        for d in range(samples.ndim):
            edge = np.take(samples, [0, -1], axis=d)
            if np.any(edge != 0):
                raise InvalidGridFunction("boundary samples must be zero")
        samples.setflags(write=False)

    @classmethod
    def from_callable(cls, func, axes: Sequence[Axis]) -> "GridFunction":
        axes = tuple(axes)
        mesh = np.meshgrid(*[a.points for a in axes], indexing="ij")
        values = np.asarray(func(*mesh), dtype=float)
        values = np.maximum(values, 0.0)
        for d in range(values.ndim):
            idx = [slice(None)] * values.ndim
            idx[d] = [0, -1]
            values[tuple(idx)] = 0.0
        return cls(axes, values)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(a.step for a in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def coords(self, axis: int = -1) -> np.ndarray:
        return self.axes[axis].points

    def with_samples(self, samples: np.ndarray) -> "GridFunction":
        return GridFunction(self.axes, samples)

    def rows(self) -> np.ndarray:
        """Samples as a 2D array of slices along the last axis."""
        return self.samples.reshape(-1, self.axes[-1].count)

    def max(self) -> float:
        return float(self.samples.max())

    def integral(self) -> float:
        # nodal sum equals the trapezoid rule because boundary samples vanish
        return float(self.samples.sum() * self.cell_volume)

    def lp_norm(self, p: float) -> float:
        if np.isinf(p):
            return self.max()
        return float((np.sum(self.samples**p) * self.cell_volume) ** (1.0 / p))

    def transpose(self) -> "GridFunction":
        if self.dim == 1:
            return self
        return GridFunction(self.axes[::-1], self.samples.T.copy())

    def support(self, rel_tol: float = 1e-12) -> np.ndarray:
        """Boolean mask of nodes where the function is (numerically) positive."""
        return self.samples > rel_tol * max(self.max(), 1e-300)


@dataclass(frozen=True)
class HeightGrid:
    """Midpoint rule on (0, top) with ``count`` equal cells."""

    top: float
    count: int

    @property
    def weight(self) -> float:
        return self.top / self.count

    @property
    def heights(self) -> np.ndarray:
        return (np.arange(self.count) + 0.5) * self.weight

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.count, self.weight)


def _sections_of_row(values: np.ndarray, x0: float, dx: float, h: float) -> IntervalUnion:
    above = values > h
    if not above.any():
        return IntervalUnion()
    edges = np.diff(above.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1)
    if above[0]:
        starts = np.r_[0, starts]
    if above[-1]:
        ends = np.r_[ends, values.size - 1]
    lo = np.maximum(starts - 1, 0)
    hi = np.minimum(ends + 1, values.size - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.where(
            starts > 0,
            x0 + dx * (lo + (h - values[lo]) / (values[starts] - values[lo])),
            x0 + dx * starts,
        )
        right = np.where(
            ends < values.size - 1,
            x0 + dx * (ends + (values[ends] - h) / (values[ends] - values[hi])),
            x0 + dx * ends,
        )
    return IntervalUnion(zip(left.tolist(), right.tolist()))


def superlevel_section(f: GridFunction, slice_index: int | None, h: float) -> IntervalUnion:
    """Open set ``{x_n : f(x', x_n) > h}`` of the piecewise-linear slice.

    ``slice_index`` selects the row for 2D data and is ignored in 1D.
    """
    ax = f.axes[-1]
    row = f.samples if f.dim == 1 else f.samples[slice_index]
    return _sections_of_row(row, ax.min, ax.step, h)


def slice_sections(values: np.ndarray, x0: float, dx: float, heights: np.ndarray) -> list[IntervalUnion]:
    """Sections of one slice at each of ``heights``."""
    top = values.max()
    return [
        _sections_of_row(values, x0, dx, h) if h < top else IntervalUnion()
        for h in heights
    ]


def _check_nesting(sections: Sequence[IntervalUnion], tol: float) -> None:
    for k in range(1, len(sections)):
        excess = sections[k].excess_over(sections[k - 1])
        if excess > tol:
            raise NonNestedSections(
                f"section {k} exceeds section {k - 1} by {excess:.3g}"
            )


def _indicator(U: IntervalUnion, x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape, dtype=bool)
    for a, b in U:
        out |= (x > a) & (x < b)
    return out


def layer_cake(sections, x: np.ndarray, check_nesting: bool = True) -> np.ndarray:
    """Step reconstruction ``sum_k w_k * 1_{U_k}(x)``.

    Parameters
    ----------
    sections : list of (weight, IntervalUnion)
        Ordered by increasing height.
    x : ndarray
        Evaluation points.
    """
    x = np.asarray(x, dtype=float)
    if check_nesting and len(x) > 1:
        _check_nesting([U for _, U in sections], tol=x[1] - x[0])
    out = np.zeros_like(x)
    for w, U in sections:
        out += w * _indicator(U, x)
    return out


def _signed_distance(U: IntervalUnion, x: np.ndarray) -> np.ndarray:
    """Distance to the boundary of U, positive inside and negative outside."""
    if not U:
        return np.full(x.shape, -np.inf)
    ends = np.asarray(U.endpoints).ravel()
    idx = np.searchsorted(ends, x)
    prev = ends[np.clip(idx - 1, 0, ends.size - 1)]
    nxt = ends[np.clip(idx, 0, ends.size - 1)]
    d = np.minimum(np.abs(x - prev), np.abs(nxt - x))
    inside = (idx % 2 == 1) & (x != prev) & (x != nxt)
    return np.where(inside, d, -d)


def reconstruct_interpolated(
    heights: np.ndarray,
    sections: Sequence[IntervalUnion],
    x: np.ndarray,
    top: float,
    base: IntervalUnion | None = None,
    check_nesting: bool = True,
) -> np.ndarray:
    """Layer-cake reconstruction with sub-level interpolation.

    Instead of summing indicators, each point is assigned the height at
    which a moving level boundary passes through it.  That height is found
    by linear interpolation of the signed boundary distance between the
    two bracketing levels, which makes the result continuous in the
    section endpoints.  ``base`` is the section at height 0 (the support).
    """
    x = np.asarray(x, dtype=float)
    if check_nesting and len(x) > 1:
        chain = ([base] if base is not None else []) + list(sections)
        _check_nesting(chain, tol=x[1] - x[0])
    nh = len(heights)
    phi = np.empty((nh + 2, x.size))
    phi[0] = _signed_distance(base, x) if base is not None else -np.inf
    for k, U in enumerate(sections):
        phi[k + 1] = _signed_distance(U, x)
    phi[nh + 1] = -np.inf
    levels = np.concatenate(([0.0], np.asarray(heights, dtype=float), [top]))

    level = np.count_nonzero(phi[1 : nh + 1] > 0, axis=0)
    cols = np.arange(x.size)
    lo_phi = phi[level, cols]
    hi_phi = phi[level + 1, cols]
    out = np.zeros(x.size)

    mid = (level > 0) & (level < nh)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(np.isfinite(hi_phi), lo_phi / (lo_phi - hi_phi), 0.0)
    frac = np.clip(frac, 0.0, 1.0)
    out[mid] = levels[level[mid]] + (levels[level[mid] + 1] - levels[level[mid]]) * frac[mid]

    # below the first level: interpolate towards the support boundary
    low = (level == 0) & (lo_phi > 0)
    if base is not None:
        out[low] = levels[1] * frac[low]

    # above the last level: extrapolate with the spacing of the top two levels
    if nh >= 2:
        top_pts = level == nh
        with np.errstate(invalid="ignore", divide="ignore"):
            dphi = phi[nh - 1, cols] - phi[nh, cols]
            ext = np.where(dphi > 0, phi[nh, cols] / dphi, np.inf)
        step = levels[nh] - levels[nh - 1]
        out[top_pts] = np.minimum(levels[nh] + step * ext[top_pts], top)
    elif nh == 1:
        out[level == 1] = levels[1]
    return out


def write_gfn(f: GridFunction, path) -> None:
    """Write the grid-function text format (JSON, floats printed exactly)."""
    doc = {
        "format": "gfn",
        "version": 1,
        "dim": f.dim,
        "axes": [{"min": a.min, "max": a.max, "count": a.count} for a in f.axes],
        "samples": f.samples.ravel().tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def read_gfn(path) -> GridFunction:
    doc = json.loads(Path(path).read_text())
    try:
        dim = int(doc["dim"])
        axes = tuple(Axis(float(a["min"]), float(a["max"]), int(a["count"])) for a in doc["axes"])
        samples = np.asarray(doc["samples"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise InvalidGridFunction(f"malformed grid file: {exc}") from exc
    if dim != len(axes):
        raise InvalidGridFunction("dim does not match number of axes")
    expected = int(np.prod([a.count for a in axes]))
    if samples.size != expected:
        raise InvalidGridFunction(f"expected {expected} samples, found {samples.size}")
    return GridFunction(axes, samples.reshape([a.count for a in axes]))
