"""Steiner symmetrization of grid functions along the last axis.

Every slice is cut into superlevel sections on a midpoint height grid,
the sections are moved with :func:`~rearrange.interval_sets.m_tau` and
the slice is rebuilt from the moved sections.  The truncated variant
slows the low levels down with the speed ``min(1, h / h0)`` so that the
support of the function does not move.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid_functions import (
    GridFunction,
    HeightGrid,
    _sections_of_row,
    reconstruct_interpolated,
    slice_sections,
)
from .interval_sets import IntervalUnion, m_tau, rearrange_symmetric

__all__ = [
    "TauTooLarge",
    "TruncationSpec",
    "LipschitzReport",
    "lipschitz_report",
    "steiner_full",
    "steiner_continuous",
    "steiner_truncated",
    "DEFAULT_HEIGHTS",
]

DEFAULT_HEIGHTS = 512


class TauTooLarge(ValueError):
    """Raised when tau >= h0 / c0, where higher level sets could drop."""


@dataclass(frozen=True)
class TruncationSpec:
    h0: float

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")

    def speed(self, h):
        return np.minimum(1.0, np.asarray(h, dtype=float) / self.h0)


@dataclass(frozen=True)
class LipschitzReport:
    c0: float
    per_axis: tuple[float, ...]


def lipschitz_report(f: GridFunction) -> LipschitzReport:
    """Largest difference quotient between axis-adjacent samples."""
    per_axis = tuple(
        float(np.max(np.abs(np.diff(f.samples, axis=d))) / f.axes[d].step)
        for d in range(f.dim)
    )
    return LipschitzReport(c0=max(per_axis), per_axis=per_axis)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("REARRANGE_THREADS", "1")))
    except ValueError:
        return 1


def _normalize_axis(f: GridFunction, axis) -> int:
    if axis in (None, "last", -1):
        return f.dim - 1
    axis = int(axis)
    if axis < 0:
        axis += f.dim
    if not 0 <= axis < f.dim:
        raise ValueError(f"axis {axis} out of range for a {f.dim}D grid")
    return axis


def _map_slices(
    f: GridFunction,
    axis,
    process_row: Callable[[np.ndarray], tuple[np.ndarray, int]],
) -> tuple[GridFunction, int]:
    axis = _normalize_axis(f, axis)
    work = f if axis == f.dim - 1 else f.transpose()
    rows = work.rows()
    threads = _thread_count()
    if threads > 1 and rows.shape[0] > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(process_row, rows))
    else:
        results = [process_row(r) for r in rows]
    new_rows = np.vstack([r for r, _ in results])
    clips = sum(c for _, c in results)
    # clean round-off below the support and on the box boundary
    new_rows[new_rows < 1e-13 * max(f.max(), 1e-300)] = 0.0
    new_rows[:, 0] = 0.0
    new_rows[:, -1] = 0.0
    out = work.with_samples(new_rows.reshape(work.samples.shape))
    if axis != f.dim - 1:
        out = out.transpose()
    return out, clips


def _symmetrize(
    f: GridFunction,
    move: Callable[[IntervalUnion, float], IntervalUnion],
    axis,
    n_heights: int,
    clip: bool = False,
) -> tuple[GridFunction, int]:
    top = f.max()
    if top == 0.0:
        return f, 0
    grid = HeightGrid(top, n_heights)
    heights = grid.heights
    axis_n = _normalize_axis(f, axis)
    ax = f.axes[axis_n]
    x = ax.points
    cell = ax.step

    def process_row(row: np.ndarray) -> tuple[np.ndarray, int]:
        if not np.any(row > 0):
            return np.zeros_like(row), 0
        base = move(_sections_of_row(row, ax.min, cell, 0.0), 0.0)
        moved = [move(U, h) for U, h in zip(slice_sections(row, ax.min, cell, heights), heights)]
        clips = 0
        if clip:
            prev = base
            for k, U in enumerate(moved):
                if U and U.excess_over(prev) > 0.0:
                    if U.excess_over(prev) > 1e-12 * cell:
                        clips += 1
                    U = U.intersect(prev)
                    moved[k] = U
                prev = U
        g = reconstruct_interpolated(heights, moved, x, top, base=base)
        return g, clips

    return _map_slices(f, axis, process_row)


def steiner_full(f: GridFunction, axis=-1, n_heights: int = DEFAULT_HEIGHTS) -> GridFunction:
    """Steiner symmetrization: every section becomes a centered interval."""
    g, _ = _symmetrize(f, lambda U, h: rearrange_symmetric(U), axis, n_heights)
    return g


def steiner_continuous(
    f: GridFunction, tau: float, axis=-1, n_heights: int = DEFAULT_HEIGHTS
) -> GridFunction:
    """Continuous Steiner symmetrization ``f^tau``.

    ``tau = 0`` returns the layer-cake reconstruction of ``f`` itself, so
    curves in ``tau`` are built from identically processed members.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    g, _ = _symmetrize(f, lambda U, h: m_tau(U, tau), axis, n_heights)
    return g


def steiner_truncated(
    f: GridFunction,
    tau: float,
    trunc: TruncationSpec,
    axis=-1,
    n_heights: int = DEFAULT_HEIGHTS,
    full_output: bool = False,
):
    """Truncated symmetrization: the level ``h`` moves for time ``min(1, h/h0) * tau``.

    Parameters
    ----------
    f : GridFunction
    tau : float
        Must satisfy ``tau < h0 / c0`` with ``c0`` the discrete Lipschitz constant.
    trunc : TruncationSpec
    full_output : bool
        Also return a dict with the number of levels that had to be
        clipped into their lower neighbour.

    Raises
    ------
    TauTooLarge
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    c0 = lipschitz_report(f).c0
    if c0 > 0 and tau >= trunc.h0 / c0:
        raise TauTooLarge(f"tau={tau} >= h0/c0={trunc.h0 / c0:.6g}")
    g, clips = _symmetrize(
        f, lambda U, h: m_tau(U, float(trunc.speed(h)) * tau), axis, n_heights, clip=True
    )
    if full_output:
        return g, {"clip_count": clips, "c0": c0, "tau_max": trunc.h0 / c0 if c0 else np.inf}
    return g
