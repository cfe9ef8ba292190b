"""Level-set calculus for piecewise-linear "good" functions.

A good function is described slice by slice: on every slice ``x'`` it is
piecewise linear in ``x_n`` with nonzero slopes on its support, so each
height ``h`` cuts the slice in finitely many crossings
``x_1 < x_2 < ... < x_{2m}`` with ``{f > h} = U (x_{2k-1}, x_{2k})``.

In these coordinates the regularized energy, its derivative under
continuous Steiner symmetrization and the derivative of the ``W^{1,p}``
seminorm under a smoothed symmetrization speed become explicit
integrals over pairs of heights, which this module evaluates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

from .energies import KernelSpec, c_eps
from .grid_functions import Axis, GridFunction

__all__ = [
    "InvalidOrdering",
    "InvalidProfile",
    "ProfileSlice",
    "GoodProfile",
    "LevelTable",
    "LevelEndpoints",
    "AsymmetrySets",
    "KernelAntiderivatives",
    "antiderivatives",
    "kernel_tables",
    "level_tables",
    "energy_levels",
    "energy_from_levels",
    "derivative_nonlocal",
    "derivative_from_levels",
    "bracket_sign",
    "bracket_values",
    "classify_pair",
    "case_lower_bound",
    "derivative_local",
    "asymmetry_decomposition",
    "read_profile",
    "write_profile",
]


class InvalidOrdering(ValueError):
    """The pair of intervals does not satisfy center(x) > center(y)."""


class InvalidProfile(ValueError):
    pass


# ------------------------------------------------------------ antiderivatives


def antiderivatives(spec: KernelSpec, r: float) -> tuple[float, float]:
    """``(Kbar(r), Kbarbar(r))`` by adaptive quadrature.

    ``Kbar(r) = int_0^r K`` and ``Kbarbar(r) = int_0^r Kbar = int_0^r (r - t) K(t) dt``.
    """
    if spec.eps <= 0 and spec.ell == 0:
        raise ValueError("the kernel is not integrable at 0 when eps = 0 and ell = 0")
    a = abs(float(r))
    if a == 0.0:
        return 0.0, 0.0
    knots = [k for k in (spec.eps ** (1.0 / spec.q) if spec.eps > 0 else 0.0, spec.ell) if 0 < k < a]
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400, points=knots or None)
    kb, _ = integrate.quad(lambda t: float(spec.K(t)), 0.0, a, **opts)
    kbb, _ = integrate.quad(lambda t: (a - t) * float(spec.K(t)), 0.0, a, **opts)
    return math.copysign(kb, r), kbb


class KernelAntiderivatives:
    """Tabulated ``Kbar`` and ``Kbarbar`` on a log-uniform radius grid.

    Values between nodes use cubic Hermite interpolation in ``log r`` with
    the exact derivatives ``Kbar' = K`` and ``Kbarbar' = Kbar``.

    Parameters
    ----------
    spec : KernelSpec
        ``eps > 0`` or ``ell > 0``.
    r_max : float
        Largest radius that will be queried.
    per_decade : int
        Nodes per decade of radius.
    """

    def __init__(self, spec: KernelSpec, r_max: float, per_decade: int = 100):
        if spec.eps <= 0 and spec.ell == 0:
            raise ValueError("tables need an integrable kernel (eps > 0 or ell > 0)")
        self.spec = spec
        self.r_max = float(r_max)
        self.r_min = 1e-12 * self.r_max
        decades = math.log10(self.r_max / self.r_min)
        count = int(math.ceil(decades * per_decade)) + 1
        self.u = np.linspace(math.log(self.r_min), math.log(self.r_max), count)
        self.du = self.u[1] - self.u[0]
        r = np.exp(self.u)
        k0 = float(spec.K(0.0))

        nodes, weights = np.polynomial.legendre.leggauss(8)
        uu = self.u[:-1, None] + 0.5 * self.du * (nodes[None, :] + 1.0)
        rr = np.exp(uu)
        kk = spec.K(rr)
        w = 0.5 * self.du * weights[None, :]
        inc0 = np.sum(kk * rr * w, axis=1)
        inc1 = np.sum(kk * rr * rr * w, axis=1)
        kbar = np.concatenate(([r[0] * k0], r[0] * k0 + np.cumsum(inc0)))
        first = np.concatenate(([0.5 * r[0] ** 2 * k0], 0.5 * r[0] ** 2 * k0 + np.cumsum(inc1)))
        self._k0 = k0
        self._r = r
        self._kbar = kbar
        self._kbb = r * kbar - first
        self._kval = spec.K(r)

    def _hermite(self, r, values, slopes_r):
        a = np.abs(r)
        small = a < self.r_min
        if np.any(a > self.r_max * (1 + 1e-12)):
            raise ValueError(f"radius {a.max():.6g} exceeds the table range {self.r_max:.6g}")
        u = np.log(np.where(small, self.r_min, np.minimum(a, self.r_max)))
        pos = (u - self.u[0]) / self.du
        j = np.clip(np.floor(pos).astype(np.int64), 0, self.u.size - 2)
        t = pos - j
        t2, t3 = t * t, t * t * t
        g0 = slopes_r[j] * self._r[j] * self.du
        g1 = slopes_r[j + 1] * self._r[j + 1] * self.du
        out = (
            (2 * t3 - 3 * t2 + 1) * values[j]
            + (t3 - 2 * t2 + t) * g0
            + (-2 * t3 + 3 * t2) * values[j + 1]
            + (t3 - t2) * g1
        )
        return out, small, a

    def kbar(self, r):
        r = np.asarray(r, dtype=float)
        out, small, a = self._hermite(r, self._kbar, self._kval)
        out = np.where(small, a * self._k0, out)
        return np.sign(r) * out

    def kbarbar(self, r):
        r = np.asarray(r, dtype=float)
        out, small, a = self._hermite(r, self._kbb, self._kbar)
        return np.where(small, 0.5 * a * a * self._k0, out)


@lru_cache(maxsize=256)
def kernel_tables(spec: KernelSpec, r_max: float) -> KernelAntiderivatives:
    """Shared, immutable table for ``spec`` covering radii up to ``r_max``."""
    return KernelAntiderivatives(spec, r_max)


def _singular_tail(r, q):
    """``int_r^inf t^-q dt`` for r > 0."""
    return r ** (1.0 - q) / (q - 1.0)


def _bracket_singular_1d(xm, xp, ym, yp, q):
    """First-antiderivative bracket for ``K(r) = |r|^-q`` (1D, eps = 0).

    Each antiderivative is only defined up to an infinite constant, but the
    bracket is finite whenever the two intervals are nested or disjoint:
    grouping the four terms into two same-sign differences leaves tail
    integrals only.  Partially overlapping pairs give ``+inf``.
    """
    xm, xp, ym, yp = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (xm, xp, ym, yp)))

    def diff(r1, r2):
        # Kbar(r1) - Kbar(r2) for r1, r2 of the same sign
        s = np.sign(r1)
        return s * (_singular_tail(np.abs(r2), q) - _singular_tail(np.abs(r1), q))

    out = np.full(xm.shape, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        # group by x endpoint: [Kbar(x+ - y+) - Kbar(x+ - y-)] - [Kbar(x- - y+) - Kbar(x- - y-)]
        by_x = ((xp <= ym) | (xp >= yp)) & ((xm <= ym) | (xm >= yp))
        val_x = diff(xp - yp, xp - ym) - diff(xm - yp, xm - ym)
        # group by y endpoint: [Kbar(x+ - y+) - Kbar(x- - y+)] - [Kbar(x+ - y-) - Kbar(x- - y-)]
        by_y = ((yp <= xm) | (yp >= xp)) & ((ym <= xm) | (ym >= xp))
        val_y = diff(xp - yp, xm - yp) - diff(xp - ym, xm - ym)
    out = np.where(by_y, val_y, out)
    out = np.where(by_x, val_x, out)
    return out


# ------------------------------------------------------------ profiles


@dataclass(frozen=True, eq=False)
class ProfileSlice:
    """One slice: breakpoints ``x`` (increasing) and values ``f`` (zero at both ends)."""

    position: float
    weight: float
    x: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        f = np.asarray(self.f, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "f", f)
        if x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise InvalidProfile("breakpoints and values must be 1D arrays of equal length")
        if np.any(np.diff(x) <= 0):
            raise InvalidProfile("breakpoints must be strictly increasing")
        if np.any(f < 0) or f[0] != 0 or f[-1] != 0:
            raise InvalidProfile("values must be nonnegative and vanish at both ends")

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.f) / np.diff(self.x)

    def lp_integral(self, p: float) -> float:
        """``int |f|^p dx_n`` of the piecewise-linear slice, exactly."""
        a, b = self.f[:-1], self.f[1:]
        dx = np.diff(self.x)
        same = np.isclose(a, b, rtol=0, atol=1e-15)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(same, dx * a**p, dx * (b ** (p + 1) - a ** (p + 1)) / ((p + 1) * (b - a)))
        return float(np.sum(val))

    def exceptional_heights(self, dense_limit: int = 64) -> np.ndarray:
        """Heights where the number of crossings may change (plus kinks when few)."""
        f = self.f
        if f.size <= dense_limit:
            vals = f
        else:
            left = np.r_[-1.0, f[:-1]]
            right = np.r_[f[1:], -1.0]
            extrema = ((f >= left) & (f >= right)) | ((f <= left) & (f <= right))
            vals = f[extrema]
        return np.unique(np.r_[0.0, vals])


@dataclass(frozen=True, eq=False)
class GoodProfile:
    """Good function given by piecewise-linear slices.

    In 1D there is a single slice with weight 1.  In 2D the slices sit at
    positions ``x'`` with quadrature weights (slice spacing).
    """

    slices: tuple[ProfileSlice, ...]
    n: int = 1
    slope_floor: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))
        if self.n not in (1, 2):
            raise InvalidProfile("n must be 1 or 2")
        if self.n == 1 and len(self.slices) != 1:
            raise InvalidProfile("a 1D profile has exactly one slice")
        for sl in self.slices:
            slopes = sl.slopes
            on_support = (sl.f[:-1] > 0) | (sl.f[1:] > 0)
            if np.any(np.abs(slopes[on_support]) < self.slope_floor):
                raise InvalidProfile("slope below the floor on the support")

    @classmethod
    def one_d(cls, x, f, slope_floor: float = 1e-12) -> "GoodProfile":
        return cls((ProfileSlice(0.0, 1.0, x, f),), n=1, slope_floor=slope_floor)

    @property
    def top(self) -> float:
        return max(float(sl.f.max()) for sl in self.slices)

    @property
    def span(self) -> float:
        lo = min(float(sl.x[0]) for sl in self.slices)
        hi = max(float(sl.x[-1]) for sl in self.slices)
        return hi - lo

    def lp_norm_p(self, p: float) -> float:
        return sum(sl.weight * sl.lp_integral(p) for sl in self.slices)

    def crossings(self, slice_index: int, h: float) -> "LevelEndpoints":
        table = level_table(self.slices[slice_index], np.array([h]))
        m = int(table.valid[0].sum())
        pts = np.empty(2 * m)
        pts[0::2] = table.left[0, :m]
        pts[1::2] = table.right[0, :m]
        dh = np.empty(2 * m)
        dh[0::2] = table.dleft[0, :m]
        dh[1::2] = table.dright[0, :m]
        return LevelEndpoints(height=h, slice_id=slice_index, points=pts, dh=dh)

    def to_grid(self, axes: Sequence[Axis]) -> GridFunction:
        """Sample onto a grid; in 2D the rows must match the slice positions."""
        axes = tuple(axes)
        xs = axes[-1].points
        if self.n == 1:
            sl = self.slices[0]
            vals = np.interp(xs, sl.x, sl.f, left=0.0, right=0.0)
            vals[[0, -1]] = 0.0
            return GridFunction(axes, vals)
        rows = np.zeros((axes[0].count, axes[1].count))
        pos = axes[0].points
        for sl in self.slices:
            i = int(np.argmin(np.abs(pos - sl.position)))
            if abs(pos[i] - sl.position) > 1e-9 * max(1.0, abs(sl.position)):
                raise ValueError("slice positions do not match the grid rows")
            rows[i] = np.interp(xs, sl.x, sl.f, left=0.0, right=0.0)
        rows[:, [0, -1]] = 0.0
        rows[[0, -1], :] = 0.0
        return GridFunction(axes, rows)


@dataclass(frozen=True)
class LevelEndpoints:
    """Crossings of one slice at one height; ``dh`` holds d(crossing)/dh."""

    height: float
    slice_id: int
    points: np.ndarray
    dh: np.ndarray


@dataclass(eq=False)
class LevelTable:
    """Crossings of one slice at many heights, padded to ``m_max`` intervals.

    ``left[i, k]``, ``right[i, k]`` are the endpoints of the k-th interval at
    height ``heights[i]``; ``dleft``/``dright`` their derivatives in h.
    ``edges`` are the height-cell boundaries when the heights are cell
    midpoints.
    """

    heights: np.ndarray
    left: np.ndarray
    right: np.ndarray
    dleft: np.ndarray
    dright: np.ndarray
    valid: np.ndarray
    edges: np.ndarray | None = None
    position: float = 0.0
    weight: float = 1.0

    @property
    def centers_sign(self) -> np.ndarray:
        return np.where(self.valid, np.sign(self.left + self.right), 0.0)

    def moved(self, tau: float) -> "LevelTable":
        """Endpoints after running the Steiner motion for time ``tau``.

        Valid for either sign of ``tau`` as long as no two intervals of a
        level touch; centered intervals stop (forward) or stay (backward).
        """
        c = 0.5 * (self.left + self.right)
        if tau >= 0:
            shift = -np.sign(c) * np.minimum(tau, np.abs(c))
        else:
            shift = np.sign(c) * (-tau)
        left = np.where(self.valid, self.left + shift, 0.0)
        right = np.where(self.valid, self.right + shift, 0.0)
        gaps = left[:, 1:] - right[:, :-1]
        both = self.valid[:, 1:] & self.valid[:, :-1]
        if np.any(gaps[both] <= 0):
            raise ValueError("intervals collide; the shift is too large for a merge-free update")
        return LevelTable(self.heights, left, right, self.dleft, self.dright, self.valid,
                          self.edges, self.position, self.weight)


def level_table(sl: ProfileSlice, heights: np.ndarray, edges: np.ndarray | None = None) -> LevelTable:
    x, f = sl.x, sl.f
    h = np.asarray(heights, dtype=float)[:, None]
    a, b = f[None, :-1], f[None, 1:]
    up = (a <= h) & (b > h)
    down = (a > h) & (b <= h)
    slope = np.diff(f) / np.diff(x)
    nh = h.shape[0]

    def gather(mask):
        rows, cols = np.nonzero(mask)
        counts = np.bincount(rows, minlength=nh)
        start = np.concatenate(([0], np.cumsum(counts)[:-1]))
        rank = np.arange(rows.size) - start[rows]
        pos = x[cols] + (h[rows, 0] - f[cols]) / slope[cols]
        return rows, rank, pos, 1.0 / slope[cols], counts

    r1, k1, p1, d1, c1 = gather(up)
    r2, k2, p2, d2, c2 = gather(down)
    if not np.array_equal(c1, c2):
        raise InvalidProfile("unbalanced crossings; the slice must vanish at its ends")
    m = int(c1.max()) if c1.size and c1.max() > 0 else 1
    left = np.zeros((nh, m))
    right = np.zeros((nh, m))
    dl = np.zeros((nh, m))
    dr = np.zeros((nh, m))
    valid = np.zeros((nh, m), dtype=bool)
    left[r1, k1] = p1
    dl[r1, k1] = d1
    right[r2, k2] = p2
    dr[r2, k2] = d2
    valid[r1, k1] = True
    return LevelTable(np.asarray(heights, dtype=float), left, right, dl, dr, valid,
                      edges, sl.position, sl.weight)


def _height_cells(sl: ProfileSlice, per_unit: float) -> np.ndarray:
    """Cell edges on (0, max f) that never straddle an exceptional height."""
    marks = sl.exceptional_heights()
    marks = marks[marks <= sl.f.max()]
    edges = [0.0]
    for lo, hi in zip(marks[:-1], marks[1:]):
        if hi - lo <= 1e-14:
            continue
        k = max(1, int(math.ceil((hi - lo) * per_unit)))
        edges.extend(np.linspace(lo, hi, k + 1)[1:].tolist())
    return np.asarray(edges)


def level_tables(g: GoodProfile, n_heights: int = 256) -> list[LevelTable]:
    """Midpoint level tables for every slice (about ``n_heights`` cells per slice maximum)."""
    if g.top <= 0:
        return []
    per_unit = n_heights / g.top
    out = []
    for sl in g.slices:
        if sl.f.max() <= 0:
            continue
        edges = _height_cells(sl, per_unit)
        mids = 0.5 * (edges[:-1] + edges[1:])
        out.append(level_table(sl, mids, edges))
    return out


def _pair_weights(e1: np.ndarray, e2: np.ndarray, p: float) -> np.ndarray:
    """``p (p-1) int_cell_i int_cell_j |h - u|^(p-2) du dh`` for all cell pairs."""
    a1, b1 = e1[:-1, None], e1[1:, None]
    a2, b2 = e2[None, :-1], e2[None, 1:]

    def psi(t):
        return np.abs(t) ** p

    return psi(b1 - a2) - psi(b1 - b2) - psi(a1 - a2) + psi(a1 - b2)


# ------------------------------------------------------------ nonlocal


def _kernel_for(spec: KernelSpec, ell: float, r_max: float):
    s = spec.with_(ell=float(ell))
    if s.eps == 0 and s.ell == 0:
        return None
    return kernel_tables(s, float(r_max))


def _bracket_block(X: LevelTable, Y: LevelTable, table, which: str, q: float, signed: bool) -> np.ndarray:
    """Sum over interval pairs of the four-term bracket, shape (len X, len Y)."""
    xl = X.left[:, None, :, None]
    xr = X.right[:, None, :, None]
    yl = Y.left[None, :, None, :]
    yr = Y.right[None, :, None, :]
    mask = X.valid[:, None, :, None] & Y.valid[None, :, None, :]
    if table is None:
        B = _bracket_singular_1d(xl, xr, yl, yr, q)
    else:
        F = table.kbarbar if which == "KK" else table.kbar
        B = F(xr - yr) - F(xr - yl) - F(xl - yr) + F(xl - yl)
    if signed:
        sx = np.sign(X.left + X.right)[:, None, :, None]
        sy = np.sign(Y.left + Y.right)[None, :, None, :]
        weight = sx - sy
        B = np.where(weight != 0, B * weight, 0.0)
    return np.where(mask, B, 0.0).sum(axis=(2, 3))


def _double_sum(tables: Sequence[LevelTable], spec: KernelSpec, which: str, signed: bool, r_max: float) -> float:
    total = 0.0
    for a, X in enumerate(tables):
        for b in range(a, len(tables)):
            Y = tables[b]
            ell = abs(X.position - Y.position)
            table = _kernel_for(spec, ell, r_max)
            Q = _bracket_block(X, Y, table, which, spec.q, signed)
            Wp = _pair_weights(X.edges, Y.edges, spec.p)
            with np.errstate(invalid="ignore"):
                contrib = float(np.sum(np.where(Q != 0, Wp * Q, 0.0)))
            factor = 1.0 if a == b else 2.0
            total += factor * X.weight * Y.weight * contrib
    return total


def _r_max(tables: Sequence[LevelTable]) -> float:
    lo = min(float(np.min(np.where(t.valid, t.left, np.inf))) for t in tables)
    hi = max(float(np.max(np.where(t.valid, t.right, -np.inf))) for t in tables)
    return 2.0 * max(hi - lo, 1e-12) + 1.0


def energy_from_levels(tables: Sequence[LevelTable], spec: KernelSpec, lp_p: float) -> float:
    """``F_eps^p`` from level tables, given ``||g||_p^p``."""
    if spec.eps <= 0:
        raise ValueError("energy_levels needs eps > 0")
    inter = _double_sum(tables, spec, "KK", signed=False, r_max=_r_max(tables))
    return c_eps(spec) * lp_p + inter


def energy_levels(g: GoodProfile, spec: KernelSpec, n_heights: int = 256) -> float:
    """Regularized energy ``F_eps^p(g)`` through the level-set formula.

    The interaction part ``F - C_eps ||g||_p^p`` is a sum over pairs of
    heights (h, u) and pairs of level intervals of the second-antiderivative
    bracket, weighted by ``p (p-1) |h - u|^(p-2)``.
    """
    spec = spec.with_(n=g.n)
    tables = level_tables(g, n_heights)
    if not tables:
        return 0.0
    return energy_from_levels(tables, spec, g.lp_norm_p(spec.p))


def derivative_from_levels(tables: Sequence[LevelTable], spec: KernelSpec) -> float:
    return -_double_sum(tables, spec, "K", signed=True, r_max=_r_max(tables))


def derivative_nonlocal(g: GoodProfile, spec: KernelSpec, n_heights: int = 256, full_output: bool = False):
    """Derivative at tau = 0 of ``F_eps^p(g^tau)`` under continuous Steiner symmetrization.

    ``eps = 0`` is supported in 1D: the same-slice bracket is then written
    with tail integrals of ``|r|^-(1+sp)``, which is finite for nested or
    disjoint level intervals (always the case within one slice).

    With ``full_output`` the value computed with half the height
    resolution is used to return ``(value, error_estimate)``.
    """
    spec = spec.with_(n=g.n)
    if spec.eps == 0 and g.n == 2:
        raise ValueError("eps = 0 is supported for 1D profiles only")
    tables = level_tables(g, n_heights)
    if not tables:
        return (0.0, 0.0) if full_output else 0.0
    value = derivative_from_levels(tables, spec)
    if not full_output:
        return value
    coarse = derivative_from_levels(level_tables(g, max(8, n_heights // 2)), spec)
    return value, abs(value - coarse) / 3.0


def classify_pair(xm: float, xp: float, ym: float, yp: float) -> str:
    if xp <= ym or yp <= xm:
        return "separated"
    if (xm <= ym and yp <= xp) or (ym <= xm and xp <= yp):
        return "embedded"
    return "overlapping"


def bracket_values(xm, xp, ym, yp, spec: KernelSpec, r_max: float | None = None) -> np.ndarray:
    """Vectorized first-antiderivative bracket
    ``Kbar(x+ - y+) - Kbar(x+ - y-) - Kbar(x- - y+) + Kbar(x- - y-)``."""
    xm, xp, ym, yp = (np.asarray(v, dtype=float) for v in (xm, xp, ym, yp))
    if spec.eps == 0 and spec.ell == 0:
        return _bracket_singular_1d(xm, xp, ym, yp, spec.q)
    if r_max is None:
        r_max = float(np.max(np.abs(np.stack(np.broadcast_arrays(xp - ym, xm - yp))))) * 1.01 + 1e-9
    t = kernel_tables(spec, float(r_max))
    return t.kbar(xp - yp) - t.kbar(xp - ym) - t.kbar(xm - yp) + t.kbar(xm - ym)


def bracket_sign(xm: float, xp: float, ym: float, yp: float, spec: KernelSpec) -> tuple[float, str]:
    """Bracket value (positive by the case analysis) and the geometric case.

    Raises
    ------
    InvalidOrdering
        If the center of ``(xm, xp)`` is not to the right of the center of ``(ym, yp)``.
    """
    if not (xm < xp and ym < yp):
        raise InvalidOrdering("intervals must have positive length")
    if not (xp + xm) - (yp + ym) > 0:
        raise InvalidOrdering("the x interval must be centered to the right of the y interval")
    case = classify_pair(xm, xp, ym, yp)
    if spec.eps == 0 and spec.ell == 0:
        return float(_bracket_singular_1d(xm, xp, ym, yp, spec.q)), case
    vals = [antiderivatives(spec, r)[0] for r in (xp - yp, xp - ym, xm - yp, xm - ym)]
    return vals[0] - vals[1] - vals[2] + vals[3], case


def _kprime_abs(spec: KernelSpec, r):
    """|K'(r)| for the slice kernel."""
    r = np.abs(np.asarray(r, dtype=float))
    q, ell, eps = spec.q, spec.ell, spec.eps
    base = (ell * ell + r * r) ** (0.5 * q)
    return q * (ell * ell + r * r) ** (0.5 * q - 1.0) * r / (base + eps) ** 2


def case_lower_bound(xm, xp, ym, yp, spec: KernelSpec) -> float:
    """Explicit lower bound of the bracket for embedded and separated pairs (0 otherwise).

    ``|K'|`` vanishes at 0, rises and then decays, so its minimum over a
    radius range is attained at one of the two ends.
    """
    case = classify_pair(xm, xp, ym, yp)
    if case == "embedded":
        if not (xm <= ym and yp <= xp):
            # x inside y: reflect, which preserves the bracket and the center order
            xm, xp, ym, yp = -yp, -ym, -xp, -xm
        lo, hi = ym - xm, xp - ym
        scale = ((xp + xm) - (yp + ym)) * (yp - ym)
    elif case == "separated":
        lo, hi = xm - yp, xp - ym
        scale = (xp - xm) * (yp - ym)
    else:
        return 0.0
    if lo <= 0:
        return 0.0
    return float(scale * min(_kprime_abs(spec, lo), _kprime_abs(spec, hi)))


# ------------------------------------------------------------ local


def _local_integrand(p, Yph, Ymh, Ypx, Ymx):
    """Bracket of the ``W^{1,p}`` derivative per unit speed gradient.

    Returns the factor multiplying the speed derivative ``V'`` at a
    level interval with right-end derivatives (Yph, Ypx) and left-end
    derivatives (Ymh, Ymx).
    """
    sum_x = Ypx + Ymx
    sum_h = Yph + Ymh
    ap, am = np.abs(Yph), np.abs(Ymh)
    plus = -p * (Ypx**2 + 1) ** (0.5 * p - 1) * Ypx * sum_x * ap ** (1 - p) + (p - 1) * (Ypx**2 + 1) ** (0.5 * p) * ap ** (-p - 1) * Yph * sum_h
    minus = -p * (Ymx**2 + 1) ** (0.5 * p - 1) * Ymx * sum_x * am ** (1 - p) + (p - 1) * (Ymx**2 + 1) ** (0.5 * p) * am ** (-p - 1) * Ymh * sum_h
    return plus + minus


def _local_integrand_factored(Yph, Ymh, Ypx, Ymx):
    """p = 2 factored form: ``-(a+b) [(a-b)^2 + (u b + v a)^2] / (a b)^2``."""
    a, b = np.abs(Yph), np.abs(Ymh)
    quad = (Ypx * b + Ymx * a) ** 2
    return -(a + b) * ((a - b) ** 2 + quad) / (a * a * b * b)


def _window_heights(sl: ProfileSlice, eps_speed: float, base_cells: int, refine: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoints and weights on (0, max f), refined where |x_- + x_+| crosses eps."""
    top = float(sl.f.max())
    edges = np.linspace(0.0, top, base_cells + 1)
    tab = level_table(sl, edges)
    s = np.abs(tab.left + tab.right)
    inside = np.where(tab.valid, s < eps_speed, False)
    # refine cells whose two edges disagree about any interval being in the window
    changes = np.any(inside[:-1] != inside[1:], axis=1) | (tab.valid.sum(1)[:-1] != tab.valid.sum(1)[1:])
    mids, wts = [], []
    for i in range(base_cells):
        lo, hi = edges[i], edges[i + 1]
        k = refine if changes[i] else 1
        sub = np.linspace(lo, hi, k + 1)
        mids.append(0.5 * (sub[:-1] + sub[1:]))
        wts.append(np.diff(sub))
    return np.concatenate(mids), np.concatenate(wts)


def derivative_local(
    g: GoodProfile,
    p: float,
    eps_speed: float,
    base_cells: int = 1024,
    refine: int = 256,
    full_output: bool = False,
):
    """Derivative of ``[g]^p_{W^{1,p}}`` under the smoothed symmetrization speed.

    Each level interval moves with velocity ``-V(x_- + x_+)`` where
    ``V(y) = clip(y / eps_speed, -1, 1)``, whose derivative is twice the
    box kernel ``1/(2 eps) 1_{|y|<eps}``.  Only intervals inside the box
    window contribute.

    With ``full_output`` returns a dict with the value, the p = 2 factored
    evaluation (None otherwise), the seminorm scale and the number of
    excluded (exceptional) quadrature nodes.
    """
    if p <= 1 or eps_speed <= 0:
        raise ValueError("need p > 1 and eps_speed > 0")
    total = 0.0
    total_factored = 0.0
    excluded = 0
    scale = 0.0
    positions = np.array([sl.position for sl in g.slices])
    for a, sl in enumerate(g.slices):
        if sl.f.max() <= 0:
            continue
        hs, ws = _window_heights(sl, eps_speed, base_cells, refine)
        tab = level_table(sl, hs)
        ypx = np.zeros_like(tab.left)
        ymx = np.zeros_like(tab.left)
        ok = tab.valid.copy()
        if g.n == 2 and len(g.slices) > 1:
            nb = [b for b in (a - 1, a + 1) if 0 <= b < len(g.slices)]
            tabs = [level_table(g.slices[b], hs) for b in nb]
            counts = tab.valid.sum(1)
            for t in tabs:
                if t.left.shape[1] < tab.left.shape[1]:
                    pad = tab.left.shape[1] - t.left.shape[1]
                    t.left = np.pad(t.left, ((0, 0), (0, pad)))
                    t.right = np.pad(t.right, ((0, 0), (0, pad)))
                    t.valid = np.pad(t.valid, ((0, 0), (0, pad)))
                ok &= (t.valid.sum(1) == counts)[:, None]
            m = tab.left.shape[1]
            if len(tabs) == 2:
                dxp = positions[nb[1]] - positions[nb[0]]
                ypx = (tabs[1].right[:, :m] - tabs[0].right[:, :m]) / dxp
                ymx = (tabs[1].left[:, :m] - tabs[0].left[:, :m]) / dxp
            else:
                b = nb[0]
                dxp = positions[b] - positions[a]
                ypx = (tabs[0].right[:, :m] - tab.right) / dxp
                ymx = (tabs[0].left[:, :m] - tab.left) / dxp
            excluded += int(np.count_nonzero(tab.valid & ~ok))
        S = tab.left + tab.right
        active = ok & (np.abs(S) < eps_speed)
        speed_grad = 1.0 / eps_speed  # V' = 2 * (1 / (2 eps)) on the window
        with np.errstate(divide="ignore", invalid="ignore"):
            integ = np.where(active, _local_integrand(p, tab.dright, tab.dleft, ypx, ymx), 0.0)
            dens = np.where(
                tab.valid,
                (ypx**2 + 1) ** (0.5 * p) * np.abs(tab.dright) ** (1 - p)
                + (ymx**2 + 1) ** (0.5 * p) * np.abs(tab.dleft) ** (1 - p),
                0.0,
            )
        total += sl.weight * speed_grad * float(np.sum(integ.sum(1) * ws))
        scale += sl.weight * float(np.sum(dens.sum(1) * ws))
        if p == 2:
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = np.where(active, _local_integrand_factored(tab.dright, tab.dleft, ypx, ymx), 0.0)
            total_factored += sl.weight * speed_grad * float(np.sum(fac.sum(1) * ws))
    if not full_output:
        return total
    return {
        "value": total,
        "factored": total_factored if p == 2 else None,
        "scale": scale,
        "excluded_nodes": excluded,
    }


# ------------------------------------------------------------ asymmetry sets


@dataclass
class AsymmetrySets:
    """Measures of the support split by the direction its level interval moves.

    ``plus``: the interval through the point has positive center (moves
    left); ``zero``: centered; ``minus``: negative center.
    """

    plus: float
    zero: float
    minus: float
    derivative: float
    details: dict = field(default_factory=dict)


def _support_samples(sl: ProfileSlice, per_unit_length: int):
    """Midpoint samples of the support with weights, values and slopes."""
    xs, ws, fs, ds = [], [], [], []
    slopes = sl.slopes
    for i in range(sl.x.size - 1):
        if sl.f[i] <= 0 and sl.f[i + 1] <= 0:
            continue
        length = sl.x[i + 1] - sl.x[i]
        k = max(2, int(math.ceil(length * per_unit_length)))
        t = (np.arange(k) + 0.5) / k
        xs.append(sl.x[i] + t * length)
        ws.append(np.full(k, length / k))
        fs.append(sl.f[i] + t * (sl.f[i + 1] - sl.f[i]))
        ds.append(np.full(k, slopes[i]))
    if not xs:
        return (np.empty(0),) * 4
    return tuple(np.concatenate(v) for v in (xs, ws, fs, ds))


def asymmetry_decomposition(
    g: GoodProfile,
    spec: KernelSpec,
    per_unit_length: int = 400,
    center_tol: float = 1e-12,
) -> AsymmetrySets:
    """Split the support into E+, E0, E- and evaluate the derivative there.

    Every support point x with f'(x) != 0 is an endpoint of an interval of
    ``{f > f(x)}``; the sign of that interval's center sorts x into E+,
    E0 or E-.  With ``c(x)`` that sign, the derivative reads

        -p (p-1) sum int int |f(x)-f(y)|^(p-2) Kbar(x_n - y_n) f_n(x) f_n(y) (c(x) - c(y)),

    which groups into the E+ x E-, E+ x E0 and E- x E0 interactions.
    """
    spec = spec.with_(n=g.n)
    if spec.eps <= 0:
        raise ValueError("asymmetry_decomposition needs eps > 0")
    pts = []
    measures = {1: 0.0, 0: 0.0, -1: 0.0}
    for sl in g.slices:
        x, w, fv, d = _support_samples(sl, per_unit_length)
        if x.size == 0:
            continue
        tab = level_table(sl, fv)
        # the interval adjacent to x on the side where f increases
        ends = np.where(d[:, None] > 0, tab.left, tab.right)
        dist = np.where(tab.valid, np.abs(ends - x[:, None]), np.inf)
        k = np.argmin(dist, axis=1)
        rows = np.arange(x.size)
        center = 0.5 * (tab.left[rows, k] + tab.right[rows, k])
        cls = np.where(center > center_tol, 1, np.where(center < -center_tol, -1, 0))
        for c in (1, 0, -1):
            measures[c] += sl.weight * float(np.sum(w[cls == c]))
        pts.append((sl.position, sl.weight, x, w, fv, d, cls))

    r_max = 2.0 * g.span + 1.0
    parts = {"plus_minus": 0.0, "plus_zero": 0.0, "minus_zero": 0.0}
    p = spec.p
    for a, (pa, wa, xa, wxa, fa, da, ca) in enumerate(pts):
        for b in range(a, len(pts)):
            pb, wb, xb, wxb, fb, db, cb = pts[b]
            table = kernel_tables(spec.with_(ell=abs(pa - pb)), r_max)
            for key, (ci, cj) in {"plus_minus": (1, -1), "plus_zero": (1, 0), "minus_zero": (-1, 0)}.items():
                for swap in (False, True):
                    if a == b and swap:
                        continue
                    if not swap:
                        si, sj = ca == ci, cb == cj
                        X, WX, FX, DX = xa[si], wxa[si], fa[si], da[si]
                        Y, WY, FY, DY = xb[sj], wxb[sj], fb[sj], db[sj]
                    else:
                        si, sj = cb == ci, ca == cj
                        X, WX, FX, DX = xb[si], wxb[si], fb[si], db[si]
                        Y, WY, FY, DY = xa[sj], wxa[sj], fa[sj], da[sj]
                    if X.size == 0 or Y.size == 0:
                        continue
                    kb = table.kbar(X[:, None] - Y[None, :])
                    with np.errstate(divide="ignore"):
                        hw = np.abs(FX[:, None] - FY[None, :]) ** (p - 2) if p != 2 else 1.0
                    val = float(np.sum(hw * kb * (DX * WX)[:, None] * (DY * WY)[None, :]))
                    parts[key] += wa * wb * val
    # c(x) - c(y) is 2 on E+ x E-, 1 on E+ x E0, -1 on E- x E0; the ordered pairs
    # (y, x) contribute the same amount again by antisymmetry of Kbar.
    deriv = -p * (p - 1) * 2.0 * (2.0 * parts["plus_minus"] + parts["plus_zero"] - parts["minus_zero"])
    return AsymmetrySets(
        plus=measures[1],
        zero=measures[0],
        minus=measures[-1],
        derivative=deriv,
        details=parts,
    )


# ------------------------------------------------------------ file format


def write_profile(g: GoodProfile, path) -> None:
    doc = {
        "format": "good-profile",
        "version": 1,
        "n": g.n,
        "slope_floor": g.slope_floor,
        "slices": [
            {"position": sl.position, "weight": sl.weight, "x": sl.x.tolist(), "f": sl.f.tolist()}
            for sl in g.slices
        ],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def read_profile(path) -> GoodProfile:
    doc = json.loads(Path(path).read_text())
    try:
        slices = tuple(
            ProfileSlice(float(s["position"]), float(s["weight"]), s["x"], s["f"]) for s in doc["slices"]
        )
        return GoodProfile(slices, n=int(doc["n"]), slope_floor=float(doc.get("slope_floor", 1e-12)))
    except (KeyError, TypeError) as exc:
        raise InvalidProfile(f"malformed profile file: {exc}") from exc
