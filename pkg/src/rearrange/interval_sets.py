"""Finite unions of open intervals and their continuous Steiner motion.

The motion moves every interval toward the origin at unit speed.  An
interval stops once its midpoint reaches 0, and two intervals whose
closures touch are replaced by their union, after which the motion
continues.  Everything here is computed event by event in closed form,
so composing two motions reproduces a single motion up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

__all__ = [
    "IntervalUnion",
    "MergeEvent",
    "measure",
    "rearrange_symmetric",
    "next_merge_time",
    "m_tau",
    "settling_time",
]

# relative tolerance used to decide that two events happen at the same time
_EVENT_RTOL = 1e-13


class IntervalUnion:
    """Sorted, pairwise disjoint union of open intervals.

    Zero-length pieces are dropped.  Pieces may touch (``b_i == a_{i+1}``);
    the motion merges them at time 0.

    Parameters
    ----------
    pairs : iterable of (a, b)
        Interval endpoints.  They need not be sorted but must not overlap.
    """

    __slots__ = ("_pairs",)

    def __init__(self, pairs: Iterable[Sequence[float]] = ()):
        cleaned = sorted((float(a), float(b)) for a, b in pairs if b > a)
        for (a0, b0), (a1, _) in zip(cleaned, cleaned[1:]):
            if a1 < b0:
                raise ValueError(f"intervals ({a0}, {b0}) and ({a1}, ...) overlap")
        self._pairs = tuple(cleaned)

    @property
    def endpoints(self) -> tuple[tuple[float, float], ...]:
        return self._pairs

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(self._pairs)

    def __len__(self) -> int:
        return len(self._pairs)

    def __bool__(self) -> bool:
        return bool(self._pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalUnion) and self._pairs == other._pairs

    def __hash__(self) -> int:
        return hash(self._pairs)

    def __repr__(self) -> str:
        body = ", ".join(f"({a!r}, {b!r})" for a, b in self._pairs)
        return f"IntervalUnion([{body}])"

    def measure(self) -> float:
        return sum(b - a for a, b in self._pairs)

    def contains(self, x: float) -> bool:
        return any(a < x < b for a, b in self._pairs)

    def boundary(self) -> tuple[float, ...]:
        """Endpoints of the closure, with touching endpoints listed once."""
        pts: list[float] = []
        for a, b in self._pairs:
            if not pts or pts[-1] != a:
                pts.append(a)
            pts.append(b)
        return tuple(pts)

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        i = j = 0
        p, q = self._pairs, other._pairs
        while i < len(p) and j < len(q):
            lo = max(p[i][0], q[j][0])
            hi = min(p[i][1], q[j][1])
            if hi > lo:
                out.append((lo, hi))
            if p[i][1] < q[j][1]:
                i += 1
            else:
                j += 1
        return IntervalUnion(out)

    def issubset(self, other: "IntervalUnion", tol: float = 0.0) -> bool:
        """True when every piece lies inside some piece of ``other`` (up to ``tol``)."""
        return self.excess_over(other) <= tol

    def excess_over(self, other: "IntervalUnion") -> float:
        """Measure of the part of ``self`` lying outside ``other``."""
        return self.measure() - self.intersect(other).measure()


@dataclass(frozen=True)
class MergeEvent:
    """First contact between two pieces of a moving union."""

    time: float
    left_index: int
    right_index: int


def measure(U: IntervalUnion) -> float:
    return U.measure()


def rearrange_symmetric(U: IntervalUnion) -> IntervalUnion:
    """Centered interval with the same measure as ``U``."""
    m = U.measure()
    if m <= 0.0:
        return IntervalUnion()
    return IntervalUnion([(-0.5 * m, 0.5 * m)])


def _sgn(x: float) -> float:
    return (x > 0.0) - (x < 0.0)


class _Motion:
    """Mutable state of the event-driven simulation.

    Pieces are stored as (center, length) so lengths never change except
    by exact addition at merges.  ``members`` tracks which original pieces
    were fused into each current piece.
    """

    def __init__(self, U: IntervalUnion):
        self.c = [0.5 * (a + b) for a, b in U]
        self.L = [b - a for a, b in U]
        self.members = [[i] for i in range(len(U))]
        self.t = 0.0
        self.merges: list[tuple[float, int, int]] = []
        self._merge_touching()

    def _gap(self, i: int) -> float:
        return (self.c[i + 1] - 0.5 * self.L[i + 1]) - (self.c[i] + 0.5 * self.L[i])

    def _merge_touching(self, candidates: Iterable[int] = ()) -> None:
        """Fuse neighbours that touch.  ``candidates`` are pair indices whose
        contact time coincides with the current event."""
        flagged = set(candidates)
        i = 0
        while i < len(self.c) - 1:
            if self._gap(i) <= 0.0 or i in flagged:
                left = self.c[i] - 0.5 * self.L[i]
                length = self.L[i] + self.L[i + 1]
                self.merges.append((self.t, self.members[i][-1], self.members[i + 1][0]))
                self.c[i] = left + 0.5 * length
                self.L[i] = length
                self.members[i] = self.members[i] + self.members[i + 1]
                del self.c[i + 1], self.L[i + 1], self.members[i + 1]
                # indices of later candidates shift down by one
                flagged = {j - 1 if j > i else j for j in flagged if j != i}
                if i > 0:
                    i -= 1
                continue
            i += 1

    def _next_event(self) -> float:
        """Time until the next centering or contact (inf if none)."""
        v = [-_sgn(ci) for ci in self.c]
        dt = float("inf")
        for ci, vi in zip(self.c, v):
            if vi != 0.0:
                dt = min(dt, abs(ci))
        for i in range(len(self.c) - 1):
            rate = v[i] - v[i + 1]
            if rate > 0.0:
                dt = min(dt, self._gap(i) / rate)
        return dt

    def advance(self, horizon: float, stop_at_merge: bool = False) -> None:
        """Run the motion until time ``horizon`` (absolute)."""
        while self.t < horizon:
            dt = self._next_event()
            if self.t + dt > horizon:
                dt = horizon - self.t
                self._move(dt, event=False)
                self.t = horizon
                return
            self._move(dt, event=True)
            if stop_at_merge and self.merges:
                return
            if dt == float("inf"):
                return

    def _move(self, dt: float, event: bool) -> None:
        if dt == float("inf"):
            return
        v = [-_sgn(ci) for ci in self.c]
        scale = max(1.0, abs(self.t), dt)
        tol = _EVENT_RTOL * scale
        # pairs whose contact time coincides with this step
        touching = []
        if event:
            for i in range(len(self.c) - 1):
                rate = v[i] - v[i + 1]
                if rate > 0.0 and abs(self._gap(i) / rate - dt) <= tol:
                    touching.append(i)
        for i, vi in enumerate(v):
            if vi == 0.0:
                continue
            if event and abs(abs(self.c[i]) - dt) <= tol:
                self.c[i] = 0.0
            else:
                self.c[i] += vi * dt
        self.t += dt
        if event:
            self._merge_touching(candidates=touching)

    def union(self) -> IntervalUnion:
        pairs = []
        for ci, Li in zip(self.c, self.L):
            pairs.append((ci - 0.5 * Li, ci + 0.5 * Li))
        # round-off can leave neighbours overlapping by an ulp
        for k in range(len(pairs) - 1):
            if pairs[k + 1][0] < pairs[k][1]:
                mid = 0.5 * (pairs[k + 1][0] + pairs[k][1])
                pairs[k] = (pairs[k][0], mid)
                pairs[k + 1] = (mid, pairs[k + 1][1])
        return IntervalUnion(pairs)


def m_tau(U: IntervalUnion, tau: float) -> IntervalUnion:
    """Continuous Steiner motion of ``U`` run for time ``tau``.

    Examples
    --------
    >>> m_tau(IntervalUnion([(1, 3)]), 0.5)
    IntervalUnion([(0.5, 2.5)])
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if not U:
        return U
    state = _Motion(U)
    state.advance(float(tau))
    return state.union()


def next_merge_time(U: IntervalUnion) -> MergeEvent | None:
    """First time two pieces of ``U`` touch under the motion, or None."""
    if len(U) < 2:
        return None
    state = _Motion(U)
    if not state.merges:
        state.advance(float("inf"), stop_at_merge=True)
    if not state.merges:
        return None
    t, left, right = state.merges[0]
    return MergeEvent(time=t, left_index=left, right_index=right)


def settling_time(U: IntervalUnion) -> float:
    """Time after which ``m_tau(U, t)`` equals ``rearrange_symmetric(U)``."""
    if not U:
        return 0.0
    state = _Motion(U)
    while len(state.c) > 1 or state.c[0] != 0.0:
        dt = state._next_event()
        if dt == float("inf"):
            break
        state._move(dt, event=True)
    return state.t
