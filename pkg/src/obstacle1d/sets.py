"""Finite unions of disjoint open intervals.

IntervalSet values carry coincidence sets, sign sets and their set algebra.
Normalization merges overlapping or touching intervals and drops degenerate
ones, so measures and set operations stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError


def _normalize(intervals):
    items = sorted((float(l), float(r)) for l, r in intervals if r > l)
    merged: list[tuple[float, float]] = []
    for l, r in items:
        if merged and l <= merged[-1][1]:
            if r > merged[-1][1]:
                merged[-1] = (merged[-1][0], r)
        else:
            merged.append((l, r))
    return tuple(merged)


@dataclass(frozen=True)
class IntervalSet:
    """Sorted union of pairwise disjoint open intervals (l, r), l < r."""

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    @classmethod
    def whole(cls, a: float, b: float) -> "IntervalSet":
        if not b > a:
            raise DomainError(f"degenerate interval ({a}, {b})")
        return cls(((a, b),))

    @property
    def measure(self) -> float:
        return sum(r - l for l, r in self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def endpoints(self) -> list[float]:
        out: list[float] = []
        for l, r in self.intervals:
            out.append(l)
            out.append(r)
        return out

    def contains(self, x: float) -> bool:
        return any(l < x < r for l, r in self.intervals)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if hi > lo:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(tuple(out))

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for l, r in self.intervals:
            lo = l
            for ol, orr in other.intervals:
                if orr <= lo:
                    continue
                if ol >= r:
                    break
                if ol > lo:
                    out.append((lo, min(ol, r)))
                lo = max(lo, orr)
                if lo >= r:
                    break
            if lo < r:
                out.append((lo, r))
        return IntervalSet(tuple(out))

    def complement(self, a: float, b: float) -> "IntervalSet":
        return IntervalSet.whole(a, b).difference(self)

    def __iter__(self):
        return iter(self.intervals)

    def __repr__(self):
        body = " U ".join(f"({l:.6g}, {r:.6g})" for l, r in self.intervals)
        return f"IntervalSet[{body or 'empty'}]"
