"""Address-space arithmetic and the interval relations shared by every module.

An interval is a plain ``(start, end)`` tuple of integers with ``start <= end``
(both ends inclusive).  Annotation lists and query results hand around
``(interval, value)`` pairs; nothing here allocates objects per interval.
"""

from __future__ import annotations

from typing import Iterable, List, NamedTuple, Tuple

# Sentinel addresses are the extreme signed 64-bit values.  They never appear
# in stored annotations, only in cursor results.
NEG_INF = -(1 << 63)
POS_INF = (1 << 63) - 1

# Finite addresses stay well clear of the sentinels so that window arithmetic
# such as ``k + n - 1`` can never land on one.
MIN_ADDR = -(1 << 62)
MAX_ADDR = 1 << 62

Interval = Tuple[int, int]

END = (POS_INF, POS_INF)
BEGIN = (NEG_INF, NEG_INF)

# Reserved feature id: never indexed, marks erased regions.
ERASED = 0


class Annotation(NamedTuple):
    feature: int
    start: int
    end: int
    value: float = 0.0

    @property
    def interval(self) -> Interval:
        return (self.start, self.end)


class AnnotativeError(Exception):
    """Base class for errors raised by this package."""


class InvariantError(AnnotativeError):
    """Input violates the minimal-interval ordering."""


def is_finite(addr: int) -> bool:
    return NEG_INF < addr < POS_INF


def contains(a: Interval, b: Interval) -> bool:
    """True when ``a`` lies within ``b`` (equality counts)."""
    return b[0] <= a[0] and a[1] <= b[1]


def nests(a: Interval, b: Interval) -> bool:
    """True when ``a`` lies strictly within ``b``."""
    return a != b and b[0] <= a[0] and a[1] <= b[1]


def overlaps(a: Interval, b: Interval) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def reduce(intervals: Iterable[Interval]) -> List[Interval]:
    """Drop every interval that has another member nested inside it.

    Duplicates collapse.  The result is sorted by start address, which is
    also end-address order.
    """
    # Ascending end, descending start: when an interval is visited, every
    # candidate that could nest inside it has already been seen.
    ordered = sorted(set(intervals), key=lambda iv: (iv[1], -iv[0]))
    out = []
    max_start = NEG_INF - 1
    for p, q in ordered:
        if p > max_start:
            out.append((p, q))
            max_start = p
    return out


def check_mis(intervals: Iterable[Interval]) -> None:
    """Raise :class:`InvariantError` unless starts and ends strictly increase."""
    prev = None
    for iv in intervals:
        if iv[0] > iv[1]:
            raise InvariantError(f"inverted interval {iv}")
        if prev is not None and not (prev[0] < iv[0] and prev[1] < iv[1]):
            raise InvariantError(f"{iv} does not follow {prev}")
        prev = iv
