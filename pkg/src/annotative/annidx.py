"""Annotation lists, their compressed block form, and cursors over them.

A list for one feature is held as three parallel Python lists (starts, ends,
values) in minimal-interval order.  :class:`Hopper` implements the four access
methods over such a list, using galloping search from the previous result so
that a forward-moving sequence of probes costs ``O(log gap)`` each.
"""

from __future__ import annotations

import struct
from bisect import bisect_left, bisect_right
from typing import Iterable, List, Sequence, Tuple

from .core import BEGIN, END, NEG_INF, POS_INF, Interval, InvariantError, reduce

Entry = Tuple[Interval, float]

SYNC_INTERVAL = 256

_END_ENTRY = (END, 0.0)
_BEGIN_ENTRY = (BEGIN, 0.0)

# Block flags
ENDS_ELIDED = 1
VALUES_ELIDED = 2
VALUES_VARINT = 4

BLOCK_MAGIC = b"AB"
_DOUBLE = struct.Struct("<d")


# -- varints -----------------------------------------------------------------

def put_varint(out: bytearray, n: int) -> None:
    """LEB128 unsigned varint."""
    if n < 0:
        raise ValueError("negative varint")
    while n >= 0x80:
        out.append((n & 0x7F) | 0x80)
        n >>= 7
    out.append(n)


def get_varint(buf, pos: int) -> Tuple[int, int]:
    result = 0
    shift = 0
    while True:
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if b < 0x80:
            return result, pos
        shift += 7


def zigzag(n: int) -> int:
    return (n << 1) if n >= 0 else ((-n << 1) - 1)


def unzigzag(n: int) -> int:
    return (n >> 1) if not n & 1 else -((n + 1) >> 1)


def varint_size(n: int) -> int:
    size = 1
    while n >= 0x80:
        n >>= 7
        size += 1
    return size


# -- blocks ------------------------------------------------------------------

def encode_block(entries: Sequence[Entry]) -> bytes:
    """Gap-encode a list of ``((start, end), value)`` entries.

    End addresses are dropped when every interval is a single address, and
    values are dropped when all are zero.  Values that are all small
    non-negative integers are stored as varints, otherwise as doubles.  Every
    ``SYNC_INTERVAL`` entries a synchronization point records the absolute
    addresses and stream offsets, so :func:`block_tau` can start decoding
    there.
    """
    n = len(entries)
    out = bytearray(BLOCK_MAGIC)
    if n == 0:
        put_varint(out, 0)
        return bytes(out)

    prev = None
    singleton = True
    all_zero = True
    integral = True
    for (p, q), v in entries:
        if p > q or (prev is not None and not (prev[0] < p and prev[1] < q)):
            raise InvariantError(f"entry {(p, q)} out of order after {prev}")
        prev = (p, q)
        if p != q:
            singleton = False
        if v != 0:
            all_zero = False
            if not (v >= 0 and v == int(v) and v < (1 << 53)):
                integral = False

    flags = 0
    if singleton:
        flags |= ENDS_ELIDED
    if all_zero:
        flags |= VALUES_ELIDED
    elif integral:
        flags |= VALUES_VARINT

    starts = bytearray()
    ends = bytearray()
    values = bytearray()
    syncs = []
    last_p = last_q = 0
    for i, ((p, q), v) in enumerate(entries):
        if i % SYNC_INTERVAL == 0 and i:
            syncs.append((i, last_p, last_q, len(starts), len(ends), len(values)))
        if i == 0:
            put_varint(starts, zigzag(p))
            if not singleton:
                put_varint(ends, q - p)
        else:
            put_varint(starts, p - last_p)
            if not singleton:
                put_varint(ends, q - last_q)
        last_p, last_q = p, q
        if flags & VALUES_VARINT:
            put_varint(values, int(v))
        elif not all_zero:
            values += _DOUBLE.pack(v)

    put_varint(out, n)
    out.append(flags)
    put_varint(out, len(syncs))
    for i, sp, sq, so, eo, vo in syncs:
        put_varint(out, i)
        put_varint(out, zigzag(sp))
        put_varint(out, zigzag(sq))
        put_varint(out, so)
        put_varint(out, eo)
        put_varint(out, vo)
    put_varint(out, len(starts))
    put_varint(out, len(ends))
    out += starts
    out += ends
    out += values
    return bytes(out)


class _BlockHeader:
    __slots__ = ("n", "flags", "syncs", "s_base", "e_base", "v_base")

    def __init__(self, buf):
        if bytes(buf[:2]) != BLOCK_MAGIC:
            raise InvariantError("not a posting block")
        pos = 2
        self.n, pos = get_varint(buf, pos)
        self.syncs = []
        if self.n == 0:
            self.flags = ENDS_ELIDED | VALUES_ELIDED
            self.s_base = self.e_base = self.v_base = pos
            return
        self.flags = buf[pos]
        pos += 1
        nsync, pos = get_varint(buf, pos)
        for _ in range(nsync):
            row = []
            for _ in range(6):
                x, pos = get_varint(buf, pos)
                row.append(x)
            row[1] = unzigzag(row[1])
            row[2] = unzigzag(row[2])
            self.syncs.append(tuple(row))
        slen, pos = get_varint(buf, pos)
        elen, pos = get_varint(buf, pos)
        self.s_base = pos
        self.e_base = pos + slen
        self.v_base = pos + slen + elen


def _decode_run(buf, h: _BlockHeader, i0: int, p: int, q: int,
                so: int, eo: int, vo: int, count: int):
    """Decode ``count`` entries starting at entry ``i0``.

    ``p``/``q`` are the absolute addresses of entry ``i0 - 1`` (ignored when
    ``i0 == 0``); the offsets locate entry ``i0`` in each stream.
    """
    starts: List[int] = []
    ends: List[int] = []
    values: List[float] = []
    sp = h.s_base + so
    ep = h.e_base + eo
    vp = h.v_base + vo
    singleton = h.flags & ENDS_ELIDED
    vmode = h.flags & (VALUES_ELIDED | VALUES_VARINT)
    for i in range(i0, i0 + count):
        g, sp = get_varint(buf, sp)
        if i == 0:
            p = unzigzag(g)
            if singleton:
                q = p
            else:
                d, ep = get_varint(buf, ep)
                q = p + d
        else:
            p += g
            if singleton:
                q = p
            else:
                d, ep = get_varint(buf, ep)
                q += d
        starts.append(p)
        ends.append(q)
        if vmode & VALUES_ELIDED:
            values.append(0.0)
        elif vmode & VALUES_VARINT:
            v, vp = get_varint(buf, vp)
            values.append(float(v))
        else:
            values.append(_DOUBLE.unpack_from(buf, vp)[0])
            vp += 8
    return starts, ends, values


def decode_block(block: bytes) -> List[Entry]:
    starts, ends, values = decode_arrays(block)
    return [((p, q), v) for p, q, v in zip(starts, ends, values)]


def decode_arrays(block: bytes):
    h = _BlockHeader(block)
    if h.n == 0:
        return [], [], []
    return _decode_run(block, h, 0, 0, 0, 0, 0, 0, h.n)


def block_tau(block: bytes, k: int) -> Entry:
    """First entry with start >= k, decoding only from the nearest sync point."""
    h = _BlockHeader(block)
    if h.n == 0:
        return _END_ENTRY
    # sync rows: (index, prev_start, prev_end, start_off, end_off, value_off)
    lo = 0
    for j, row in enumerate(h.syncs):
        if row[1] < k:
            lo = j + 1
        else:
            break
    if lo == 0:
        i0, p, q, so, eo, vo = 0, 0, 0, 0, 0, 0
    else:
        i0, p, q, so, eo, vo = h.syncs[lo - 1]
    i1 = h.syncs[lo][0] if lo < len(h.syncs) else h.n
    starts, ends, values = _decode_run(block, h, i0, p, q, so, eo, vo, i1 - i0)
    i = bisect_left(starts, k)
    if i < len(starts):
        return ((starts[i], ends[i]), values[i])
    if i1 < h.n:
        # k lies beyond this run: the next run starts after a sync point
        row = h.syncs[lo]
        s, e, v = _decode_run(block, h, row[0], row[1], row[2],
                              row[3], row[4], row[5], 1)
        return ((s[0], e[0]), v[0])
    return _END_ENTRY


# -- lists -------------------------------------------------------------------

class AnnotationList:
    """Immutable annotation list for a single feature."""

    __slots__ = ("starts", "ends", "values", "max_value")

    def __init__(self, starts: List[int], ends: List[int], values: List[float]):
        self.starts = starts
        self.ends = ends
        self.values = values
        self.max_value = max(values) if values else 0.0

    @classmethod
    def from_entries(cls, entries: Iterable[Entry], check: bool = True) -> "AnnotationList":
        starts, ends, values = [], [], []
        for (p, q), v in entries:
            starts.append(p)
            ends.append(q)
            values.append(float(v))
        lst = cls(starts, ends, values)
        if check:
            lst.check()
        return lst

    @classmethod
    def from_block(cls, block: bytes) -> "AnnotationList":
        return cls(*decode_arrays(block))

    def to_block(self) -> bytes:
        return encode_block(list(self.entries()))

    def check(self) -> None:
        s, e = self.starts, self.ends
        for i in range(len(s)):
            if s[i] > e[i]:
                raise InvariantError(f"inverted interval {(s[i], e[i])}")
            if i and not (s[i - 1] < s[i] and e[i - 1] < e[i]):
                raise InvariantError(
                    f"{(s[i], e[i])} does not follow {(s[i - 1], e[i - 1])}")

    def entries(self) -> Iterable[Entry]:
        return (((p, q), v) for p, q, v in zip(self.starts, self.ends, self.values))

    def __len__(self):
        return len(self.starts)

    def __eq__(self, other):
        return (isinstance(other, AnnotationList) and self.starts == other.starts
                and self.ends == other.ends and self.values == other.values)

    def __repr__(self):
        return f"AnnotationList({list(self.entries())!r})"


EMPTY_LIST = AnnotationList([], [], [])


def gallop(arr: List[int], k: int, lo: int) -> int:
    """``bisect_left(arr, k)`` given that the answer is at least ``lo``."""
    n = len(arr)
    if lo >= n or arr[lo] >= k:
        return lo
    step = 1
    hi = lo + 1
    while hi < n and arr[hi] < k:
        lo = hi
        step <<= 1
        hi = lo + step
    return bisect_left(arr, k, lo + 1, min(hi, n))


class Hopper:
    """Stateful cursor over an :class:`AnnotationList`.

    ``tau(k)`` returns the entry with the smallest start >= k and ``rho(k)``
    the entry with the smallest end >= k; ``tau_back(k)`` and ``rho_back(k)``
    are their mirror images (largest end <= k, largest start <= k).  Absent
    entries come back as the ``(inf, inf)`` / ``(-inf, -inf)`` sentinels with
    value 0.  Results never depend on call history; the saved positions only
    make forward scans cheap.
    """

    __slots__ = ("lst", "calls", "_tpos", "_tk", "_rpos", "_rk", "_last_tau", "_last_rho")

    def __init__(self, lst: AnnotationList):
        self.lst = lst
        self.calls = 0
        self._tpos = 0
        self._tk = NEG_INF
        self._rpos = 0
        self._rk = NEG_INF
        self._last_tau = None
        self._last_rho = None

    def before_first(self) -> Entry:
        return _BEGIN_ENTRY

    def tau(self, k: int) -> Entry:
        self.calls += 1
        lst = self.lst
        if k == self._tk and self._last_tau is not None:
            return self._last_tau
        if k < self._tk:
            self._tpos = 0
        i = gallop(lst.starts, k, self._tpos)
        self._tpos = i
        self._tk = k
        if i < len(lst.starts):
            r = ((lst.starts[i], lst.ends[i]), lst.values[i])
        else:
            r = _END_ENTRY
        self._last_tau = r
        return r

    def rho(self, k: int) -> Entry:
        self.calls += 1
        lst = self.lst
        if k == self._rk and self._last_rho is not None:
            return self._last_rho
        if k < self._rk:
            self._rpos = 0
        i = gallop(lst.ends, k, self._rpos)
        self._rpos = i
        self._rk = k
        if i < len(lst.ends):
            r = ((lst.starts[i], lst.ends[i]), lst.values[i])
        else:
            r = _END_ENTRY
        self._last_rho = r
        return r

    def tau_back(self, k: int) -> Entry:
        self.calls += 1
        lst = self.lst
        i = bisect_right(lst.ends, k) - 1
        if i >= 0:
            return ((lst.starts[i], lst.ends[i]), lst.values[i])
        return _BEGIN_ENTRY

    def rho_back(self, k: int) -> Entry:
        self.calls += 1
        lst = self.lst
        i = bisect_right(lst.starts, k) - 1
        if i >= 0:
            return ((lst.starts[i], lst.ends[i]), lst.values[i])
        return _BEGIN_ENTRY


class ScanHopper(Hopper):
    """Hopper without skipping: every probe scans from the front."""

    __slots__ = ()

    def tau(self, k):
        self.calls += 1
        for p, q, v in zip(self.lst.starts, self.lst.ends, self.lst.values):
            if p >= k:
                return ((p, q), v)
        return _END_ENTRY

    def rho(self, k):
        self.calls += 1
        for p, q, v in zip(self.lst.starts, self.lst.ends, self.lst.values):
            if q >= k:
                return ((p, q), v)
        return _END_ENTRY


def merge_lists(lists: Sequence[AnnotationList],
                erased: Sequence[Interval] = ()) -> AnnotationList:
    """Combine lists given in increasing sequence order into one list.

    Equal intervals keep the value from the latest list; where intervals nest
    only the innermost survives; anything contained in an erased interval is
    dropped.
    """
    if not erased:
        if not lists:
            return EMPTY_LIST
        if len(lists) == 1:
            return lists[0]
    latest = {}
    for lst in lists:
        for p, q, v in zip(lst.starts, lst.ends, lst.values):
            latest[(p, q)] = v
    kept = reduce(latest)
    if erased:
        kept = [iv for iv in kept if not in_gaps(iv, erased)]
    return AnnotationList([p for p, _ in kept], [q for _, q in kept],
                          [latest[iv] for iv in kept])


def in_gaps(iv: Interval, gaps: Sequence[Interval]) -> bool:
    """True when ``iv`` is contained in one of ``gaps`` (sorted, disjoint)."""
    i = bisect_right(gaps, (iv[0], POS_INF)) - 1
    return i >= 0 and gaps[i][0] <= iv[0] and iv[1] <= gaps[i][1]


def add_gap(gaps: List[Interval], iv: Interval) -> List[Interval]:
    """Union ``iv`` into a sorted list of disjoint, non-adjacent gaps."""
    p, q = iv
    out = []
    for g in gaps:
        if g[1] < p - 1 or g[0] > q + 1:
            out.append(g)
        else:
            p = min(p, g[0])
            q = max(q, g[1])
    out.append((p, q))
    out.sort()
    return out
