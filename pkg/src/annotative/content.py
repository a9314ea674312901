"""Content storage and the translation function from intervals to text.

Committed content lives in chunks, one per transaction (or per merged run of
them).  A chunk records the text exactly as appended together with the
address of its first token; token boundaries are recomputed from the text on
demand, which is cheap and keeps the stored form compact.  Appends within one
transaction are joined with an invisible boundary mark so that adjacent words
from separate appends stay separate tokens.
"""

from __future__ import annotations

import threading
from bisect import bisect_right
from collections import OrderedDict
from typing import List, Sequence, Tuple

from .core import AnnotativeError, Interval
from .tok import render, tokenize

# Not a token and renders as nothing.
BOUNDARY = "\ufdef"


class UndefinedTranslation(AnnotativeError, LookupError):
    """The interval contains a gap or lies outside stored content."""


class EmptyContent(AnnotativeError, ValueError):
    pass


class Chunk:
    __slots__ = ("start", "end", "text")

    def __init__(self, start: int, end: int, text: str):
        self.start = start
        self.end = end
        self.text = text

    def __repr__(self):
        return f"Chunk({self.start}, {self.end}, {self.text[:20]!r})"


class _OffsetCache:
    """Small LRU of token offset tables keyed by chunk identity."""

    def __init__(self, size: int = 256):
        self.size = size
        self._data: "OrderedDict[int, Tuple[Chunk, List[Tuple[int, int]]]]" = OrderedDict()
        self._lock = threading.Lock()

    def offsets(self, chunk: Chunk) -> List[Tuple[int, int]]:
        key = id(chunk)
        with self._lock:
            hit = self._data.get(key)
            if hit is not None and hit[0] is chunk:
                self._data.move_to_end(key)
                return hit[1]
        offs = [(t.start, t.end) for t in tokenize(chunk.text)]
        with self._lock:
            self._data[key] = (chunk, offs)
            if len(self._data) > self.size:
                self._data.popitem(last=False)
        return offs


_offsets = _OffsetCache()


def token_offsets(chunk: Chunk) -> List[Tuple[int, int]]:
    return _offsets.offsets(chunk)


def gap_intersects(gaps: Sequence[Interval], p: int, q: int) -> bool:
    i = bisect_right(gaps, (q, float("inf"))) - 1
    return i >= 0 and gaps[i][1] >= p


class ContentView:
    """Read access to the content of a set of chunks minus erased gaps."""

    def __init__(self, chunks: Sequence[Chunk], gaps: Sequence[Interval] = ()):
        self.chunks = sorted(chunks, key=lambda c: c.start)
        self._starts = [c.start for c in self.chunks]
        self.gaps = list(gaps)

    def translate(self, p: int, q: int, raw: bool = False) -> str:
        """Text from the first character of token ``p`` to the last of ``q``.

        Structural markers are rendered back to the JSON characters they
        stand for unless ``raw`` is set.
        """
        if p > q:
            raise UndefinedTranslation(f"empty interval ({p}, {q})")
        if gap_intersects(self.gaps, p, q):
            raise UndefinedTranslation(f"({p}, {q}) overlaps erased content")
        i = bisect_right(self._starts, p) - 1
        if i < 0 or self.chunks[i].end < p:
            raise UndefinedTranslation(f"no content at address {p}")
        pieces = []
        addr = p
        while True:
            c = self.chunks[i]
            offs = token_offsets(c)
            lo = offs[addr - c.start][0]
            if q <= c.end:
                pieces.append(c.text[lo:offs[q - c.start][1]])
                break
            pieces.append(c.text[lo:])
            i += 1
            if i >= len(self.chunks) or self.chunks[i].start != c.end + 1:
                raise UndefinedTranslation(f"gap after address {c.end}")
            addr = c.end + 1
        text = "".join(pieces).replace(BOUNDARY, "")
        return text if raw else render(text)

    def extents(self) -> List[Interval]:
        """Maximal runs of contiguous, unerased content."""
        out: List[Interval] = []
        for c in self.chunks:
            for iv in _subtract(c.start, c.end, self.gaps):
                if out and out[-1][1] + 1 == iv[0]:
                    out[-1] = (out[-1][0], iv[1])
                else:
                    out.append(iv)
        return out


def _subtract(p: int, q: int, gaps: Sequence[Interval]):
    for gp, gq in gaps:
        if gq < p or gp > q:
            continue
        if gp > p:
            yield (p, gp - 1)
        p = gq + 1
        if p > q:
            return
    if p <= q:
        yield (p, q)
