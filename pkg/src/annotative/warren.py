"""Transactions, snapshots, durability and background merging.

A :class:`Warren` is a per-thread handle onto a shared index.  All reads go
through a snapshot pinned by :meth:`Warren.start`; writes are grouped into a
transaction that is private until :meth:`Warren.ready` assigns it a sequence
number and a permanent address range and logs it, and :meth:`Warren.commit`
publishes it.  Each committed transaction becomes an immutable
:class:`Segment`; a snapshot is the tuple of segments committed when it was
taken.  Segments are merged in the background and superseded ones are deleted
once no snapshot pins them.

On disk an index directory holds::

    MANIFEST            JSON: format version, mode, segment files, counters
    commit.log          length-prefixed, checksummed ready/commit/abort records
    seg-<lo>-<hi>.seg   merged subindexes (same encoding as log unit bodies)
"""

from __future__ import annotations

import itertools
import json
import logging
import os
import re
import struct
import threading
import zlib
from collections import OrderedDict, defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import gcl
from .annidx import (EMPTY_LIST, AnnotationList, Hopper, add_gap, decode_arrays,
                     encode_block, merge_lists)
from .content import (BOUNDARY, Chunk, ContentView, EmptyContent,
                      UndefinedTranslation)
from .core import ERASED, AnnotativeError, Interval, check_mis, reduce
from .feat import Vocabulary, featurize, json_featurize
from .tok import tokenize

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
SEGMENT_MAGIC = b"ANNSEG\x00\x01"
MANIFEST = "MANIFEST"
LOG_NAME = "commit.log"

STATIC = "static"
DYNAMIC = "dynamic"

FeatureLike = Union[str, int]


class UsageError(AnnotativeError, RuntimeError):
    """An operation was called out of order."""


class ReservedFeature(AnnotativeError, ValueError):
    pass


class OutOfContent(AnnotativeError, ValueError):
    pass


class ReadyFailed(AnnotativeError, IOError):
    pass


class CorruptIndex(AnnotativeError, IOError):
    pass


# -- crash injection ---------------------------------------------------------

class _FailPoints:
    """Process exit at the N-th durable write, for crash-recovery testing.

    Enabled by ``ANNOTATIVE_CRASH_AT=N`` (optionally ``N:torn`` to leave half
    of the record on disk first).  Inert otherwise.
    """

    def __init__(self):
        spec = os.environ.get("ANNOTATIVE_CRASH_AT", "")
        self.target = None
        self.torn = False
        if spec:
            n, _, mode = spec.partition(":")
            self.target = int(n)
            self.torn = mode == "torn"
        self.count = 0
        self._lock = threading.Lock()

    def write(self, fh, data: bytes) -> None:
        if self.target is None:
            fh.write(data)
            return
        with self._lock:
            self.count += 1
            hit = self.count == self.target
        if hit:
            if self.torn:
                fh.write(data[: len(data) // 2])
                fh.flush()
            os._exit(86)
        fh.write(data)


_failpoints = _FailPoints()


def _fsync_dir(path: str) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def _atomic_write(path: str, data: bytes, sync: bool = True) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        _failpoints.write(fh, data)
        fh.flush()
        if sync:
            os.fsync(fh.fileno())
    os.replace(tmp, path)
    if sync:
        _fsync_dir(os.path.dirname(path) or ".")


# -- segments ----------------------------------------------------------------

_segment_ids = itertools.count(1)


class Segment:
    """Immutable subindex covering a range of sequence numbers."""

    def __init__(self, seq_lo: int, seq_hi: int, lists: Dict[int, AnnotationList],
                 chunks: List[Chunk], erased: List[Interval], vocab: Dict[int, str],
                 addr_end: int = 0, path: Optional[str] = None,
                 blocks: Optional[Dict[int, Tuple[int, int]]] = None,
                 blob: Optional[bytes] = None):
        self.uid = next(_segment_ids)
        self.seq_lo = seq_lo
        self.seq_hi = seq_hi
        self._lists = lists
        self.chunks = chunks
        self.erased = erased
        self.vocab = vocab
        self.addr_end = addr_end
        self.path = path
        # lazily decoded blocks: fid -> (offset, length) into blob
        self._blocks = blocks or {}
        self._blob = blob
        self.pins = 0
        self.retired = False

    def feature_ids(self) -> Iterable[int]:
        if self._blocks:
            return self._blocks.keys()
        return self._lists.keys()

    def has(self, fid: int) -> bool:
        return fid in self._lists or fid in self._blocks

    def list(self, fid: int) -> Optional[AnnotationList]:
        lst = self._lists.get(fid)
        if lst is None and fid in self._blocks:
            off, n = self._blocks[fid]
            lst = AnnotationList(*decode_arrays(self._blob[off:off + n]))
            self._lists[fid] = lst
        return lst

    def __repr__(self):
        return f"Segment({self.seq_lo}..{self.seq_hi}, {len(self._blocks) or len(self._lists)} features)"


def encode_segment(seg: Segment) -> bytes:
    body = bytearray()
    features = []
    for fid in sorted(seg.feature_ids()):
        block = encode_block(list(seg.list(fid).entries()))
        features.append([fid, len(body), len(block)])
        body += block
    chunks = []
    for c in seg.chunks:
        data = zlib.compress(c.text.encode("utf-8"))
        chunks.append([c.start, c.end, len(body), len(data)])
        body += data
    header = json.dumps({
        "version": FORMAT_VERSION,
        "seq": [seg.seq_lo, seg.seq_hi],
        "addr_end": seg.addr_end,
        "features": features,
        "chunks": chunks,
        "erased": [list(g) for g in seg.erased],
        "vocab": [[f, s] for f, s in seg.vocab.items()],
    }).encode("utf-8")
    header = zlib.compress(header)
    out = bytearray(SEGMENT_MAGIC)
    out += struct.pack("<I", len(header))
    out += header
    out += body
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


def decode_segment(data: bytes, path: Optional[str] = None) -> Segment:
    if data[:len(SEGMENT_MAGIC)] != SEGMENT_MAGIC:
        raise CorruptIndex("bad segment magic")
    if struct.unpack_from("<I", data, len(data) - 4)[0] != zlib.crc32(data[:-4]):
        raise CorruptIndex("segment checksum mismatch")
    pos = len(SEGMENT_MAGIC)
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    header = json.loads(zlib.decompress(data[pos:pos + hlen]))
    if header["version"] != FORMAT_VERSION:
        raise CorruptIndex(f"unsupported segment version {header['version']}")
    base = pos + hlen
    blocks = {fid: (base + off, n) for fid, off, n in header["features"]}
    chunks = [Chunk(p, q, zlib.decompress(data[base + off:base + off + n]).decode("utf-8"))
              for p, q, off, n in header["chunks"]]
    return Segment(header["seq"][0], header["seq"][1], {}, chunks,
                   [tuple(g) for g in header["erased"]],
                   {f: s for f, s in header["vocab"]}, header["addr_end"],
                   path=path, blocks=blocks, blob=data)


def merge_segments(group: Sequence[Segment], gaps: Sequence[Interval]) -> Segment:
    """Fold segments (in sequence order) into one, dropping erased material."""
    fids = set()
    for s in group:
        fids.update(s.feature_ids())
    lists = {}
    for fid in fids:
        merged = merge_lists([s.list(fid) for s in group if s.has(fid)], gaps)
        if len(merged):
            lists[fid] = merged
    chunks = []
    for s in group:
        for c in s.chunks:
            if not _inside_gap(c.start, c.end, gaps):
                chunks.append(c)
    chunks.sort(key=lambda c: c.start)
    erased: List[Interval] = []
    for s in group:
        for g in s.erased:
            erased = add_gap(erased, g)
    vocab = {}
    for s in group:
        vocab.update(s.vocab)
    return Segment(group[0].seq_lo, group[-1].seq_hi, lists, chunks, erased, vocab,
                   max(s.addr_end for s in group))


def _inside_gap(p: int, q: int, gaps: Sequence[Interval]) -> bool:
    return any(gp <= p and q <= gq for gp, gq in gaps)


# -- commit log --------------------------------------------------------------

READY = b"R"
COMMIT = b"C"
ABORT = b"A"
_FRAME = struct.Struct("<II")
_SEQ = struct.Struct("<Q")


class CommitLog:
    """Append-only record log with length + CRC framing."""

    def __init__(self, path: str, sync: bool = True):
        self.path = path
        self.sync = sync
        self._lock = threading.Lock()
        self._fh = open(path, "ab")

    @staticmethod
    def frame(kind: bytes, seq: int, body: bytes = b"") -> bytes:
        payload = kind + _SEQ.pack(seq) + body
        return _FRAME.pack(len(payload), zlib.crc32(payload)) + payload

    def append(self, kind: bytes, seq: int, body: bytes = b"", sync: Optional[bool] = None) -> None:
        data = self.frame(kind, seq, body)
        with self._lock:
            _failpoints.write(self._fh, data)
            self._fh.flush()
            if self.sync if sync is None else sync:
                os.fsync(self._fh.fileno())

    @staticmethod
    def scan(path: str):
        """Return ``(records, good_length)``; reading stops at a torn tail."""
        records = []
        if not os.path.exists(path):
            return records, 0
        with open(path, "rb") as fh:
            data = fh.read()
        pos = 0
        while pos + _FRAME.size <= len(data):
            n, crc = _FRAME.unpack_from(data, pos)
            payload = data[pos + _FRAME.size:pos + _FRAME.size + n]
            if len(payload) < n or n < 9 or zlib.crc32(payload) != crc:
                break
            records.append((payload[:1], _SEQ.unpack_from(payload, 1)[0], payload[9:]))
            pos += _FRAME.size + n
        if pos != len(data):
            log.warning("dropping %d bytes of torn log tail in %s", len(data) - pos, path)
        return records, pos

    def rewrite(self, frames: List[bytes]) -> None:
        with self._lock:
            self._fh.close()
            _atomic_write(self.path, b"".join(frames), self.sync)
            self._fh = open(self.path, "ab")

    def close(self):
        with self._lock:
            self._fh.close()


# -- snapshots ---------------------------------------------------------------

class _LRU:
    def __init__(self, size):
        self.size = size
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            v = self._data.get(key)
            if v is not None:
                self._data.move_to_end(key)
            return v

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            if len(self._data) > self.size:
                self._data.popitem(last=False)


class Snapshot:
    """Immutable read view: the segments committed when it was taken."""

    def __init__(self, index: "_Index", segments: Sequence[Segment]):
        self._index = index
        self.segments = tuple(segments)
        self.key = tuple(s.uid for s in self.segments)
        gaps: List[Interval] = []
        for s in self.segments:
            for g in s.erased:
                gaps = add_gap(gaps, g)
        self.gaps = gaps
        self._content = None
        self.released = False

    def annotation_list(self, fid: int) -> AnnotationList:
        if fid == ERASED:
            return AnnotationList.from_entries([(g, 0.0) for g in self.gaps], check=False)
        cache_key = (self.key, fid)
        lst = self._index.cache.get(cache_key)
        if lst is None:
            parts = [s.list(fid) for s in self.segments if s.has(fid)]
            lst = merge_lists(parts, self.gaps) if parts else EMPTY_LIST
            self._index.cache.put(cache_key, lst)
        return lst

    def hopper(self, fid: int) -> Hopper:
        return Hopper(self.annotation_list(fid))

    def max_value(self, fid: int) -> float:
        return self.annotation_list(fid).max_value

    @property
    def content(self) -> ContentView:
        if self._content is None:
            chunks = [c for s in self.segments for c in s.chunks]
            self._content = ContentView(chunks, self.gaps)
        return self._content

    def translate(self, p: int, q: int) -> str:
        return self.content.translate(p, q)

    def feature_ids(self) -> set:
        out = set()
        for s in self.segments:
            out.update(s.feature_ids())
        return out

    def address_end(self) -> int:
        return max((s.addr_end for s in self.segments), default=0)


# -- transactions ------------------------------------------------------------

class Transaction:
    """Private buffer for one update, in its own provisional address space.

    Addresses handed out by :meth:`append` start at ``hint``, the first free
    address when the transaction began.  At ready time every endpoint at or
    beyond ``hint`` is shifted onto the permanent range; endpoints below it
    refer to already committed content and are left alone.
    """

    def __init__(self, hint: int):
        self.hint = hint
        self.cursor = hint
        self.texts: List[str] = []
        self.annotations: Dict[int, Dict[Interval, float]] = defaultdict(dict)
        self.erased: List[Interval] = []
        self.vocab: Dict[int, str] = {}
        self.seq: Optional[int] = None
        self.base: Optional[int] = None
        self.unit: Optional[Segment] = None
        self.state = "open"

    def append(self, text: str) -> Interval:
        tokens = tokenize(text)
        if not tokens:
            raise EmptyContent("appended text contains no tokens")
        p = self.cursor
        for i, tok in enumerate(tokens):
            f = json_featurize(tok)
            if f:
                self.annotations[f][(p + i, p + i)] = 0.0
        self.texts.append(text)
        self.cursor = p + len(tokens)
        return (p, self.cursor - 1)

    def annotate(self, fid: int, p: int, q: int, v: float) -> None:
        if p > q:
            raise ValueError(f"inverted interval ({p}, {q})")
        if q >= self.cursor:
            raise OutOfContent(f"({p}, {q}) extends past the end of content")
        self.annotations[fid][(p, q)] = float(v)

    def erase(self, p: int, q: int) -> None:
        if p > q:
            raise ValueError(f"inverted interval ({p}, {q})")
        if p < 0 or q >= self.cursor:
            raise OutOfContent(f"cannot erase ({p}, {q}): outside content")
        self.erased.append((p, q))

    def build(self, seq: int, base: int) -> Segment:
        shift = base - self.hint
        hint = self.hint

        def remap(x):
            return x + shift if x >= hint else x

        lists = {}
        for fid, entries in self.annotations.items():
            moved = {(remap(p), remap(q)): v for (p, q), v in entries.items()}
            kept = reduce(moved)
            lists[fid] = AnnotationList([p for p, _ in kept], [q for _, q in kept],
                                        [moved[iv] for iv in kept])
        n = self.cursor - hint
        chunks = [Chunk(base, base + n - 1, BOUNDARY.join(self.texts))] if n else []
        erased: List[Interval] = []
        for p, q in self.erased:
            erased = add_gap(erased, (remap(p), remap(q)))
        return Segment(seq, seq, lists, chunks, erased, dict(self.vocab), base + n)


# -- shared index state ------------------------------------------------------

class _Index:
    def __init__(self, path: Optional[str], mode: str, sync: bool, fanin: int):
        self.path = path
        self.mode = mode
        self.sync = sync
        self.fanin = fanin
        self.lock = threading.Lock()
        self.merge_lock = threading.Lock()
        self.static_lock = threading.Lock()
        self.manifest_lock = threading.Lock()
        self.segments: List[Segment] = []
        self.pending: set = set()
        self.next_seq = 1
        self.next_addr = 0
        self.vocab = Vocabulary()
        self.cache = _LRU(8192)
        self.retired: List[Segment] = []
        self.gc_deleted = 0
        self.merges = 0
        self.log: Optional[CommitLog] = None
        self._maint: Optional[threading.Thread] = None
        self._maint_stop = threading.Event()

    # -- snapshots

    def snapshot(self) -> Snapshot:
        with self.lock:
            snap = Snapshot(self, self.segments)
            for s in snap.segments:
                s.pins += 1
        return snap

    def release(self, snap: Snapshot) -> None:
        with self.lock:
            if snap.released:
                return
            snap.released = True
            for s in snap.segments:
                s.pins -= 1
        self.collect()

    def collect(self) -> int:
        """Delete retired segments that no snapshot pins."""
        doomed = []
        with self.lock:
            keep = []
            for s in self.retired:
                (doomed if s.pins == 0 else keep).append(s)
            self.retired = keep
            self.gc_deleted += len(doomed)
        for s in doomed:
            if s.path and os.path.exists(s.path):
                os.remove(s.path)
        return len(doomed)

    # -- two-phase commit

    def begin(self) -> Transaction:
        if self.mode == STATIC:
            self.static_lock.acquire()
        with self.lock:
            return Transaction(self.next_addr)

    def ready(self, txn: Transaction) -> None:
        with self.lock:
            seq = self.next_seq
            self.next_seq += 1
            base = self.next_addr
            self.next_addr += txn.cursor - txn.hint
            self.pending.add(seq)
        txn.seq, txn.base = seq, base
        try:
            txn.unit = txn.build(seq, base)
            if self.log is not None:
                self.log.append(READY, seq, encode_segment(txn.unit))
        except Exception as e:
            self.abort(txn)
            raise ReadyFailed(f"ready failed: {e}") from e
        txn.state = "ready"

    def commit(self, txn: Transaction) -> None:
        if self.log is not None:
            self.log.append(COMMIT, txn.seq)
        unit = txn.unit
        with self.lock:
            i = len(self.segments)
            while i and self.segments[i - 1].seq_lo > unit.seq_lo:
                i -= 1
            self.segments.insert(i, unit)
            self.pending.discard(txn.seq)
        self.vocab.update(unit.vocab.items())
        txn.state = "committed"
        self._finish(txn)
        if self.mode == STATIC:
            self.checkpoint()

    def abort(self, txn: Transaction) -> None:
        if txn.seq is not None:
            if self.log is not None and txn.state != "aborted":
                self.log.append(ABORT, txn.seq, sync=False)
            with self.lock:
                self.pending.discard(txn.seq)
        txn.state = "aborted"
        self._finish(txn)

    def _finish(self, txn: Transaction) -> None:
        if self.mode == STATIC and self.static_lock.locked():
            self.static_lock.release()

    # -- merging

    def _tier(self, s: Segment) -> int:
        n = s.seq_hi - s.seq_lo + 1
        t = 0
        while n >= self.fanin:
            n //= self.fanin
            t += 1
        return t

    def _mergeable(self, group: Sequence[Segment]) -> bool:
        lo, hi = group[0].seq_lo, group[-1].seq_hi
        return not any(lo <= s <= hi for s in self.pending)

    def _pick_group(self, everything: bool) -> Optional[List[Segment]]:
        segs = self.segments
        if everything:
            if len(segs) > 1 or (segs and segs[0].path is None and self.path):
                if self._mergeable(segs):
                    return list(segs)
            return None
        i = 0
        while i < len(segs):
            t = self._tier(segs[i])
            j = i
            while j < len(segs) and self._tier(segs[j]) == t:
                j += 1
            run = segs[i:j]
            for k in range(0, len(run) - self.fanin + 1):
                group = run[k:k + self.fanin]
                if self._mergeable(group):
                    return list(group)
            i = j
        return None

    def merge_step(self, everything: bool = False) -> bool:
        with self.merge_lock:
            with self.lock:
                group = self._pick_group(everything)
                gaps: List[Interval] = []
                for s in self.segments:
                    for g in s.erased:
                        gaps = add_gap(gaps, g)
            if not group:
                return False
            merged = merge_segments(group, gaps)
            if self.path:
                name = f"seg-{merged.seq_lo:012d}-{merged.seq_hi:012d}-{merged.uid}.seg"
                merged.path = os.path.join(self.path, name)
                data = encode_segment(merged)
                _atomic_write(merged.path, data, self.sync)
                if self.mode == STATIC:
                    merged = decode_segment(data, merged.path)
            with self.lock:
                i = self.segments.index(group[0])
                self.segments[i:i + len(group)] = [merged]
                for s in group:
                    s.retired = True
                self.retired.extend(group)
                self.merges += 1
            if self.path:
                self.write_manifest()
                self.compact_log()
            self.collect()
            return True

    def checkpoint(self) -> None:
        while self.merge_step(everything=True):
            pass

    # -- persistence

    def write_manifest(self) -> None:
        with self.manifest_lock:
            with self.lock:
                doc = {
                    "format": "annotative-index",
                    "version": FORMAT_VERSION,
                    "mode": self.mode,
                    "segments": [os.path.basename(s.path) for s in self.segments if s.path],
                    "next_seq": self.next_seq,
                    "next_addr": self.next_addr,
                }
            _atomic_write(os.path.join(self.path, MANIFEST),
                          json.dumps(doc, indent=1).encode("utf-8"), self.sync)

    def compact_log(self) -> None:
        """Drop log records already captured in segment files or aborted."""
        if self.log is None:
            return
        with self.log._lock:
            self.log._fh.flush()
        records, _ = CommitLog.scan(self.log.path)
        with self.lock:
            on_disk = [(s.seq_lo, s.seq_hi) for s in self.segments if s.path]
            live_seqs = {s.seq_lo for s in self.segments if not s.path} | set(self.pending)
        frames = [CommitLog.frame(kind, seq, body) for kind, seq, body in records
                  if seq in live_seqs and kind != ABORT
                  and not any(lo <= seq <= hi for lo, hi in on_disk)]
        self.log.rewrite(frames)

    # -- maintenance thread

    def start_maintenance(self, interval: float = 0.05) -> None:
        if self._maint is not None:
            return
        self._maint_stop.clear()

        def loop():
            while not self._maint_stop.is_set():
                try:
                    while self.merge_step():
                        pass
                    self.collect()
                except Exception:  # keep merging on later rounds
                    log.exception("background merge failed")
                self._maint_stop.wait(interval)

        self._maint = threading.Thread(target=loop, name="annotative-merge", daemon=True)
        self._maint.start()

    def stop_maintenance(self) -> None:
        if self._maint is not None:
            self._maint_stop.set()
            self._maint.join()
            self._maint = None


def _recover(path: str, sync: bool, fanin: int, mode: Optional[str]) -> _Index:
    mpath = os.path.join(path, MANIFEST)
    if not os.path.exists(mpath):
        raise CorruptIndex(f"{path} is not an index directory")
    with open(mpath, "rb") as fh:
        doc = json.loads(fh.read())
    if doc.get("version") != FORMAT_VERSION:
        raise CorruptIndex(f"unsupported index version {doc.get('version')}")
    index = _Index(path, mode or doc["mode"], sync, fanin)
    index.next_seq = doc["next_seq"]
    index.next_addr = doc["next_addr"]
    listed = set(doc["segments"])
    for name in doc["segments"]:
        spath = os.path.join(path, name)
        with open(spath, "rb") as fh:
            index.segments.append(decode_segment(fh.read(), spath))
    for name in os.listdir(path):
        if re.fullmatch(r"seg-.*\.seg(\.tmp)?", name) and name not in listed:
            os.remove(os.path.join(path, name))
    covered = [(s.seq_lo, s.seq_hi) for s in index.segments]

    lpath = os.path.join(path, LOG_NAME)
    records, good = CommitLog.scan(lpath)
    if os.path.exists(lpath) and good != os.path.getsize(lpath):
        with open(lpath, "r+b") as fh:
            fh.truncate(good)
    units: Dict[int, bytes] = {}
    committed = set()
    for kind, seq, body in records:
        index.next_seq = max(index.next_seq, seq + 1)
        if kind == READY:
            units[seq] = body
        elif kind == COMMIT:
            committed.add(seq)
    for seq in sorted(units):
        if any(lo <= seq <= hi for lo, hi in covered):
            continue
        unit = decode_segment(units[seq])
        index.next_addr = max(index.next_addr, unit.addr_end)
        if seq in committed:
            index.segments.append(unit)
    index.segments.sort(key=lambda s: s.seq_lo)
    for s in index.segments:
        index.vocab.update(s.vocab.items())
    index.log = CommitLog(lpath, sync)
    index.write_manifest()
    index.compact_log()
    return index


# -- handles -----------------------------------------------------------------

class Warren:
    """Handle for one thread of work on an index.

    Create one with :meth:`create` or :meth:`open`; call :meth:`clone` to get
    further handles for other threads.  A handle holds at most one snapshot
    and one transaction at a time.
    """

    def __init__(self, index: _Index):
        self._index = index
        self._snap: Optional[Snapshot] = None
        self._txn: Optional[Transaction] = None

    # -- construction

    @classmethod
    def create(cls, path: Optional[str] = None, mode: str = DYNAMIC, sync: bool = True,
               fanin: int = 8, force: bool = False) -> "Warren":
        """New empty index, in memory when ``path`` is None."""
        if mode not in (STATIC, DYNAMIC):
            raise ValueError(f"mode must be {STATIC!r} or {DYNAMIC!r}")
        index = _Index(path, mode, sync, fanin)
        if path is not None:
            if os.path.exists(os.path.join(path, MANIFEST)):
                if not force:
                    raise UsageError(f"{path} already holds an index")
                for name in os.listdir(path):
                    if name == MANIFEST or name == LOG_NAME or name.startswith("seg-"):
                        os.remove(os.path.join(path, name))
            os.makedirs(path, exist_ok=True)
            index.log = CommitLog(os.path.join(path, LOG_NAME), sync)
            index.write_manifest()
        return cls(index)

    @classmethod
    def open(cls, path: str, sync: bool = True, fanin: int = 8,
             mode: Optional[str] = None) -> "Warren":
        """Open an existing index, recovering from any interrupted commit."""
        return cls(_recover(path, sync, fanin, mode))

    recover = open

    def clone(self) -> "Warren":
        return Warren(self._index)

    def close(self) -> None:
        if self._txn is not None:
            self.abort()
        if self._snap is not None:
            self.end()
        self._index.stop_maintenance()
        if self._index.log is not None:
            self._index.log.close()

    # -- snapshots

    def start(self) -> None:
        if self._snap is not None:
            raise UsageError("start() called twice without end()")
        self._snap = self._index.snapshot()

    def end(self) -> None:
        if self._snap is None:
            raise UsageError("end() without start()")
        if self._txn is not None:
            raise UsageError("end() with a transaction still open")
        snap, self._snap = self._snap, None
        self._index.release(snap)

    @property
    def snapshot(self) -> Snapshot:
        if self._snap is None:
            raise UsageError("no snapshot: call start() first")
        return self._snap

    # -- transactions

    def transaction(self) -> None:
        if self._snap is None:
            raise UsageError("transaction() requires start()")
        if self._txn is not None:
            raise UsageError("a transaction is already open")
        self._txn = self._index.begin()

    def _open_txn(self) -> Transaction:
        if self._txn is None or self._txn.state != "open":
            raise UsageError("no open transaction")
        return self._txn

    def append(self, text: str) -> Interval:
        return self._open_txn().append(text)

    def featurize(self, feature: FeatureLike) -> int:
        if isinstance(feature, int):
            return feature
        return featurize(feature)

    def record_vocabulary(self, s: str, fid: Optional[int] = None) -> int:
        fid = featurize(s) if fid is None else fid
        self._open_txn().vocab[fid] = s
        return fid

    def annotate(self, feature: FeatureLike, p: int, q: Optional[int] = None,
                 v: float = 0.0) -> None:
        txn = self._open_txn()
        if isinstance(feature, str):
            fid = featurize(feature)
            txn.vocab.setdefault(fid, feature)
        else:
            fid = feature
        if fid == ERASED:
            raise ReservedFeature("feature 0 is reserved for erasure")
        txn.annotate(fid, p, p if q is None else q, v)

    def erase(self, p: int, q: int) -> None:
        self._open_txn().erase(p, q)

    def ready(self) -> bool:
        txn = self._open_txn()
        try:
            self._index.ready(txn)
        except ReadyFailed:
            self._txn = None
            raise
        return True

    def commit(self) -> None:
        txn = self._txn
        if txn is None or txn.state != "ready":
            raise UsageError("commit() requires a successful ready()")
        self._index.commit(txn)
        self._txn = None

    def abort(self) -> None:
        if self._txn is None:
            raise UsageError("no transaction to abort")
        self._index.abort(self._txn)
        self._txn = None

    @property
    def in_transaction(self) -> bool:
        return self._txn is not None

    # -- reads

    def hopper(self, feature: FeatureLike) -> Hopper:
        return self.snapshot.hopper(self.featurize(feature))

    def annotation_list(self, feature: FeatureLike) -> AnnotationList:
        return self.snapshot.annotation_list(self.featurize(feature))

    def max_value(self, feature: FeatureLike) -> float:
        return self.snapshot.max_value(self.featurize(feature))

    def translate(self, p: int, q: int) -> str:
        return self.snapshot.translate(p, q)

    def query(self, expr: Union[str, "gcl.Expr"]) -> "gcl.Node":
        if isinstance(expr, str):
            expr = gcl.parse_query(expr)
        return gcl.compile_expr(expr, self.snapshot.hopper)

    def solve(self, expr, visit=None, start: int = 0):
        node = self.query(expr)
        if visit is None:
            return list(gcl.solutions(node, start))
        return gcl.solve(node, visit, start)

    def vocabulary(self) -> Vocabulary:
        return self._index.vocab

    # -- maintenance

    def merge_step(self) -> bool:
        return self._index.merge_step()

    def checkpoint(self) -> None:
        self._index.checkpoint()

    def collect(self) -> int:
        return self._index.collect()

    def start_maintenance(self, interval: float = 0.05) -> None:
        self._index.start_maintenance(interval)

    def stop_maintenance(self) -> None:
        self._index.stop_maintenance()

    @property
    def mode(self) -> str:
        return self._index.mode

    @property
    def path(self) -> Optional[str]:
        return self._index.path

    def stats(self) -> dict:
        ix = self._index
        with ix.lock:
            return {
                "mode": ix.mode,
                "subindexes": len(ix.segments),
                "next_seq": ix.next_seq,
                "next_addr": ix.next_addr,
                "pending": len(ix.pending),
                "merges": ix.merges,
                "retired": len(ix.retired),
                "gc_deleted": ix.gc_deleted,
            }

    def check_invariants(self) -> None:
        """Raise if any list breaks minimal-interval order or content overlaps."""
        snap = self._index.snapshot()
        try:
            for fid in snap.feature_ids():
                lst = snap.annotation_list(fid)
                check_mis(zip(lst.starts, lst.ends))
            last = None
            for c in snap.content.chunks:
                if last is not None and c.start <= last:
                    raise AnnotativeError(f"content chunks overlap at {c.start}")
                n = len(tokenize(c.text))
                if n != c.end - c.start + 1:
                    raise AnnotativeError(f"chunk at {c.start} holds {n} tokens")
                last = c.end
        finally:
            self._index.release(snap)

    # -- context helpers

    def reading(self):
        return _Reading(self)

    def writing(self):
        return _Writing(self)


class _Reading:
    def __init__(self, w: Warren):
        self.w = w

    def __enter__(self):
        self.w.start()
        return self.w

    def __exit__(self, *exc):
        self.w.end()


class _Writing:
    """``start`` + ``transaction`` on entry; ``ready``/``commit`` (or ``abort``) on exit."""

    def __init__(self, w: Warren):
        self.w = w

    def __enter__(self):
        self.w.start()
        try:
            self.w.transaction()
        except BaseException:
            self.w.end()
            raise
        return self.w

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                self.w.ready()
                self.w.commit()
            elif self.w.in_transaction:
                self.w.abort()
        finally:
            self.w.end()


__all__ = ["Warren", "Snapshot", "Segment", "Transaction", "UsageError",
           "ReservedFeature", "OutOfContent", "ReadyFailed", "CorruptIndex",
           "UndefinedTranslation", "EmptyContent", "STATIC", "DYNAMIC"]
