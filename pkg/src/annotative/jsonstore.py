"""JSON documents as annotated content.

Each JSON value is appended piece by piece: structural characters become
marker tokens, strings are bracketed by quote markers and numbers by number
markers.  Every object member, array element and the root receive a path
annotation such as ``:batters:batter:[0]:type:``; arrays carry their length
and numeric leaves their value.  Object keys are visited in sorted order.

Aggregations run a structural query and fold the values (or translated text)
of its solutions in memory.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import math
import os
import re
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Iterable, List, Optional, Tuple, Union

from . import gcl
from .core import Interval
from .tok import Structural

log = logging.getLogger(__name__)

ROOT = ":"
FILES_PREFIX = "Files/"

_OPEN_OBJ = Structural.OBJECT_OPEN.value
_CLOSE_OBJ = Structural.OBJECT_CLOSE.value
_OPEN_ARR = Structural.ARRAY_OPEN.value
_CLOSE_ARR = Structural.ARRAY_CLOSE.value
_QUOTE = Structural.QUOTE.value
_COLON = Structural.COLON.value
_COMMA = Structural.COMMA.value
_NUMBER = Structural.NUMBER.value

_NONCHAR = re.compile("[\\ufdd0-\\ufdef]")


class JsonIngestError(ValueError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


def _string_body(s: str) -> str:
    body = json.dumps(s, ensure_ascii=False)[1:-1]
    # noncharacters would be taken for markers; keep them as JSON escapes
    return _NONCHAR.sub(lambda m: "\\u%04x" % ord(m.group()), body)


def format_number(x: Union[int, float]) -> str:
    """Canonical JSON text for a number (shortest round-trip form)."""
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise JsonIngestError(f"non-finite number {x!r}")
    return repr(x)


class _Ingester:
    def __init__(self, warren):
        self.w = warren

    def emit(self, text: str) -> Interval:
        return self.w.append(text)

    def value(self, v: Any, path: str) -> Interval:
        if isinstance(v, dict):
            return self.obj(v, path)
        if isinstance(v, list):
            return self.array(v, path)
        if isinstance(v, str):
            iv = self.emit(_QUOTE + _string_body(v) + _QUOTE)
            self.w.annotate(path, *iv)
            return iv
        if isinstance(v, bool):
            iv = self.emit("true" if v else "false")
            self.w.annotate(path, *iv, v=1.0 if v else 0.0)
            return iv
        if v is None:
            iv = self.emit("null")
            self.w.annotate(path, *iv)
            return iv
        if isinstance(v, (int, float)):
            iv = self.emit(_NUMBER + format_number(v) + _NUMBER)
            self.w.annotate(path, *iv, v=float(v))
            return iv
        raise JsonIngestError(f"unsupported JSON value {type(v).__name__}")

    def obj(self, d: dict, path: str) -> Interval:
        p, _ = self.emit(_OPEN_OBJ)
        first = True
        for key in sorted(d):
            if not first:
                self.emit(_COMMA)
            first = False
            self.emit(_QUOTE + _string_body(key) + _QUOTE + _COLON)
            self.value(d[key], f"{path}{key}:")
        _, q = self.emit(_CLOSE_OBJ)
        self.w.annotate(path, p, q)
        return (p, q)

    def array(self, a: list, path: str) -> Interval:
        p, _ = self.emit(_OPEN_ARR)
        for i, item in enumerate(a):
            if i:
                self.emit(_COMMA)
            self.value(item, f"{path}[{i}]:")
        _, q = self.emit(_CLOSE_ARR)
        self.w.annotate(path, p, q, v=float(len(a)))
        return (p, q)


def ingest_json(warren, document: Union[str, Any], parsed: bool = False) -> Interval:
    """Append one JSON value inside the open transaction; returns its extent.

    ``document`` is JSON text unless ``parsed`` is set.  The root receives the
    ``:`` annotation.
    """
    if not parsed:
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise JsonIngestError(f"malformed JSON: {e.msg}", e.lineno, e.colno) from None
    return _Ingester(warren).value(document, ROOT)


def iter_documents(path: str) -> Iterable[Any]:
    """Objects from a ``.json`` or ``.jsonl`` file.

    A ``.json`` file may hold one value or several separated by whitespace
    (as database exports often do); a single top-level array yields its
    elements.
    """
    with open(path, "r", encoding="utf-8") as fh:
        if path.endswith(".jsonl") or path.endswith(".ndjson"):
            for n, line in enumerate(fh, 1):
                if line.strip():
                    try:
                        yield json.loads(line)
                    except json.JSONDecodeError as e:
                        raise JsonIngestError(f"{path}:{n}: {e.msg}", n, e.colno) from None
            return
        text = fh.read()
    decoder = json.JSONDecoder()
    docs = []
    pos = _skip_ws(text, 0)
    while pos < len(text):
        try:
            doc, pos = decoder.raw_decode(text, pos)
        except json.JSONDecodeError as e:
            raise JsonIngestError(f"{path}: {e.msg}", e.lineno, e.colno) from None
        docs.append(doc)
        pos = _skip_ws(text, pos)
    if len(docs) == 1 and isinstance(docs[0], list):
        yield from docs[0]
    else:
        yield from docs


_WS = re.compile(r"\s*")


def _skip_ws(text: str, pos: int) -> int:
    return _WS.match(text, pos).end()


def file_feature(name: str) -> str:
    return FILES_PREFIX + os.path.basename(name)


def ingest_file(warren, path: str, name: Optional[str] = None) -> Tuple[int, Optional[Interval]]:
    """Ingest every object of a file and annotate the file's extent.

    Returns ``(object count, extent)``.
    """
    first = last = None
    n = 0
    for doc in iter_documents(path):
        p, q = ingest_json(warren, doc, parsed=True)
        first = p if first is None else first
        last = q
        n += 1
    if first is None:
        return 0, None
    warren.annotate(file_feature(name or path), first, last)
    return n, (first, last)


def file_extent(name: str) -> gcl.Atom:
    """Atom for the extent of an ingested file; scope with ``<<``."""
    return gcl.Atom(file_feature(name))


# -- dates -------------------------------------------------------------------

_MONTHS = {m: i for i, m in enumerate(
    ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"], 1)}
_MON_DD_YYYY = re.compile(r"^\s*([A-Za-z]{3})[a-z]*\.?\s+(\d{1,2}),?\s+(\d{4})\s*$")
_ISO = re.compile(r"^\s*(\d{4})-(\d{2})-(\d{2})(?:[T ].*)?$")


def parse_date(value: Any) -> Optional[_dt.date]:
    """Recognize "Feb 20 2015", ISO "2015-02-20" and millisecond epochs."""
    if isinstance(value, bool) or value is None:
        return None
    try:
        if isinstance(value, (int, float)) or (isinstance(value, str) and value.strip().isdigit()):
            ms = int(value)
            if ms < 0:
                return None
            return (_dt.datetime(1970, 1, 1) + _dt.timedelta(milliseconds=ms)).date()
        if not isinstance(value, str):
            return None
        m = _MON_DD_YYYY.match(value)
        if m:
            month = _MONTHS.get(m.group(1).lower())
            if month is None:
                return None
            return _dt.date(int(m.group(3)), month, int(m.group(2)))
        m = _ISO.match(value)
        if m:
            return _dt.date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    except (ValueError, OverflowError):
        return None
    return None


def date_features(d: _dt.date) -> List[str]:
    return [f"year={d.year:04d}", f"month={d.month:02d}", f"day={d.day:02d}"]


@dataclass
class DateReport:
    annotated: int = 0
    skipped: int = 0


def annotate_dates(warren, field_path: str, scope: Union[str, gcl.Expr] = ROOT) -> DateReport:
    """Add year/month/day annotations to objects whose field holds a date.

    ``field_path`` is a path feature such as ``:date:``; each solution must
    lie inside a solution of ``scope`` (default: top-level objects), which
    receives the date annotations.  Needs an open transaction; reads use the
    handle's snapshot, so only committed objects are seen.
    """
    report = DateReport()
    scope_expr = gcl.parse_query(scope) if isinstance(scope, str) else scope
    objects = warren.solve(scope_expr)
    snap = warren.snapshot
    starts = [p for (p, _), _ in objects]
    from bisect import bisect_right
    for (p, q), v in warren.solve(gcl.Atom(field_path)):
        i = bisect_right(starts, p) - 1
        if i < 0 or objects[i][0][1] < q:
            continue
        op, oq = objects[i][0]
        text = snap.translate(p, q)
        try:
            raw = json.loads(text)
        except ValueError:
            raw = text
        d = parse_date(raw)
        if d is None:
            report.skipped += 1
            continue
        for feat in date_features(d):
            warren.annotate(feat, op, oq)
        report.annotated += 1
    return report


# -- aggregation -------------------------------------------------------------

COUNT, MIN, MAX, AVG, SUM = "COUNT", "MIN", "MAX", "AVG", "SUM"
GROUP_BY, EXPLODE, SELECT = "GROUP_BY", "EXPLODE", "SELECT"
KINDS = (COUNT, MIN, MAX, AVG, SUM, GROUP_BY, EXPLODE, SELECT)


@dataclass
class AggregationSpec:
    """What to fold over the solutions of ``target``.

    ``source`` is ``"value"`` (annotation values) or ``"text"`` (the
    translated JSON of each solution, decoded when numeric).
    """

    kind: str
    target: Union[str, gcl.Expr]
    source: str = "value"
    limit: Optional[int] = None

    def __post_init__(self):
        self.kind = self.kind.upper().replace(" ", "_")
        if self.kind not in KINDS:
            raise ValueError(f"unknown aggregation {self.kind!r}")
        if self.source not in ("value", "text"):
            raise ValueError("source must be 'value' or 'text'")


@dataclass
class AggregateResult:
    rows: List[Tuple]
    skipped: int = 0
    columns: Tuple[str, ...] = field(default=())


def _decode(text: str) -> Any:
    try:
        return json.loads(text)
    except ValueError:
        return text


def _numeric(x) -> Optional[float]:
    if isinstance(x, bool) or x is None:
        return None
    if isinstance(x, (int, float)):
        return float(x)
    return None


def aggregate(warren, spec: AggregationSpec) -> AggregateResult:
    target = gcl.parse_query(spec.target) if isinstance(spec.target, str) else spec.target
    solutions = warren.solve(target)
    snap = warren.snapshot
    kind = spec.kind

    if kind == COUNT:
        return AggregateResult([(len(solutions),)], columns=("count",))

    if kind == SELECT:
        rows = [(p, q, _decode(snap.translate(p, q))) for (p, q), _ in solutions]
        if spec.limit is not None:
            rows = rows[:spec.limit]
        return AggregateResult(rows, columns=("start", "end", "value"))

    if kind == GROUP_BY:
        counts: "OrderedDict[str, int]" = OrderedDict()
        for (p, q), _ in solutions:
            key = _decode(snap.translate(p, q))
            key = key if isinstance(key, str) else json.dumps(key, sort_keys=True)
            counts[key] = counts.get(key, 0) + 1
        rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if spec.limit is not None:
            rows = rows[:spec.limit]
        return AggregateResult(rows, columns=("key", "count"))

    if kind == EXPLODE:
        array = target
        if isinstance(target, gcl.Op) and target.op == gcl.CONTAINED_IN:
            array = target.left
        if not isinstance(array, gcl.Atom):
            raise ValueError("EXPLODE needs an array path feature as its target")
        rows = []
        for (p, q), v in solutions:
            for i in range(int(v)):
                elem = warren.solve(gcl.Op(gcl.CONTAINED_IN, gcl.Atom(f"{array.name}[{i}]:"),
                                           gcl.Window(q - p + 1, p, q)))
                for (ep, eq), _ in elem:
                    rows.append((p, i, _decode(snap.translate(ep, eq))))
        if spec.limit is not None:
            rows = rows[:spec.limit]
        return AggregateResult(rows, columns=("array", "index", "value"))

    nums = []
    skipped = 0
    for (p, q), v in solutions:
        if spec.source == "value":
            x = v
        else:
            x = _numeric(_decode(snap.translate(p, q)))
        if x is None:
            skipped += 1
        else:
            nums.append(x)
    if skipped:
        log.warning("%d non-numeric values skipped", skipped)
    if not nums:
        return AggregateResult([], skipped, (kind.lower(),))
    if kind == MIN:
        out = min(nums)
    elif kind == MAX:
        out = max(nums)
    elif kind == SUM:
        out = math.fsum(nums)
    else:
        out = math.fsum(nums) / len(nums)
    return AggregateResult([(out,)], skipped, (kind.lower(),))
