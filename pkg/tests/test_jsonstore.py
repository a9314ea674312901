import datetime as dt
import json

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from annotative.jsonstore import (AggregationSpec, JsonIngestError, aggregate, annotate_dates,
                                  file_extent, ingest_file, ingest_json, parse_date)
from annotative.warren import Warren

from conftest import DONUT

TRACE = [(0, 0), (1, 4), (5, 5), (6, 9), (10, 10), (11, 11), (12, 15), (16, 18), (19, 19),
         (20, 23), (24, 26), (27, 27), (10, 84), (95, 98), (99, 101), (102, 102), (103, 106),
         (107, 110), (0, 254)]

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10 ** 12, 10 ** 12)
    | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=5), inner, max_size=4),
    max_leaves=12)


def ingest(w, *docs, text=False):
    with w.writing():
        return [ingest_json(w, d, parsed=not text) for d in docs]


def all_intervals(w):
    snap = w.snapshot
    out = set()
    for fid in snap.feature_ids():
        out.update(iv for iv, _ in snap.annotation_list(fid).entries())
    return out


def test_donut_trace(warren, monkeypatch):
    appended = []
    real_append = warren.append

    def recording_append(text):
        iv = real_append(text)
        appended.append(iv)
        return iv

    monkeypatch.setattr(warren, "append", recording_append)
    with open(DONUT) as fh:
        root, = ingest(warren, fh.read(), text=True)
    assert root == (0, 254)
    with warren.reading():
        have = all_intervals(warren) | set(appended)
        assert [iv for iv in TRACE if iv not in have] == []
        assert list(warren.annotation_list(":batters:batter:").entries()) == [((10, 84), 4.0)]
        assert list(warren.annotation_list(":ppu:").entries()) == [((107, 110), 0.55)]
        assert warren.translate(16, 18) == '"1001"'
        with open(DONUT) as fh:
            assert json.loads(warren.translate(0, 254)) == json.load(fh)


def test_empty_object(warren):
    (p, q), = ingest(warren, {})
    assert (p, q) == (0, 1)
    with warren.reading():
        assert warren.translate(p, q) == "{}"
        assert [iv for iv, _ in warren.solve(":")] == [(0, 1)]


def test_malformed_json(warren):
    with warren.writing():
        with pytest.raises(JsonIngestError) as ei:
            ingest_json(warren, '{"a": 1,\n "b": }')
        assert ei.value.line == 2
        warren.append("x")


@settings(max_examples=150, suppress_health_check=[HealthCheck.too_slow])
@given(json_values)
def test_structural_fidelity(doc):
    w = Warren.create()
    root, = ingest(w, doc)
    with w.reading():
        assert json.loads(w.translate(*root)) == doc
        w.check_invariants()


def paths(doc, prefix=":"):
    yield prefix, doc
    if isinstance(doc, dict):
        for k, v in doc.items():
            yield from paths(v, f"{prefix}{k}:")
    elif isinstance(doc, list):
        for i, v in enumerate(doc):
            yield from paths(v, f"{prefix}[{i}]:")


@settings(max_examples=100, suppress_health_check=[HealthCheck.too_slow])
@given(st.dictionaries(st.text("abc:[]", max_size=3), json_values, max_size=4))
def test_path_completeness(doc):
    w = Warren.create()
    ingest(w, doc)
    with w.reading():
        for path, sub in paths(doc):
            lst = w.annotation_list(path)
            assert len(lst) >= 1, path
            values = [json.loads(w.translate(*iv)) for iv, _ in lst.entries()]
            assert sub in values, path
            if isinstance(sub, list):
                assert len(sub) in [v for _, v in lst.entries()]


def test_array_and_scalar_values(warren):
    ingest(warren, {"a": [1, 2, 3], "t": True, "f": False, "n": None, "x": -2.5})
    with warren.reading():
        def value(path):
            (_, v), = warren.annotation_list(path).entries()
            return v
        assert value(":a:") == 3.0
        assert value(":t:") == 1.0
        assert value(":f:") == 0.0
        assert value(":n:") == 0.0
        assert value(":x:") == -2.5
        assert value(":a:[2]:") == 3.0


def test_top_level_array_file(tmp_path, warren):
    path = tmp_path / "many.json"
    path.write_text(json.dumps([{"k": 1}, {"k": 2}]))
    with warren.writing():
        n, extent = ingest_file(warren, str(path))
    assert n == 2
    with warren.reading():
        assert len(warren.solve(":")) == 2
        assert [iv for iv, _ in warren.solve(file_extent("many.json"))] == [extent]


def test_file_extents_partition_counts(tmp_path, warren):
    counts = {"a.jsonl": 3, "b.jsonl": 5, "c.ndjson": 1}
    for name, n in counts.items():
        (tmp_path / name).write_text("\n".join(json.dumps({"i": i, "f": name}) for i in range(n)))
        with warren.writing():
            ingest_file(warren, str(tmp_path / name))
    with warren.reading():
        total = len(warren.solve(":"))
        per = {name: len(warren.solve(f": << Files/{name}")) for name in counts}
    assert per == counts
    assert sum(per.values()) == total


# -- dates


@pytest.mark.parametrize("raw, want", [
    ("Feb 20 2015", dt.date(2015, 2, 20)),
    ("Dec 3, 2008", dt.date(2008, 12, 3)),
    ("2015-02-20", dt.date(2015, 2, 20)),
    ("2015-02-20T10:00:00Z", dt.date(2015, 2, 20)),
    (1180075887000, dt.date(2007, 5, 25)),
    ("1180075887000", dt.date(2007, 5, 25)),
    ("Foo 20 2015", None),
    ("2015-13-01", None),
    (True, None),
    (None, None),
    ("yesterday", None),
])
def test_parse_date(raw, want):
    assert parse_date(raw) == want


def test_date_unification(warren):
    ingest(warren, {"when": "Feb 20 2015", "id": 1}, {"when": 1424390400000, "id": 2},
           {"when": "2015-02-21", "id": 3}, {"when": "soon", "id": 4}, {"id": 5})
    with warren.writing():
        report = annotate_dates(warren, ":when:")
    assert (report.annotated, report.skipped) == (3, 1)
    with warren.reading():
        same_day = warren.solve("year=2015 ^ month=02 ^ day=20")
        assert len(same_day) == 2
        for iv, _ in same_day:
            assert json.loads(warren.translate(*iv))["id"] in (1, 2)
        assert len(warren.solve("(: >> year=2015)")) == 3


# -- aggregation


@pytest.fixture
def reviews(warren):
    ingest(warren,
           {"ppu": 0.55, "grade": "Pass", "stars": 5, "tags": ["a", "b"]},
           {"ppu": 0.55, "grade": "Fail", "stars": 2, "tags": []},
           {"ppu": 0.55, "grade": "Pass", "stars": 4, "tags": ["c"], "note": "x"})
    warren.start()
    yield warren
    warren.end()


def test_aggregate_count_and_select(reviews):
    assert aggregate(reviews, AggregationSpec("COUNT", ":note:")).rows == [(1,)]
    rows = aggregate(reviews, AggregationSpec("SELECT", ":ppu:")).rows
    assert [r[2] for r in rows] == [0.55, 0.55, 0.55]
    assert len(aggregate(reviews, AggregationSpec("select", ":ppu:", limit=2)).rows) == 2


def test_aggregate_group_by(reviews):
    assert aggregate(reviews, AggregationSpec("group by", ":grade:")).rows == [("Pass", 2), ("Fail", 1)]


def test_aggregate_numeric(reviews):
    def agg(kind, source="value"):
        return aggregate(reviews, AggregationSpec(kind, ":stars:", source)).rows[0][0]
    assert agg("MIN") == 2.0
    assert agg("MAX") == 5.0
    assert agg("SUM") == 11.0
    assert agg("AVG") == pytest.approx(11 / 3, abs=1e-12)
    assert agg("AVG", "text") == pytest.approx(11 / 3, abs=1e-12)
    res = aggregate(reviews, AggregationSpec("MAX", ":grade:", "text"))
    assert res.rows == [] and res.skipped == 3


def test_aggregate_explode(reviews):
    rows = aggregate(reviews, AggregationSpec("EXPLODE", ":tags:")).rows
    assert [(i, v) for _, i, v in rows] == [(0, "a"), (1, "b"), (0, "c")]


def test_aggregation_spec_validation():
    with pytest.raises(ValueError):
        AggregationSpec("MEDIAN", ":x:")
    with pytest.raises(ValueError):
        AggregationSpec("MIN", ":x:", source="bytes")


def test_concatenated_json_file(tmp_path, warren):
    path = tmp_path / "export.json"
    path.write_text('{"k": 1}\n{"k": [2]}\n\n  {"k": 3}')
    with warren.writing():
        assert ingest_file(warren, str(path))[0] == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"k": 1}\n{"k": }')
    with warren.writing():
        with pytest.raises(JsonIngestError) as ei:
            ingest_file(warren, str(bad))
    assert ei.value.line == 2
