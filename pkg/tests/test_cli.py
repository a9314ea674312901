import json
import subprocess
import sys

import pytest

from annotative.cli import ENV_INDEX, main

REVIEWS = [
    {"product": "lamp", "stars": 5, "grade": "Pass", "date": "Dec 3 2008", "tags": ["bright"]},
    {"product": "desk", "stars": 2, "grade": "Fail", "date": "2008-12-04", "tags": []},
    {"product": "lamp", "stars": 4, "grade": "Pass", "date": 1228348800000, "tags": ["warm", "cheap"]},
]


@pytest.fixture
def corpus(tmp_path):
    (tmp_path / "a.jsonl").write_text("\n".join(json.dumps(r) for r in REVIEWS))
    (tmp_path / "docs.tsv").write_text(
        "D1\tthe quick brown fox\nD2\tlazy dogs sleep all day\nD3\tquick quick foxes jump\n")
    (tmp_path / "topics.tsv").write_text("1\tquick fox\n2\tlazy dog\n3\tunseen words\n")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_build_and_query(corpus, capsys):
    idx = corpus / "idx"
    code, out, _ = run(capsys, "build", "-i", idx, corpus / "a.jsonl", corpus / "docs.tsv")
    assert code == 0
    assert out.splitlines()[0].endswith("\t3")
    assert run(capsys, "build", "-i", idx, corpus / "a.jsonl")[0] == 1
    assert run(capsys, "build", "-i", idx, "--force", corpus / "a.jsonl")[0] == 0
    assert run(capsys, "query", "-i", idx, "--count", ":")[1] == "3\n"
    assert run(capsys, "query", "-i", idx, "--count", ": << Files/a.jsonl")[1] == "3\n"
    code, out, _ = run(capsys, "query", "-i", idx, "--avg", ":stars:", ":")
    assert code == 0 and float(out) == pytest.approx(11 / 3)
    out = run(capsys, "query", "-i", idx, "--group-by", ":grade:", ":")[1]
    assert out.splitlines() == ["Pass\t2", "Fail\t1"]
    out = run(capsys, "query", "-i", idx, "--explode", ":tags:", ":", "--format", "jsonl")[1]
    assert [json.loads(line)["value"] for line in out.splitlines()] == ["bright", "warm", "cheap"]
    out = run(capsys, "query", "-i", idx, ":product:", "--limit", "1")[1]
    assert out.split("\t")[2].strip() == "lamp"


def test_query_errors(corpus, capsys):
    idx = corpus / "idx"
    run(capsys, "build", "-i", idx, corpus / "a.jsonl")
    code, _, err = run(capsys, "query", "-i", idx, "a << b ^ c")
    assert code == 1 and "^" in err.splitlines()[-1]
    assert run(capsys, "query", "-i", corpus / "missing", ":")[0] == 1
    assert run(capsys, "query", ":")[0] == 1
    assert run(capsys, "build", "-i", idx, corpus / "nope.json")[0] == 1
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == 1


def test_env_index(corpus, capsys, monkeypatch):
    monkeypatch.setenv(ENV_INDEX, str(corpus / "env-idx"))
    assert run(capsys, "build", corpus / "a.jsonl")[0] == 0
    assert run(capsys, "query", "--count", ":")[1] == "3\n"


def test_dates_idempotent(corpus, capsys):
    idx = corpus / "idx"
    run(capsys, "build", "-i", idx, corpus / "a.jsonl")
    for _ in range(2):
        out = run(capsys, "dates", "-i", idx, ":date:")[1]
        assert out.splitlines() == ["annotated\t3", "skipped\t0"]
    assert run(capsys, "query", "-i", idx, "--count", "year=2008 ^ month=12 ^ day=04")[1] == "2\n"


def test_rank_threads_identical(corpus, capsys):
    idx = corpus / "idx"
    run(capsys, "build", "-i", idx, corpus / "docs.tsv")
    one = run(capsys, "rank", "-i", idx, corpus / "topics.tsv", "--threads", "1")[1]
    four = run(capsys, "rank", "-i", idx, corpus / "topics.tsv", "--threads", "4")[1]
    assert one == four
    lines = one.splitlines()
    assert lines[0].split()[:4] == ["1", "Q0", "D3", "1"] or lines[0].split()[:4] == ["1", "Q0", "D1", "1"]
    assert not any(line.startswith("3 ") for line in lines)
    prf = run(capsys, "rank", "-i", idx, corpus / "topics.tsv", "--prf", "--fb-docs", "2")[1]
    assert prf.splitlines()[0].startswith("1 Q0 ")
    out_file = corpus / "run.txt"
    assert run(capsys, "rank", "-i", idx, corpus / "topics.tsv", "-o", out_file, "--no-wand")[0] == 0
    assert out_file.read_text() == one


def test_rank_without_stats(corpus, capsys):
    idx = corpus / "idx"
    run(capsys, "build", "-i", idx, corpus / "a.jsonl")
    assert run(capsys, "rank", "-i", idx, corpus / "topics.tsv")[0] == 1


def test_stats(corpus, capsys):
    idx = corpus / "idx"
    run(capsys, "build", "-i", idx, "--mode", "static", corpus / "a.jsonl", corpus / "docs.tsv")
    info = json.loads(run(capsys, "stats", "-i", idx)[1])
    # JSON objects and text documents both carry the ":" extent
    assert info["objects"] == 6 and info["documents_with_stats"] == 3
    assert info["mode"] == "static" and info["subindexes"] == 1


def test_recap_small(capsys):
    code, out, _ = run(capsys, "recap", "--epochs", "2", "--files-per-epoch", "3",
                       "--docs-per-file", "6", "--readers", "2", "--writers", "2", "--json")
    assert code == 0
    report = json.loads(out)
    for b in report["barriers"]:
        assert b["ap"].keys() == b["oracle"].keys()
        assert all(abs(b["ap"][t] - b["oracle"][t]) <= 1e-9 for t in b["ap"])


def test_console_script(corpus):
    out = subprocess.run([sys.executable, "-m", "annotative.cli", "query", "-i",
                          str(corpus / "none"), ":"], capture_output=True, text=True)
    assert out.returncode == 1 and "no index" in out.stderr


def test_empty_and_single_object(tmp_path, capsys):
    (tmp_path / "empty.jsonl").write_text("")
    assert run(capsys, "build", "-i", tmp_path / "e", tmp_path / "empty.jsonl")[0] == 0
    assert run(capsys, "query", "-i", tmp_path / "e", "--count", ":")[1] == "0\n"
    assert run(capsys, "dates", "-i", tmp_path / "e", ":date:")[1].splitlines()[0] == "annotated\t0"
    from conftest import DONUT
    out = run(capsys, "build", "-i", tmp_path / "d", DONUT)[1]
    assert out.splitlines() == [f"{DONUT}\t1"]


def test_recap_without_readers(capsys):
    code, out, _ = run(capsys, "recap", "--epochs", "2", "--files-per-epoch", "2",
                       "--docs-per-file", "4", "--readers", "0", "--json")
    assert code == 0
    assert json.loads(out)["samples"] == []


def test_recap_reports_violations(capsys, monkeypatch):
    from annotative import recap

    def broken(w):
        raise recap.AtomicityViolation("file at (0, 9) shows 1 of 2 documents")

    monkeypatch.setattr(recap, "check_atomicity", broken)
    code, _, err = run(capsys, "recap", "--epochs", "1", "--files-per-epoch", "1",
                       "--docs-per-file", "2", "--readers", "1")
    assert code == 2 and "AtomicityViolation" in err
