import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from annotative.warren import Warren  # noqa: E402

DATA = os.path.join(os.path.dirname(__file__), "data")
DONUT = os.path.join(DATA, "donut.json")


@pytest.fixture
def warren():
    w = Warren.create()
    yield w
    w.close()


@pytest.fixture
def index_dir(tmp_path):
    return str(tmp_path / "idx")


def commit_texts(w, *texts, annotate=None):
    """Append each text in its own transaction; returns the intervals."""
    out = []
    for text in texts:
        with w.writing():
            iv = w.append(text)
            if annotate:
                w.annotate(annotate, *iv)
        out.append(iv)
    return out


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number, part, ok, detail=""):
    """Remember one acceptance outcome for the end-of-run summary."""
    ACCEPTANCE[(number, part)] = (ok, detail)
    print(f"criterion {number}{part}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted({n for n, _ in ACCEPTANCE}):
        parts = sorted((p, r) for (n, p), r in ACCEPTANCE.items() if n == number)
        ok = all(r[0] for _, r in parts)
        detail = "; ".join(f"{p + ': ' if p else ''}{r[1]}" for p, r in parts if r[1])
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
