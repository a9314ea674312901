"""Command-line interface.

Subcommands: ``build``, ``query``, ``rank``, ``dates``, ``stats`` and
``recap``.  The index directory comes from ``--index`` or the
``ANNOTATIVE_INDEX`` environment variable.  Exit status is 0 on success, 1
for user errors (bad input, bad query, missing index) and 2 for internal
failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
import time
from dataclasses import asdict
from typing import List, Optional, Sequence

from . import gcl, jsonstore, rank
from .core import AnnotativeError
from .recap import RecapConfig, run_recap
from .warren import DYNAMIC, STATIC, Warren

ENV_INDEX = "ANNOTATIVE_INDEX"

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _index_dir(args) -> str:
    path = args.index or os.environ.get(ENV_INDEX)
    if not path:
        raise UserError(f"no index directory: pass --index or set {ENV_INDEX}")
    return path


def _open(args) -> Warren:
    path = _index_dir(args)
    if not os.path.exists(os.path.join(path, "MANIFEST")):
        raise UserError(f"{path}: no index here (run 'build' first)")
    return Warren.open(path)


# -- build -------------------------------------------------------------------

def _ingest_text_file(w: Warren, path: str, strict: bool) -> int:
    """Plain text: one document per file; ``.tsv``: ``docno<TAB>text`` per line."""
    name = os.path.basename(path)
    n = 0
    first = last = None
    with open(path, "r", encoding="utf-8") as fh:
        if path.endswith(".tsv"):
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                docno, sep, text = line.partition("\t")
                if not sep or not text.strip():
                    if strict:
                        raise UserError(f"{path}:{lineno}: expected 'docno<TAB>text'")
                    logging.warning("%s:%d: skipped malformed line", path, lineno)
                    continue
                dp, dq = w.append(docno)
                w.annotate(rank.DOCNO, dp, dq)
                iv = _add_body(w, text)
                first = dp if first is None else first
                last = iv[1]
                n += 1
        else:
            text = fh.read()
            if text.strip():
                dp, dq = w.append(name)
                w.annotate(rank.DOCNO, dp, dq)
                iv = _add_body(w, text)
                first, last, n = dp, iv[1], 1
    if n:
        w.annotate(jsonstore.file_feature(name), first, last, n)
    return n


def _add_body(w: Warren, text: str):
    p, q = w.append(text)
    w.annotate(rank.DOC, p, q)
    rank.index_stats(w, (p, q), text)
    return (p, q)


def _ingest_json_file(w: Warren, path: str, strict: bool) -> int:
    name = os.path.basename(path)
    first = last = None
    n = 0
    docs = jsonstore.iter_documents(path)
    while True:
        try:
            doc = next(docs)
        except StopIteration:
            break
        except jsonstore.JsonIngestError as e:
            if strict:
                raise UserError(str(e))
            logging.warning("%s", e)
            if not path.endswith((".jsonl", ".ndjson")):
                break
            continue
        p, q = jsonstore.ingest_json(w, doc, parsed=True)
        first = p if first is None else first
        last = q
        n += 1
    if n:
        w.annotate(jsonstore.file_feature(name), first, last, n)
    return n


def cmd_build(args) -> int:
    path = _index_dir(args)
    for f in args.inputs:
        if not os.path.isfile(f):
            raise UserError(f"{f}: no such file")
    if os.path.exists(os.path.join(path, "MANIFEST")) and not args.force:
        raise UserError(f"{path} already holds an index (use --force to replace it)")
    t0 = time.perf_counter()
    w = Warren.create(path, mode=args.mode, force=args.force, sync=not args.no_sync)
    totals = {}

    def one(f):
        if f.endswith((".json", ".jsonl", ".ndjson")):
            return _ingest_json_file(w, f, args.strict)
        return _ingest_text_file(w, f, args.strict)

    try:
        if args.mode == STATIC:
            with w.writing():
                for f in args.inputs:
                    totals[f] = one(f)
        else:
            for f in args.inputs:
                with w.writing():
                    totals[f] = one(f)
            w.checkpoint()
    finally:
        w.close()
    elapsed = time.perf_counter() - t0
    for f, n in totals.items():
        print(f"{f}\t{n}")
    print(f"total\t{sum(totals.values())}\t{elapsed:.3f}s", file=sys.stderr)
    return EXIT_OK


# -- query -------------------------------------------------------------------

def _scoped(field: str, query: str) -> gcl.Expr:
    return gcl.Op(gcl.CONTAINED_IN, gcl.parse_query(field), gcl.parse_query(query))


def _emit_rows(rows, columns, fmt, out):
    for row in rows:
        if fmt == "jsonl":
            out.write(json.dumps(dict(zip(columns, row)), ensure_ascii=False) + "\n")
        else:
            out.write("\t".join(r if isinstance(r, str) else json.dumps(r, ensure_ascii=False)
                                for r in row) + "\n")


def cmd_query(args) -> int:
    w = _open(args)
    try:
        gcl.parse_query(args.query)  # report syntax errors before any work
        w.start()
        t0 = time.perf_counter()
        source = "text" if args.text_values else "value"
        agg = None
        for kind in ("min", "max", "avg", "sum", "group_by", "explode"):
            field = getattr(args, kind)
            if field:
                target = _scoped(field, args.query)
                agg = jsonstore.AggregationSpec(kind, target, source, args.limit)
                break
        if agg is None:
            kind = "count" if args.count else "select"
            agg = jsonstore.AggregationSpec(kind, args.query, source, args.limit)
        result = jsonstore.aggregate(w, agg)
        elapsed = time.perf_counter() - t0
        _emit_rows(result.rows, result.columns, args.format, sys.stdout)
        if result.skipped:
            print(f"skipped {result.skipped} non-numeric values", file=sys.stderr)
        if args.time:
            print(f"time\t{elapsed * 1000:.3f} ms", file=sys.stderr)
        w.end()
    finally:
        w.close()
    return EXIT_OK


# -- rank --------------------------------------------------------------------

def _read_topics(path: str):
    topics = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            qid, sep, text = line.rstrip("\n").partition("\t")
            if not sep:
                raise UserError(f"{path}:{lineno}: expected 'qid<TAB>query'")
            topics.append((qid, text))
    return topics


def rank_topics(w: Warren, topics, k: int, params: rank.BM25Params, threads: int = 1,
                prf: bool = False, fb_docs: int = 20, fb_terms: int = 10,
                wand: bool = True, tag: str = "annotative"):
    """Run lines in topic order plus per-query latencies."""
    results: List[Optional[List[str]]] = [None] * len(topics)
    latencies = [0.0] * len(topics)
    nxt = [0]
    lock = threading.Lock()

    def worker():
        h = w.clone()
        with h.reading():
            while True:
                with lock:
                    i = nxt[0]
                    nxt[0] += 1
                if i >= len(topics):
                    return
                qid, text = topics[i]
                t0 = time.perf_counter()
                terms = rank.prf_expand(h, [text], fb_docs, fb_terms, params=params) \
                    if prf else [text]
                top = rank.bm25_rank(h, terms, k, params, wand=wand).results()
                ids = [rank.docno(h, d) for d, _ in top]
                latencies[i] = time.perf_counter() - t0
                results[i] = rank.run_lines(qid, top, ids, tag)

    ts = [threading.Thread(target=worker) for _ in range(max(1, threads))]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    return [line for r in results for line in (r or [])], latencies


def cmd_rank(args) -> int:
    w = _open(args)
    try:
        topics = _read_topics(args.topics)
        with w.reading():
            if rank.collection_stats(w.snapshot).n_docs == 0:
                raise UserError("index has no document statistics; build it from text (.txt/.tsv) inputs")
        params = rank.BM25Params(args.k1, args.b)
        t0 = time.perf_counter()
        lines, lat = rank_topics(w, topics, args.k, params, args.threads, args.prf,
                                 args.fb_docs, args.fb_terms, not args.no_wand, args.tag)
        elapsed = time.perf_counter() - t0
        out = open(args.output, "w") if args.output else sys.stdout
        try:
            for line in lines:
                out.write(line + "\n")
        finally:
            if args.output:
                out.close()
        if topics:
            print(f"{len(topics)} queries in {elapsed:.3f}s: {len(topics) / elapsed:.1f} q/s, "
                  f"mean latency {1000 * sum(lat) / len(lat):.2f} ms", file=sys.stderr)
    finally:
        w.close()
    return EXIT_OK


# -- dates, stats, recap -----------------------------------------------------

def cmd_dates(args) -> int:
    w = _open(args)
    try:
        with w.writing():
            report = jsonstore.annotate_dates(w, args.field, args.scope)
        if w.mode == DYNAMIC:
            w.checkpoint()
        print(f"annotated\t{report.annotated}")
        print(f"skipped\t{report.skipped}")
    finally:
        w.close()
    return EXIT_OK


def cmd_stats(args) -> int:
    w = _open(args)
    try:
        with w.reading():
            info = w.stats()
            snap = w.snapshot
            info["objects"] = len(snap.annotation_list(w.featurize(jsonstore.ROOT)))
            info["documents_with_stats"] = rank.collection_stats(snap).n_docs
            info["features"] = len(snap.feature_ids())
            info["extents"] = len(snap.content.extents())
        print(json.dumps(info, indent=1))
    finally:
        w.close()
    return EXIT_OK


def cmd_recap(args) -> int:
    cfg = RecapConfig(epochs=args.epochs, files_per_epoch=args.files_per_epoch,
                      docs_per_file=args.docs_per_file, writers=args.writers,
                      readers=args.readers, seed=args.seed, merge=not args.no_merge,
                      path=args.index or None)
    try:
        report = run_recap(cfg)
    except AnnotativeError as e:  # a built-in consistency check tripped
        print(f"recap aborted: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.json:
        print(json.dumps({
            "config": asdict(cfg),
            "barriers": [{"phase": b.phase, "label": b.label, "documents": b.documents,
                          "ap": b.ap, "oracle": b.oracle} for b in report.barriers],
            "samples": report.samples,
            "stats": report.stats,
        }))
    else:
        print(report.table())
        print(f"reader samples {len(report.samples)}, atomicity checks {report.atomicity_checks}, "
              f"{report.elapsed:.2f}s, merges {report.stats.get('merges')}")
    worst = max((b.max_error for b in report.barriers), default=0.0)
    if worst > 1e-9:
        print(f"barrier AP differs from the static rebuild by {worst:.3g}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


# -- wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="annotative", description="Annotative index tool")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_index(sp):
        sp.add_argument("-i", "--index", default=None,
                        help=f"index directory (default: ${ENV_INDEX})")
        return sp

    b = with_index(sub.add_parser("build", help="create an index from files"))
    b.add_argument("inputs", nargs="+", help=".json/.jsonl objects, .tsv or plain-text documents")
    b.add_argument("--mode", choices=(STATIC, DYNAMIC), default=DYNAMIC)
    b.add_argument("--force", action="store_true", help="replace an existing index")
    b.add_argument("--strict", action="store_true", help="abort on the first malformed record")
    b.add_argument("--no-sync", action="store_true", help="skip fsync (faster, not crash safe)")
    b.set_defaults(func=cmd_build)

    q = with_index(sub.add_parser("query", help="run a structural query"))
    q.add_argument("query")
    g = q.add_mutually_exclusive_group()
    g.add_argument("--count", action="store_true")
    for name in ("min", "max", "avg", "sum"):
        g.add_argument(f"--{name}", metavar="FIELD", help=f"{name.upper()} of FIELD within solutions")
    g.add_argument("--group-by", dest="group_by", metavar="FIELD")
    g.add_argument("--explode", metavar="ARRAY", help="rows for each element of an array path")
    q.add_argument("--text-values", action="store_true",
                   help="fold translated text instead of annotation values")
    q.add_argument("--limit", type=int)
    q.add_argument("--format", choices=("tsv", "jsonl"), default="tsv")
    q.add_argument("--time", action="store_true", help="print evaluation time on stderr")
    q.set_defaults(func=cmd_query)

    r = with_index(sub.add_parser("rank", help="BM25 ranking to a TREC run file"))
    r.add_argument("topics", help="file of 'qid<TAB>query' lines")
    r.add_argument("-k", type=int, default=10)
    r.add_argument("--k1", type=float, default=0.82)
    r.add_argument("--b", type=float, default=0.68)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--prf", action="store_true", help="pseudo-relevance feedback")
    r.add_argument("--fb-docs", type=int, default=20)
    r.add_argument("--fb-terms", type=int, default=10)
    r.add_argument("--no-wand", action="store_true")
    r.add_argument("--tag", default="annotative")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_rank)

    d = with_index(sub.add_parser("dates", help="add year=/month=/day= annotations"))
    d.add_argument("field", help="path feature holding dates, e.g. :date:")
    d.add_argument("--scope", default=jsonstore.ROOT, help="objects receiving the annotations")
    d.set_defaults(func=cmd_dates)

    s = with_index(sub.add_parser("stats", help="index summary"))
    s.set_defaults(func=cmd_stats)

    c = sub.add_parser("recap", help="concurrent ingest/query/delete harness")
    c.add_argument("-i", "--index", default=None, help="directory (default: in memory)")
    c.add_argument("--epochs", type=int, default=4)
    c.add_argument("--files-per-epoch", type=int, default=8)
    c.add_argument("--docs-per-file", type=int, default=12)
    c.add_argument("--writers", type=int, default=4)
    c.add_argument("--readers", type=int, default=8)
    c.add_argument("--seed", type=int, default=7)
    c.add_argument("--no-merge", action="store_true")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_recap)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except gcl.QuerySyntaxError as e:
        print(e.pretty(), file=sys.stderr)
        return EXIT_USER
    except (UserError, AnnotativeError, jsonstore.JsonIngestError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER
    except Exception as e:  # report, don't dump a traceback on users
        logging.debug("internal error", exc_info=True)
        print(f"internal error: {e!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
