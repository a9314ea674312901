"""Optional calibration run on the MS MARCO passage collection.

Not part of the test suite: the collection is large and the numbers are
hardware-relative.  Usage::

    python3 scripts/msmarco_calibration.py INDEX_DIR collection.tsv \\
        queries.dev.small.tsv qrels.dev.small.tsv --threads 8

Builds the index if ``INDEX_DIR`` does not hold one yet, ranks every query
to depth 10 and prints MRR@10 and queries per second.
"""

import argparse
import os
import sys
import time
from collections import defaultdict

from annotative import cli, rank
from annotative.warren import Warren


def read_qrels(path):
    rel = defaultdict(set)
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if len(parts) >= 4 and int(parts[3]) > 0:
                rel[parts[0]].add(parts[2])
    return rel


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("index")
    p.add_argument("collection")
    p.add_argument("queries")
    p.add_argument("qrels")
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args(argv)

    if not os.path.exists(os.path.join(args.index, "MANIFEST")):
        code = cli.main(["build", "-i", args.index, "--mode", "static", "--no-sync", args.collection])
        if code:
            return code
    topics = []
    with open(args.queries) as fh:
        for line in fh:
            qid, _, text = line.rstrip("\n").partition("\t")
            topics.append((qid, text))
    relevant = read_qrels(args.qrels)

    w = Warren.open(args.index)
    t0 = time.perf_counter()
    lines, _ = cli.rank_topics(w, topics, 10, rank.BM25Params(), threads=args.threads)
    elapsed = time.perf_counter() - t0
    w.close()

    runs = defaultdict(list)
    for line in lines:
        qid, _, docid, *_ = line.split()
        runs[qid].append(docid)
    mrr = sum(rank.mrr_at(runs.get(qid, []), relevant.get(qid, ()), 10)
              for qid, _ in topics) / max(1, len(topics))
    print(f"queries\t{len(topics)}")
    print(f"MRR@10\t{mrr:.4f}")
    print(f"q/s\t{len(topics) / elapsed:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
