"""Concurrent ingest / query / delete harness on a synthetic corpus.

The corpus is split into epochs.  Each epoch has its own topics whose
relevant documents occur only in that epoch's files.  Writer threads ingest
an epoch file by file (content, then statistics, then judgments, each in its
own transaction), reader threads rank topics continuously, and a deletion
thread later erases the epoch's files.  At every synchronization barrier the
average precision of every topic is compared with a static index rebuilt from
the surviving documents.
"""

from __future__ import annotations

import logging
import random
import threading
import time
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from statistics import fmean
from typing import Dict, List, Optional, Tuple

from . import gcl, rank
from .core import AnnotativeError
from .warren import Warren

log = logging.getLogger(__name__)

CANARY = "canary:"
STATS_DONE = "statsdone:"


class AtomicityViolation(AnnotativeError):
    pass


@dataclass
class RecapConfig:
    epochs: int = 4
    files_per_epoch: int = 8
    docs_per_file: int = 12
    topics_per_epoch: int = 3
    relevant_per_file: int = 2
    writers: int = 4
    readers: int = 8
    seed: int = 7
    vocab_size: int = 400
    fb_docs: int = 10
    fb_terms: int = 5
    depth: int = 100
    merge: bool = True
    path: Optional[str] = None
    sync: bool = False
    reader_pause: float = 0.002
    splits: int = 2


@dataclass
class Doc:
    docno: str
    text: str
    topics: Tuple[str, ...] = ()


@dataclass
class SynthFile:
    name: str
    epoch: int
    docs: List[Doc]


@dataclass
class Topic:
    qid: str
    epoch: int
    query: str


@dataclass
class Corpus:
    files: List[SynthFile]
    topics: List[Topic]

    def by_epoch(self, e: int) -> List[SynthFile]:
        return [f for f in self.files if f.epoch == e]


def _word(rng: random.Random, syllables: int) -> str:
    cons = "bcdfghjklmnprstvz"
    vows = "aeiou"
    return "".join(rng.choice(cons) + rng.choice(vows) for _ in range(syllables))


def make_corpus(cfg: RecapConfig) -> Corpus:
    """Deterministic synthetic collection for ``cfg``."""
    rng = random.Random(cfg.seed)
    vocab = sorted({_word(rng, rng.randint(2, 3)) for _ in range(cfg.vocab_size)})
    weights = [1.0 / (i + 1) for i in range(len(vocab))]
    used = set(vocab)

    def fresh():
        while True:
            w = _word(rng, 4)
            if w not in used:
                used.add(w)
                return w

    topics: List[Topic] = []
    signatures: Dict[str, List[str]] = {}
    for e in range(cfg.epochs):
        for t in range(cfg.topics_per_epoch):
            qid = f"{e}{t:02d}"
            sig = [fresh() for _ in range(4)]
            signatures[qid] = sig
            topics.append(Topic(qid, e, " ".join(sig[:2])))

    files = []
    serial = 0
    for e in range(cfg.epochs):
        epoch_topics = [t for t in topics if t.epoch == e]
        for f in range(cfg.files_per_epoch):
            docs = []
            rel_slots = set(rng.sample(range(cfg.docs_per_file),
                                       min(cfg.relevant_per_file, cfg.docs_per_file)))
            for d in range(cfg.docs_per_file):
                words = rng.choices(vocab, weights, k=rng.randint(20, 60))
                topics_of = ()
                if d in rel_slots:
                    t = rng.choice(epoch_topics)
                    sig = signatures[t.qid]
                    words += [rng.choice(sig) for _ in range(rng.randint(1, 4))]
                    topics_of = (t.qid,)
                elif rng.random() < 0.5:
                    # stray signature words, from any topic, keep rankings imperfect
                    t = rng.choice(topics)
                    words += rng.sample(signatures[t.qid], rng.randint(1, 2))
                rng.shuffle(words)
                docs.append(Doc(f"D{serial:06d}", " ".join(words), topics_of))
                serial += 1
            files.append(SynthFile(f"epoch{e}-file{f:03d}", e, docs))
    return Corpus(files, topics)


# -- per-snapshot evaluation --------------------------------------------------

def evaluate_topic(w: Warren, topic: Topic, cfg: RecapConfig) -> float:
    """AP of BM25 + feedback for ``topic`` in ``w``'s current snapshot."""
    expanded = rank.prf_expand(w, [topic.query], cfg.fb_docs, cfg.fb_terms)
    results = rank.bm25_rank(w, expanded, cfg.depth).results()
    return rank.average_precision([d for d, _ in results], rank.qrels(w, topic.qid))


def _count_within(starts: List[int], ends: List[int], p: int, q: int) -> int:
    i = bisect_left(starts, p)
    j = bisect_right(ends, q)
    return max(0, j - i)


def check_atomicity(w: Warren) -> int:
    """Every visible canary must see all of its transaction's documents.

    Returns the number of files checked.
    """
    snap = w.snapshot
    docs = snap.annotation_list(w.featurize(rank.DOC))
    lengths = snap.annotation_list(w.featurize(rank.LENGTH))
    canaries = snap.annotation_list(w.featurize(CANARY))
    done = snap.annotation_list(w.featurize(STATS_DONE))
    done_map = {iv: v for iv, v in done.entries()}
    for (p, q), v in canaries.entries():
        n = _count_within(docs.starts, docs.ends, p, q)
        if n != int(v):
            raise AtomicityViolation(f"file at ({p}, {q}) shows {n} of {int(v)} documents")
        if (p, q) in done_map:
            m = _count_within(lengths.starts, lengths.ends, p, q)
            if m != int(done_map[(p, q)]):
                raise AtomicityViolation(f"file at ({p}, {q}) shows {m} of {int(v)} statistics")
    return len(canaries)


# -- workers ------------------------------------------------------------------

def ingest_file(w: Warren, f: SynthFile) -> None:
    name = "Files/" + f.name
    in_file = gcl.Op(gcl.CONTAINED_IN, gcl.Atom(rank.DOC), gcl.Atom(name))
    # content
    with w.writing():
        first = last = None
        for d in f.docs:
            dp, dq = w.append(d.docno)
            w.annotate(rank.DOCNO, dp, dq)
            p, q = w.append(d.text)
            w.annotate(rank.DOC, p, q)
            first = dp if first is None else first
            last = q
        w.annotate(name, first, last, len(f.docs))
        w.annotate(CANARY, first, last, len(f.docs))
    # statistics, over the committed documents
    with w.writing():
        (extent, _), = w.solve(gcl.Atom(name))
        docs = w.solve(in_file)
        for iv, _ in docs:
            rank.index_stats(w, iv)
        w.annotate(STATS_DONE, extent[0], extent[1], len(docs))
    # judgments
    with w.writing():
        for (iv, _), d in zip(w.solve(in_file), f.docs):
            for qid in d.topics:
                rank.judge(w, qid, iv)


def delete_file(w: Warren, f: SynthFile) -> bool:
    with w.writing():
        hits = w.solve(gcl.Atom("Files/" + f.name))
        if not hits:
            return False
        (p, q), _ = hits[0]
        w.erase(p, q)
    return True


def static_oracle(corpus: Corpus, surviving: List[str], cfg: RecapConfig) -> Dict[str, float]:
    """AP per topic from a fresh static index of the surviving documents."""
    by_no = {d.docno: d for f in corpus.files for d in f.docs}
    w = Warren.create(mode="static")
    w.start()
    w.transaction()
    for no in surviving:
        d = by_no[no]
        iv = rank.add_document(w, d.text, d.docno)
        for qid in d.topics:
            rank.judge(w, qid, iv)
    w.ready()
    w.commit()
    w.end()
    out = {}
    with w.reading():
        for t in corpus.topics:
            out[t.qid] = evaluate_topic(w, t, cfg)
    return out


@dataclass
class Barrier:
    phase: int
    label: str
    ap: Dict[str, float]
    oracle: Dict[str, float]
    documents: int

    @property
    def max_error(self) -> float:
        return max((abs(self.ap[k] - self.oracle[k]) for k in self.ap), default=0.0)

    def epoch_map(self, corpus: Corpus, e: int) -> float:
        return fmean(self.ap[t.qid] for t in corpus.topics if t.epoch == e)


@dataclass
class RecapReport:
    config: RecapConfig
    corpus: Corpus
    barriers: List[Barrier] = field(default_factory=list)
    samples: List[Tuple[int, str, float]] = field(default_factory=list)
    atomicity_checks: int = 0
    elapsed: float = 0.0
    stats: dict = field(default_factory=dict)

    def table(self) -> str:
        e = self.config.epochs
        head = "phase  label          docs  " + "  ".join(f"MAP[e{i}]" for i in range(e)) + "  oracle-err"
        lines = [head]
        for b in self.barriers:
            maps = "  ".join(f"{b.epoch_map(self.corpus, i):7.4f}" for i in range(e))
            lines.append(f"{b.phase:5d}  {b.label:<13s} {b.documents:5d}  {maps}  {b.max_error:.2e}")
        return "\n".join(lines)


def schedule(epochs: int, splits: int = 2) -> List[Tuple[str, int, int]]:
    """Phases as ``(kind, epoch, part)``; each ingestion is cut into ``splits`` parts."""
    phases = []
    for e in range(epochs):
        phases.extend(("ingest", e, k) for k in range(splits))
        if e:
            phases.append(("delete", e - 1, 0))
    if epochs:
        phases.append(("delete", epochs - 1, 0))
    return phases


def run_recap(cfg: RecapConfig) -> RecapReport:
    corpus = make_corpus(cfg)
    if cfg.path:
        root = Warren.create(cfg.path, sync=cfg.sync, force=True)
    else:
        root = Warren.create()
    if cfg.merge:
        root.start_maintenance()
    report = RecapReport(cfg, corpus)
    errors: List[BaseException] = []
    stop = threading.Event()
    running = threading.Event()  # cleared while a barrier is being measured
    running.set()
    phase_no = [0]
    lock = threading.Lock()

    def reader(i: int):
        w = root.clone()
        rng = random.Random(cfg.seed * 1000 + i)
        try:
            while not stop.is_set():
                running.wait()
                if stop.is_set():
                    break
                with w.reading():
                    checked = check_atomicity(w)
                    t = rng.choice(corpus.topics)
                    ap = evaluate_topic(w, t, cfg)
                with lock:
                    report.atomicity_checks += 1 if checked else 0
                    report.samples.append((phase_no[0], t.qid, ap))
                time.sleep(cfg.reader_pause)
        except BaseException as e:  # surfaced after the run
            errors.append(e)

    readers = [threading.Thread(target=reader, args=(i,), daemon=True)
               for i in range(cfg.readers)]
    t0 = time.perf_counter()
    for t in readers:
        t.start()

    def run_parallel(jobs, n):
        def worker(mine):
            w = root.clone()
            try:
                for job in mine:
                    job(w)
            except BaseException as e:
                errors.append(e)
        threads = [threading.Thread(target=worker, args=(jobs[k::n],)) for k in range(n)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

    probe = root.clone()
    for n, (kind, e, part) in enumerate(schedule(cfg.epochs, cfg.splits), 1):
        files = corpus.by_epoch(e)
        if kind == "ingest":
            files = files[part::cfg.splits]
            run_parallel([lambda w, f=f: ingest_file(w, f) for f in files], max(1, cfg.writers))
        else:
            run_parallel([lambda w, f=f: delete_file(w, f) for f in files], 1)
        if errors:
            break
        running.clear()
        with lock:
            phase_no[0] = n
        with probe.reading():
            check_atomicity(probe)
            ap = {t.qid: evaluate_topic(probe, t, cfg) for t in corpus.topics}
            docs = probe.solve(gcl.Atom(rank.DOC))
            surviving = [rank.docno(probe, iv) for iv, _ in docs]
        oracle = static_oracle(corpus, surviving, cfg)
        label = f"{kind} e{e}" + (f".{part + 1}" if kind == "ingest" else "")
        report.barriers.append(Barrier(n, label, ap, oracle, len(surviving)))
        running.set()

    stop.set()
    running.set()
    for t in readers:
        t.join()
    root.stop_maintenance()
    if errors:
        raise errors[0]
    root.check_invariants()
    report.elapsed = time.perf_counter() - t0
    report.stats = root.stats()
    root.close()
    return report
