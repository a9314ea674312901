"""BM25 ranking over statistics stored as annotations.

A document is an interval of content.  Its statistics are annotations over
that same interval: ``tf:porter:<stem>`` with the term count as value and
``length:`` with the number of word tokens.  Collection statistics (document
count, document frequency, average length) are read off those lists, so
rankings follow the snapshot they are computed on.
"""

from __future__ import annotations

import heapq
import math
import threading
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from nltk.stem.porter import PorterStemmer

from . import gcl
from .annidx import Hopper
from .core import POS_INF, Interval
from .feat import featurize
from .tok import normalize, tokenize

DOC = ":"
LENGTH = "length:"
TF_PREFIX = "tf:porter:"
QREL_PREFIX = "qrel:"
DOCNO = "docno:"

_stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)
_stem_lock = threading.Lock()


@lru_cache(maxsize=1 << 16)
def stem(word: str) -> str:
    with _stem_lock:
        return _stemmer.stem(word.lower())


def analyze(text: str) -> List[str]:
    """Stemmed terms of the word tokens of ``text``."""
    return [stem(normalize(t.text)) for t in tokenize(text) if not t.structural]


def tf_feature(term: str) -> str:
    return TF_PREFIX + term


def qrel_feature(topic) -> str:
    return f"{QREL_PREFIX}{topic}"


@dataclass(frozen=True)
class BM25Params:
    k1: float = 0.82
    b: float = 0.68

    def __post_init__(self):
        if self.k1 < 0 or not 0 <= self.b <= 1:
            raise ValueError(f"invalid BM25 parameters k1={self.k1}, b={self.b}")


# -- writing statistics ------------------------------------------------------

def index_stats(warren, doc: Interval, text: Optional[str] = None) -> Counter:
    """Annotate term counts and length over ``doc``; needs an open transaction.

    ``text`` defaults to the committed content of ``doc``.
    """
    p, q = doc
    if text is None:
        text = warren.translate(p, q)
    terms = analyze(text)
    counts = Counter(terms)
    for term, n in counts.items():
        warren.annotate(tf_feature(term), p, q, n)
    warren.annotate(LENGTH, p, q, len(terms))
    return counts


def add_document(warren, text: str, docno: Optional[str] = None) -> Interval:
    """Append a document with its extent and statistics in the open transaction."""
    if docno is not None:
        dp, dq = warren.append(docno)
        warren.annotate(DOCNO, dp, dq)
    p, q = warren.append(text)
    warren.annotate(DOC, p, q)
    index_stats(warren, (p, q), text)
    return (p, q)


def docno(warren, doc: Interval) -> str:
    """External id of ``doc``: its ``docno:`` text, else ``<start>-<end>``."""
    h = warren.hopper(DOCNO)
    (p, q), _ = h.tau_back(doc[0] - 1)
    if q == doc[0] - 1:
        return warren.translate(p, q)
    return f"{doc[0]}-{doc[1]}"


# -- collection statistics ---------------------------------------------------

class CollectionStats:
    """Counts read from one snapshot's annotation lists."""

    def __init__(self, snapshot):
        self.snapshot = snapshot
        lengths = snapshot.annotation_list(featurize(LENGTH))
        self.n_docs = len(lengths)
        self.total_length = math.fsum(lengths.values)
        self.avgdl = self.total_length / self.n_docs if self.n_docs else 0.0
        self._lengths = lengths
        self._idf: Dict[str, float] = {}

    def df(self, term: str) -> int:
        return len(self.snapshot.annotation_list(featurize(tf_feature(term))))

    def idf(self, term: str) -> float:
        v = self._idf.get(term)
        if v is None:
            df = self.df(term)
            n = self.n_docs
            v = self._idf[term] = max(0.0, math.log((n - df + 0.5) / (df + 0.5)))
        return v

    def length_hopper(self) -> Hopper:
        return Hopper(self._lengths)


_stats_cache: Dict[tuple, CollectionStats] = {}
_stats_lock = threading.Lock()


def collection_stats(snapshot) -> CollectionStats:
    key = (id(snapshot._index), snapshot.key)
    with _stats_lock:
        st = _stats_cache.get(key)
    if st is None:
        st = CollectionStats(snapshot)
        with _stats_lock:
            if len(_stats_cache) > 256:
                _stats_cache.clear()
            _stats_cache[key] = st
    return st


# -- top-k -------------------------------------------------------------------

class TopK:
    """The ``k`` best (document, score) pairs; ties favour the lower start."""

    def __init__(self, k: int):
        self.k = k
        self._heap: List[Tuple[float, int, Interval]] = []

    @property
    def full(self) -> bool:
        return len(self._heap) >= self.k

    @property
    def threshold(self) -> float:
        return self._heap[0][0] if self.full else -math.inf

    def offer(self, doc: Interval, score: float) -> bool:
        if self.k <= 0:
            return False
        item = (score, -doc[0], doc)
        if not self.full:
            heapq.heappush(self._heap, item)
            return True
        if item[:2] > self._heap[0][:2]:
            heapq.heapreplace(self._heap, item)
            return True
        return False

    def results(self) -> List[Tuple[Interval, float]]:
        return [(doc, s) for s, _, doc in sorted(self._heap, key=lambda x: (-x[0], -x[1]))]

    def __len__(self):
        return len(self._heap)


# -- scoring -----------------------------------------------------------------

@dataclass
class _Term:
    term: str
    weight: float
    idf: float
    hopper: Hopper
    bound: float
    doc: Interval = (POS_INF, POS_INF)
    tf: float = 0.0

    def seek(self, k: int) -> None:
        self.doc, self.tf = self.hopper.tau(k)


def _weights(terms) -> Dict[str, float]:
    if isinstance(terms, dict):
        return dict(terms)
    out: Dict[str, float] = {}
    for t in terms:
        for s in analyze(t):
            out[s] = out.get(s, 0.0) + 1.0
    return out


def term_score(tf: float, dl: float, avgdl: float, idf: float, params: BM25Params) -> float:
    norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl) if avgdl else params.k1
    return idf * tf * (params.k1 + 1.0) / (tf + norm)


def term_bound(max_tf: float, idf: float, params: BM25Params) -> float:
    """Largest contribution any document can receive from one term."""
    if max_tf <= 0:
        return 0.0
    return idf * max_tf * (params.k1 + 1.0) / (max_tf + params.k1 * (1.0 - params.b))


def bm25_rank(warren, terms, k: int = 10, params: BM25Params = BM25Params(),
              wand: bool = True, stats: Optional[CollectionStats] = None) -> TopK:
    """Rank documents for ``terms`` (raw words or a stem -> weight dict)."""
    snap = warren.snapshot
    stats = stats or collection_stats(snap)
    top = TopK(k)
    if stats.n_docs == 0 or k <= 0:
        return top
    cursors: List[_Term] = []
    for term, weight in sorted(_weights(terms).items()):
        lst = snap.annotation_list(featurize(tf_feature(term)))
        if not len(lst) or weight <= 0:
            continue
        idf = stats.idf(term)
        bound = weight * term_bound(lst.max_value, idf, params) * (1 + 1e-12)
        t = _Term(term, weight, idf, Hopper(lst), bound)
        t.seek(0)
        cursors.append(t)
    if not cursors:
        return top
    order = list(cursors)  # fixed summation order
    lengths = stats.length_hopper()

    def score(doc: Interval) -> float:
        (lp, lq), dl = lengths.tau(doc[0])
        if (lp, lq) != doc:
            dl = 0.0
        s = 0.0
        for t in order:
            if t.doc == doc:
                s += t.weight * term_score(t.tf, dl, stats.avgdl, t.idf, params)
        return s

    if not wand:
        while True:
            d = min(t.doc for t in cursors)
            if d[0] == POS_INF:
                break
            top.offer(d, score(d))
            for t in cursors:
                if t.doc == d:
                    t.seek(d[0] + 1)
        return top

    while True:
        cursors.sort(key=lambda t: t.doc[0])
        theta = top.threshold
        acc = 0.0
        pivot = None
        for i, t in enumerate(cursors):
            if t.doc[0] == POS_INF:
                break
            acc += t.bound
            if acc > theta:
                pivot = i
                break
        if pivot is None:
            break
        d = cursors[pivot].doc
        if cursors[0].doc[0] == d[0]:
            top.offer(d, score(d))
            for t in cursors:
                if t.doc[0] == d[0]:
                    t.seek(d[0] + 1)
        else:
            # advance the strongest cursor still short of the pivot document
            behind = [i for i in range(pivot) if cursors[i].doc[0] < d[0]]
            j = max(behind, key=lambda i: (cursors[i].bound, -i))
            cursors[j].seek(d[0])
    return top


# -- pseudo-relevance feedback -----------------------------------------------

def prf_expand(warren, terms, fb_docs: int = 20, fb_terms: int = 10,
               fb_weight: float = 0.5, params: BM25Params = BM25Params(),
               initial: Optional[Sequence[Tuple[Interval, float]]] = None) -> Dict[str, float]:
    """Original terms plus the best feedback terms from the top documents.

    Candidate weight is the term's count across the feedback documents times
    its idf; chosen expansion terms are scaled so the strongest gets
    ``fb_weight``.  Original terms keep their own weight.
    """
    weights = _weights(terms)
    if fb_terms <= 0:
        return weights
    if initial is None:
        initial = bm25_rank(warren, weights, fb_docs, params).results()
    stats = collection_stats(warren.snapshot)
    counts: Counter = Counter()
    for (p, q), _ in initial[:fb_docs]:
        counts.update(analyze(warren.translate(p, q)))
    cands = []
    for term, n in counts.items():
        if term in weights:
            continue
        w = n * stats.idf(term)
        if w > 0:
            cands.append((w, term))
    cands.sort(key=lambda x: (-x[0], x[1]))
    chosen = cands[:fb_terms]
    if chosen:
        top = chosen[0][0]
        for w, term in chosen:
            weights[term] = fb_weight * w / top
    return weights


# -- evaluation --------------------------------------------------------------

def average_precision(ranking: Sequence, relevant: Iterable) -> float:
    relevant = set(relevant)
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for i, doc in enumerate(ranking, 1):
        if doc in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def mrr_at(ranking: Sequence, relevant: Iterable, cutoff: int = 10) -> float:
    relevant = set(relevant)
    for i, doc in enumerate(ranking[:cutoff], 1):
        if doc in relevant:
            return 1.0 / i
    return 0.0


def judge(warren, topic, doc: Interval, grade: float = 1.0) -> None:
    """Record a relevance judgment in the open transaction."""
    warren.annotate(qrel_feature(topic), doc[0], doc[1], grade)


def qrels(warren, topic) -> List[Interval]:
    """Documents judged relevant (grade > 0) to ``topic`` in the snapshot."""
    return [iv for iv, v in warren.solve(gcl.Atom(qrel_feature(topic))) if v > 0]


def run_lines(topic, results: Sequence[Tuple[Interval, float]], ids: Sequence[str],
              tag: str = "annotative") -> List[str]:
    """TREC run-file lines: topic Q0 docid rank score tag."""
    return [f"{topic} Q0 {docid} {rank} {score:.6f} {tag}"
            for rank, ((_, score), docid) in enumerate(zip(results, ids), 1)]
