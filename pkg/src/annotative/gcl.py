"""Structural query operators evaluated lazily over annotation cursors.

A query is an immutable expression tree (:class:`Atom`, :class:`Phrase`,
:class:`Window`, :class:`Op`).  :func:`compile_expr` binds it to an index,
producing a tree of cursor nodes.  Every node answers four access methods:

``tau(k)``
    the solution with the smallest start >= k
``rho(k)``
    the solution with the smallest end >= k
``tau_back(k)``
    the solution with the largest end <= k
``rho_back(k)``
    the solution with the largest start <= k

Each returns ``((start, end), value)``; absence is reported with the
``(inf, inf)`` or ``(-inf, -inf)`` sentinel.  Nodes only ever ask their
children for the solutions they need, so a selective subquery lets whole
stretches of a common one be skipped.  The backward methods exist because the
combination operators need to tighten a candidate from its right end.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Tuple

from .annidx import EMPTY_LIST, Hopper
from .core import (AnnotativeError, BEGIN, END, MAX_ADDR, MIN_ADDR, NEG_INF, POS_INF)
from .feat import featurize
from .tok import normalize, tokenize

Entry = Tuple[Tuple[int, int], float]

_END = (END, 0.0)
_BEGIN = (BEGIN, 0.0)

CONTAINED_IN = "<<"
CONTAINING = ">>"
NOT_CONTAINED_IN = "!<<"
NOT_CONTAINING = "!>>"
BOTH_OF = "^"
ONE_OF = "+"
FOLLOWED_BY = "..."

OPERATORS = (CONTAINED_IN, CONTAINING, NOT_CONTAINED_IN, NOT_CONTAINING,
             BOTH_OF, ONE_OF, FOLLOWED_BY)


class QuerySyntaxError(AnnotativeError, ValueError):
    def __init__(self, message: str, text: str = "", pos: int = 0):
        super().__init__(message)
        self.message = message
        self.text = text
        self.pos = pos

    def pretty(self) -> str:
        return f"{self.message}\n  {self.text}\n  {' ' * self.pos}^"


# -- expressions -------------------------------------------------------------

class Expr:
    """Base class of query expressions."""

    def __lshift__(self, other):
        return Op(CONTAINED_IN, self, other)

    def __rshift__(self, other):
        return Op(CONTAINING, self, other)

    def __xor__(self, other):
        return Op(BOTH_OF, self, other)

    def __add__(self, other):
        return Op(ONE_OF, self, other)


@dataclass(frozen=True)
class Atom(Expr):
    """The annotation list of one feature, named by string or given by id."""
    name: str
    feature: Optional[int] = None

    @property
    def fid(self) -> int:
        return self.feature if self.feature is not None else featurize(self.name)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Phrase(Expr):
    """Consecutive single-address annotations, one per word."""
    words: Tuple[str, ...]

    def __str__(self):
        return '"' + " ".join(self.words) + '"'


@dataclass(frozen=True)
class Window(Expr):
    """All intervals of exactly ``n`` addresses.

    ``lo``/``hi`` optionally confine the windows to ``[lo, hi]``.
    """
    n: int
    lo: int = MIN_ADDR
    hi: int = MAX_ADDR

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"window size must be at least 1, got {self.n}")

    def __str__(self):
        return f"#{self.n}"


@dataclass(frozen=True)
class Op(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator {self.op!r}")
        if self.op in (NOT_CONTAINED_IN, NOT_CONTAINING) and _has_window(self.right):
            raise ValueError("the right operand of a negation must be finite")

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


def _has_window(e: Expr) -> bool:
    if isinstance(e, Window):
        return e.lo == MIN_ADDR or e.hi == MAX_ADDR
    if isinstance(e, Op):
        return _has_window(e.left) or _has_window(e.right)
    return False


def phrase(text: str) -> Expr:
    """Expression matching ``text`` as consecutive tokens."""
    words = tuple(normalize(t.text) for t in tokenize(text) if not t.structural)
    if not words:
        raise ValueError(f"phrase {text!r} has no words")
    if len(words) == 1:
        return Atom(words[0])
    return Phrase(words)


# -- parsing -----------------------------------------------------------------

_LEX = re.compile(r'\s*(?:(?P<paren>[()])|"(?P<quoted>[^"]*)"|(?P<bare>[^\s()"]+))')


def parse_query(text: str) -> Expr:
    """Parse the ASCII query grammar.

    ``expr := term (OP term)*`` where every OP in one chain is the same
    operator (chains associate to the left); ``term`` is a bare feature name,
    a double-quoted phrase, ``#n``, or a parenthesised expression.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _LEX.match(text, pos)
        if m is None:
            if text[pos:].strip():
                raise QuerySyntaxError("unterminated phrase", text,
                                       text.index('"', pos))
            break
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    if not tokens:
        raise QuerySyntaxError("empty query", text, 0)

    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else None

    def term():
        nonlocal i
        tok = peek()
        if tok is None:
            raise QuerySyntaxError("unexpected end of query", text, len(text))
        kind, val, at = tok
        i += 1
        if kind == "paren":
            if val != "(":
                raise QuerySyntaxError("unexpected ')'", text, at)
            e = expr()
            close = peek()
            if close is None or close[:2] != ("paren", ")"):
                raise QuerySyntaxError("expected ')'", text,
                                       close[2] if close else len(text))
            i += 1
            return e
        if kind == "quoted":
            try:
                return phrase(val)
            except ValueError:
                raise QuerySyntaxError("phrase has no words", text, at) from None
        if val in OPERATORS:
            raise QuerySyntaxError(f"operator {val!r} needs a left operand", text, at)
        if val.startswith("#") and val[1:].lstrip("-").isdigit():
            n = int(val[1:])
            if n < 1:
                raise QuerySyntaxError("window size must be at least 1", text, at)
            return Window(n)
        return Atom(val)

    def expr():
        nonlocal i
        left = term()
        chain_op = None
        while True:
            tok = peek()
            if tok is None or tok[:2] == ("paren", ")"):
                return left
            kind, val, at = tok
            if kind != "bare" or val not in OPERATORS:
                raise QuerySyntaxError("expected an operator", text, at)
            if chain_op is not None and val != chain_op:
                raise QuerySyntaxError(
                    "mixing operators requires parentheses", text, at)
            chain_op = val
            i += 1
            right = term()
            try:
                left = Op(val, left, right)
            except ValueError as e:
                raise QuerySyntaxError(str(e), text, at) from None

    e = expr()
    if i < len(tokens):
        raise QuerySyntaxError("unexpected token", text, tokens[i][2])
    return e


# -- cursor nodes ------------------------------------------------------------

class Node:
    def tau(self, k: int) -> Entry:
        raise NotImplementedError

    def rho(self, k: int) -> Entry:
        # the solution following the last one that ends before k
        u = self.tau_back(k - 1)
        return self.tau(u[0][0] + 1)

    def tau_back(self, k: int) -> Entry:
        raise NotImplementedError

    def rho_back(self, k: int) -> Entry:
        u = self.tau(k + 1)
        return self.tau_back(u[0][1] - 1)

    def leaves(self) -> List["LeafNode"]:
        return []


class LeafNode(Node):
    def __init__(self, name: str, hopper: Hopper):
        self.name = name
        self.hopper = hopper
        self.tau = hopper.tau
        self.rho = hopper.rho
        self.tau_back = hopper.tau_back
        self.rho_back = hopper.rho_back

    @property
    def calls(self) -> int:
        return self.hopper.calls

    def leaves(self):
        return [self]


class WindowNode(Node):
    def __init__(self, n: int, lo: int = MIN_ADDR, hi: int = MAX_ADDR):
        self.n = n
        self.lo = lo
        self.last = hi - n + 1  # largest legal start

    def _at(self, s: int, forward: bool) -> Entry:
        if s < self.lo:
            if forward:
                s = self.lo
            else:
                return _BEGIN
        if s > self.last:
            if forward:
                return _END
            s = self.last
            if s < self.lo:
                return _BEGIN
        return ((s, s + self.n - 1), 0.0)

    def tau(self, k):
        return self._at(k, True)

    def rho(self, k):
        return self._at(k - self.n + 1, True)

    def tau_back(self, k):
        return self._at(k - self.n + 1, False)

    def rho_back(self, k):
        return self._at(k, False)


class PhraseNode(Node):
    def __init__(self, parts: List[Node]):
        self.parts = parts
        self.m = len(parts)

    def tau(self, k):
        x = k
        parts = self.parts
        while True:
            for i, part in enumerate(parts):
                (p, q), _ = part.tau(x + i)
                if p >= POS_INF:
                    return _END
                if p != x + i:
                    x = p - i
                    break
                if q != p:
                    x += 1
                    break
            else:
                return ((x, x + self.m - 1), 0.0)

    def tau_back(self, k):
        y = k
        parts = self.parts
        m = self.m
        while True:
            for j in range(m):
                (p, q), _ = parts[m - 1 - j].tau_back(y - j)
                if q <= NEG_INF:
                    return _BEGIN
                if q != y - j:
                    y = q + j
                    break
                if p != q:
                    y -= 1
                    break
            else:
                return ((y - m + 1, y), 0.0)

    def rho(self, k):
        return self.tau(k - self.m + 1)

    def rho_back(self, k):
        return self.tau_back(k + self.m - 1)

    def leaves(self):
        return [leaf for part in self.parts for leaf in part.leaves()]


class BinaryNode(Node):
    def __init__(self, a: Node, b: Node):
        self.a = a
        self.b = b

    def leaves(self):
        return self.a.leaves() + self.b.leaves()


class ContainedIn(BinaryNode):
    def tau(self, k):
        A, B = self.a, self.b
        while True:
            e = A.tau(k)
            (p, q), _ = e
            if p >= POS_INF:
                return _END
            bp = B.rho(q)[0][0]
            if bp <= p:
                return e
            k = bp

    def rho(self, k):
        e = self.a.rho(k)
        (p, q), _ = e
        if p >= POS_INF:
            return _END
        bp = self.b.rho(q)[0][0]
        if bp <= p:
            return e
        return self.tau(bp)

    def tau_back(self, k):
        A, B = self.a, self.b
        while True:
            e = A.tau_back(k)
            (p, q), _ = e
            if q <= NEG_INF:
                return _BEGIN
            bq = B.rho_back(p)[0][1]
            if bq >= q:
                return e
            k = bq

    def rho_back(self, k):
        e = self.a.rho_back(k)
        (p, q), _ = e
        if q <= NEG_INF:
            return _BEGIN
        bq = self.b.rho_back(p)[0][1]
        if bq >= q:
            return e
        return self.tau_back(bq)


class Containing(BinaryNode):
    def tau(self, k):
        e = self.a.tau(k)
        (p, q), _ = e
        if p >= POS_INF:
            return _END
        bq = self.b.tau(p)[0][1]
        if bq <= q:
            return e
        return self.rho(bq)

    def rho(self, k):
        A, B = self.a, self.b
        while True:
            e = A.rho(k)
            (p, q), _ = e
            if p >= POS_INF:
                return _END
            bq = B.tau(p)[0][1]
            if bq <= q:
                return e
            k = bq

    def tau_back(self, k):
        e = self.a.tau_back(k)
        (p, q), _ = e
        if q <= NEG_INF:
            return _BEGIN
        bp = self.b.tau_back(q)[0][0]
        if bp >= p:
            return e
        return self.rho_back(bp)

    def rho_back(self, k):
        A, B = self.a, self.b
        while True:
            e = A.rho_back(k)
            (p, q), _ = e
            if q <= NEG_INF:
                return _BEGIN
            bp = B.tau_back(q)[0][0]
            if bp >= p:
                return e
            k = bp


class NotContainedIn(BinaryNode):
    def _forward(self, e):
        A, B = self.a, self.b
        while True:
            (p, q), _ = e
            if p >= POS_INF:
                return _END
            (bp, bq), _ = B.rho(q)
            if bp > p:
                return e
            e = A.rho(bq + 1)

    def _backward(self, e):
        A, B = self.a, self.b
        while True:
            (p, q), _ = e
            if q <= NEG_INF:
                return _BEGIN
            (bp, bq), _ = B.rho_back(p)
            if bq < q:
                return e
            e = A.rho_back(bp - 1)

    def tau(self, k):
        return self._forward(self.a.tau(k))

    def rho(self, k):
        return self._forward(self.a.rho(k))

    def tau_back(self, k):
        return self._backward(self.a.tau_back(k))

    def rho_back(self, k):
        return self._backward(self.a.rho_back(k))


class NotContaining(BinaryNode):
    def _forward(self, e):
        A, B = self.a, self.b
        while True:
            (p, q), _ = e
            if p >= POS_INF:
                return _END
            (bp, bq), _ = B.tau(p)
            if bq > q:
                return e
            e = A.tau(bp + 1)

    def _backward(self, e):
        A, B = self.a, self.b
        while True:
            (p, q), _ = e
            if q <= NEG_INF:
                return _BEGIN
            (bp, bq), _ = B.tau_back(q)
            if bp < p:
                return e
            e = A.tau_back(bq - 1)

    def tau(self, k):
        return self._forward(self.a.tau(k))

    def rho(self, k):
        return self._forward(self.a.rho(k))

    def tau_back(self, k):
        return self._backward(self.a.tau_back(k))

    def rho_back(self, k):
        return self._backward(self.a.rho_back(k))


class BothOf(BinaryNode):
    def tau(self, k):
        (ap, aq), _ = self.a.tau(k)
        (bp, bq), _ = self.b.tau(k)
        if ap >= POS_INF or bp >= POS_INF:
            return _END
        q = aq if aq > bq else bq
        p = min(self.a.tau_back(q)[0][0], self.b.tau_back(q)[0][0])
        return ((p, q), 0.0)

    def tau_back(self, k):
        (ap, aq), _ = self.a.tau_back(k)
        (bp, bq), _ = self.b.tau_back(k)
        if aq <= NEG_INF or bq <= NEG_INF:
            return _BEGIN
        p = ap if ap < bp else bp
        q = max(self.a.tau(p)[0][1], self.b.tau(p)[0][1])
        return ((p, q), 0.0)


class OneOf(BinaryNode):
    def tau(self, k):
        ea = self.a.tau(k)
        eb = self.b.tau(k)
        (ap, aq), (bp, bq) = ea[0], eb[0]
        if aq < bq or (aq == bq and ap >= bp):
            return ea
        return eb

    def tau_back(self, k):
        ea = self.a.tau_back(k)
        eb = self.b.tau_back(k)
        (ap, aq), (bp, bq) = ea[0], eb[0]
        if ap > bp or (ap == bp and aq <= bq):
            return ea
        return eb


class FollowedBy(BinaryNode):
    def tau(self, k):
        (ap, aq), _ = self.a.tau(k)
        if ap >= POS_INF:
            return _END
        (bp, bq), _ = self.b.tau(aq + 1)
        if bp >= POS_INF:
            return _END
        p = self.a.tau_back(bp - 1)[0][0]
        return ((p, bq), 0.0)

    def tau_back(self, k):
        (bp, bq), _ = self.b.tau_back(k)
        if bq <= NEG_INF:
            return _BEGIN
        (ap, aq), _ = self.a.tau_back(bp - 1)
        if aq <= NEG_INF:
            return _BEGIN
        q = self.b.tau(aq + 1)[0][1]
        return ((ap, q), 0.0)


_NODE_TYPES = {
    CONTAINED_IN: ContainedIn,
    CONTAINING: Containing,
    NOT_CONTAINED_IN: NotContainedIn,
    NOT_CONTAINING: NotContaining,
    BOTH_OF: BothOf,
    ONE_OF: OneOf,
    FOLLOWED_BY: FollowedBy,
}


def compile_expr(expr: Expr, hopper: Callable[[int], Hopper]) -> Node:
    """Bind ``expr`` to cursors obtained from ``hopper(feature_id)``."""
    if isinstance(expr, Atom):
        return LeafNode(expr.name, hopper(expr.fid))
    if isinstance(expr, Phrase):
        return PhraseNode([LeafNode(w, hopper(featurize(w))) for w in expr.words])
    if isinstance(expr, Window):
        return WindowNode(expr.n, expr.lo, expr.hi)
    if isinstance(expr, Op):
        return _NODE_TYPES[expr.op](compile_expr(expr.left, hopper),
                                    compile_expr(expr.right, hopper))
    raise TypeError(f"not a query expression: {expr!r}")


def solutions(node: Node, start: int = 0) -> Iterator[Entry]:
    """Every solution of ``node`` with start >= ``start``, in order."""
    e = node.tau(start)
    while e[0][0] < POS_INF:
        yield e
        e = node.tau(e[0][0] + 1)


def solve(node: Node, visit: Callable[[Tuple[int, int], float], None],
          start: int = 0) -> int:
    n = 0
    for iv, v in solutions(node, start):
        visit(iv, v)
        n += 1
    return n


def access_counts(node: Node) -> Dict[str, int]:
    """Access-method calls made so far against each leaf, keyed by name."""
    counts: Dict[str, int] = {}
    for leaf in node.leaves():
        counts[leaf.name] = counts.get(leaf.name, 0) + leaf.calls
    return counts


def empty_hopper(_feature: int) -> Hopper:
    return Hopper(EMPTY_LIST)
