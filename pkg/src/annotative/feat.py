"""Feature ids: 64-bit MurmurHash3 of the feature string."""

from __future__ import annotations

import threading
from typing import Dict, Iterable, Optional, Tuple

import mmh3

from .tok import STRUCTURAL_CHARS, Token, normalize

# Fixed seed: feature ids must agree across processes and index copies.
SEED = 0x5EED
# Substituted for the (unlikely) string that hashes to the reserved id 0.
ZERO_REMAP = 1


def featurize(s: str) -> int:
    f = mmh3.hash64(s.encode("utf-8"), SEED, signed=False)[0]
    return f if f else ZERO_REMAP


def json_featurize(token: Token) -> int:
    """Feature for an automatically indexed token; 0 suppresses indexing."""
    if token.text in STRUCTURAL_CHARS:
        return 0
    return featurize(normalize(token.text))


class Vocabulary:
    """Reverse map from feature ids to the strings that produced them."""

    def __init__(self, items: Optional[Dict[int, str]] = None):
        self._names: Dict[int, str] = dict(items or {})
        self._lock = threading.Lock()

    def record(self, s: str, f: Optional[int] = None) -> int:
        if f is None:
            f = featurize(s)
        with self._lock:
            self._names.setdefault(f, s)
        return f

    def update(self, items: Iterable[Tuple[int, str]]) -> None:
        with self._lock:
            for f, s in items:
                self._names.setdefault(f, s)

    def lookup(self, f: int) -> Optional[str]:
        return self._names.get(f)

    def items(self):
        with self._lock:
            return list(self._names.items())

    def __len__(self):
        return len(self._names)

    def __contains__(self, f):
        return f in self._names
