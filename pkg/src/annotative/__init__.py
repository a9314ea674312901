"""Index engine built from annotations over a token address space.

Content is a sequence of tokens with integer addresses; everything else
(terms, document boundaries, JSON paths, statistics, relevance judgments)
is an annotation: a feature, an interval of addresses and a numeric value.
Structural queries compose lazily over annotation lists, and a
:class:`~annotative.warren.Warren` adds concurrent transactions on top.
"""

from .core import Annotation, AnnotativeError, reduce
from .feat import featurize
from .gcl import parse_query, phrase
from .warren import Warren

__version__ = "0.1.0"

__all__ = ["Annotation", "AnnotativeError", "Warren", "featurize", "parse_query",
           "phrase", "reduce"]
