"""Word-level tokenization for content addressing.

Every token occupies exactly one address.  Words are maximal runs of Unicode
letters and digits; whitespace and punctuation separate words and take no
address.  JSON structure is carried by single code points drawn from the
Unicode noncharacter block, each of which is a token on its own, so that a
structural ``:`` can never be confused with a ``:`` inside a string.
"""

from __future__ import annotations

import enum
import re
from typing import List, NamedTuple, Union

from .core import AnnotativeError


class MalformedInput(AnnotativeError, ValueError):
    pass


class Structural(enum.Enum):
    OBJECT_OPEN = "\ufdd0"
    OBJECT_CLOSE = "\ufdd1"
    ARRAY_OPEN = "\ufdd2"
    ARRAY_CLOSE = "\ufdd3"
    QUOTE = "\ufdd4"
    COLON = "\ufdd5"
    COMMA = "\ufdd6"
    # Brackets a number so that it occupies the same address shape as a
    # quoted string while translating back to a bare JSON number.
    NUMBER = "\ufdd7"


# What each marker looks like when content is translated back to text.
RENDER = {
    Structural.OBJECT_OPEN.value: "{",
    Structural.OBJECT_CLOSE.value: "}",
    Structural.ARRAY_OPEN.value: "[",
    Structural.ARRAY_CLOSE.value: "]",
    Structural.QUOTE.value: '"',
    Structural.COLON.value: ":",
    Structural.COMMA.value: ",",
    Structural.NUMBER.value: "",
}

STRUCTURAL_CHARS = frozenset(RENDER)

_TOKEN_RE = re.compile(r"[\ufdd0-\ufdd7]|[^\W_\ufdd0-\ufdef]+")
_RENDER_TABLE = str.maketrans(RENDER)


class Token(NamedTuple):
    text: str
    start: int  # offset of the first character in the source string
    end: int  # offset one past the last character

    @property
    def structural(self) -> bool:
        return self.text in STRUCTURAL_CHARS


def _as_text(text: Union[str, bytes]) -> str:
    if isinstance(text, bytes):
        try:
            return text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedInput(f"invalid UTF-8 at byte {e.start}") from None
    return text


def tokenize(text: Union[str, bytes]) -> List[Token]:
    text = _as_text(text)
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def count_tokens(text: Union[str, bytes]) -> int:
    return sum(1 for _ in _TOKEN_RE.finditer(_as_text(text)))


def structural_token(kind: Structural) -> Token:
    return Token(kind.value, 0, 1)


def normalize(token_text: str) -> str:
    """Form used to derive a token's feature."""
    return token_text.lower()


def render(text: str) -> str:
    """Replace structural markers with the characters they stand for."""
    return text.translate(_RENDER_TABLE)


def scrub(text: str) -> str:
    """Remove noncharacters from user text before it is appended."""
    return re.sub("[\ufdd0-\ufdef]", "\ufffd", text)
