"""Extended symbols and substring feature patterns on the spelling ring.

A configuration of length ``l`` is a ring of ``l + 1`` vertices: the ``l``
characters in order, followed by a distinguished *length vertex* that closes
the ring.  A pattern is a run of extended symbols; its feature value on a word
is the number of ring positions at which it matches consecutive vertices.

Every vertex value is encoded as a small integer code: printable ASCII
characters ``0x21..0x7E`` map to ``0..93`` and the length vertex is
``LENGTH_CODE``.  Each symbol then becomes a boolean mask over the code space,
which is what all the vectorised matchers work with.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import PatternError

FIRST_CHAR = 0x21
LAST_CHAR = 0x7E
PRINTABLE = "".join(chr(c) for c in range(FIRST_CHAR, LAST_CHAR + 1))
LENGTH_CODE = len(PRINTABLE)
NUM_CODES = LENGTH_CODE + 1

LONG_LENGTH = 7
MAX_EXPLICIT_LENGTH = LONG_LENGTH - 1

CLASS_NAMES = ("a-z", "A-Z", "0-9", "punct")
_ESCAPED = "[<\\"


def _class_members(name):
    if name == "a-z":
        return [c for c in PRINTABLE if "a" <= c <= "z"]
    if name == "A-Z":
        return [c for c in PRINTABLE if "A" <= c <= "Z"]
    if name == "0-9":
        return [c for c in PRINTABLE if "0" <= c <= "9"]
    # everything printable that is not alphanumeric
    return [c for c in PRINTABLE if not c.isalnum()]


def char_code(c):
    return ord(c) - FIRST_CHAR


def is_printable(c):
    return FIRST_CHAR <= ord(c) <= LAST_CHAR


@dataclass(frozen=True, order=True)
class ExtendedSymbol:
    """One symbol of the extended alphabet.

    ``kind`` is one of ``"char"``, ``"class"``, ``"length"`` (exact length
    1..6), ``"long"`` (length 7 or more) or ``"any"`` (the length vertex of
    any word, i.e. a word boundary).
    """

    kind: str
    value: object = None

    def __post_init__(self):
        if self.kind == "char":
            if not isinstance(self.value, str) or len(self.value) != 1 or not is_printable(self.value):
                raise PatternError(f"literal must be one printable ASCII character, got {self.value!r}")
        elif self.kind == "class":
            if self.value not in CLASS_NAMES:
                raise PatternError(f"unknown character class {self.value!r}")
        elif self.kind == "length":
            if not isinstance(self.value, int) or not 1 <= self.value <= MAX_EXPLICIT_LENGTH:
                raise PatternError(f"length label must be in 1..{MAX_EXPLICIT_LENGTH}, got {self.value!r}")
        elif self.kind in ("long", "any"):
            if self.value is not None:
                raise PatternError(f"{self.kind} symbol takes no value")
        else:
            raise PatternError(f"unknown symbol kind {self.kind!r}")

    @property
    def is_length(self):
        """True for symbols that can only match the length vertex."""
        return self.kind in ("length", "long", "any")

    @property
    def text(self):
        if self.kind == "char":
            return "\\" + self.value if self.value in _ESCAPED else self.value
        if self.kind == "class":
            return f"[{self.value}]"
        if self.kind == "length":
            return f"<{self.value}>"
        if self.kind == "long":
            return f"<{LONG_LENGTH}+>"
        return "<*>"

    def matches_length(self, length):
        if self.kind == "length":
            return length == self.value
        if self.kind == "long":
            return length >= LONG_LENGTH
        return self.kind == "any"

    def mask(self, length):
        """Boolean mask over vertex codes for a ring built from a word of ``length``."""
        return _symbol_mask(self, length)

    def __str__(self):
        return self.text


@functools.lru_cache(maxsize=None)
def _char_mask(symbol):
    m = np.zeros(NUM_CODES, dtype=bool)
    if symbol.kind == "char":
        m[char_code(symbol.value)] = True
    elif symbol.kind == "class":
        m[[char_code(c) for c in _class_members(symbol.value)]] = True
    return m


@functools.lru_cache(maxsize=None)
def _symbol_mask(symbol, length):
    m = _char_mask(symbol).copy()
    m[LENGTH_CODE] = symbol.matches_length(length)
    m.setflags(write=False)
    return m


def literal(c):
    return ExtendedSymbol("char", c)


LOWER = ExtendedSymbol("class", "a-z")
UPPER = ExtendedSymbol("class", "A-Z")
DIGIT = ExtendedSymbol("class", "0-9")
PUNCT = ExtendedSymbol("class", "punct")
LONG = ExtendedSymbol("long")
BOUNDARY = ExtendedSymbol("any")


def length_label(n):
    return ExtendedSymbol("length", n)


@dataclass(frozen=True)
class FeaturePattern:
    """A substring pattern over extended symbols.

    At most one length-vertex symbol may appear, and only at either end.
    """

    symbols: tuple

    def __post_init__(self):
        symbols = tuple(self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if not symbols:
            raise PatternError("pattern must contain at least one symbol")
        for s in symbols:
            if not isinstance(s, ExtendedSymbol):
                raise PatternError(f"not an extended symbol: {s!r}")
        positions = [i for i, s in enumerate(symbols) if s.is_length]
        if len(positions) > 1:
            raise PatternError(f"pattern {self.text!r} has more than one length/boundary symbol")
        if positions and positions[0] not in (0, len(symbols) - 1):
            raise PatternError(f"pattern {self.text!r} has a length/boundary symbol in the middle")

    @classmethod
    def parse(cls, text):
        return cls(parse_symbols(text))

    @classmethod
    def of(cls, *symbols):
        return cls(tuple(symbols))

    @property
    def text(self):
        return "".join(s.text for s in self.symbols)

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        return self.text

    def __repr__(self):
        return f"FeaturePattern({self.text!r})"

    def masks(self, length):
        """``(len(self), NUM_CODES)`` boolean masks for a word of ``length``."""
        return _pattern_masks(self, length)

    def concat(self, other):
        """Concatenate, or return None when the result would be an invalid pattern."""
        try:
            return FeaturePattern(self.symbols + other.symbols)
        except PatternError:
            return None


@functools.lru_cache(maxsize=None)
def _pattern_masks(pattern, length):
    out = np.stack([s.mask(length) for s in pattern.symbols])
    out.setflags(write=False)
    return out


def parse_symbols(text):
    """Parse pattern text into a tuple of symbols.

    Grammar: literal printable characters; ``[a-z]``, ``[A-Z]``, ``[0-9]``,
    ``[punct]``; ``<1>``..``<6>``, ``<7+>``, ``<*>``; a backslash makes the
    next character literal (required for ``[``, ``<`` and ``\\``).
    """
    if not isinstance(text, str) or not text:
        raise PatternError("empty pattern text")
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if not is_printable(c):
            raise PatternError(f"non-printable character {c!r} in pattern {text!r}")
        if c == "\\":
            if i + 1 >= len(text):
                raise PatternError(f"dangling escape in pattern {text!r}")
            out.append(literal(text[i + 1]))
            i += 2
        elif c == "[":
            end = text.find("]", i)
            name = text[i + 1:end] if end > 0 else None
            if name not in CLASS_NAMES:
                raise PatternError(f"bad character class at offset {i} in {text!r} (escape a literal '[' as '\\[')")
            out.append(ExtendedSymbol("class", name))
            i = end + 1
        elif c == "<":
            end = text.find(">", i)
            body = text[i + 1:end] if end > 0 else None
            if body == "*":
                out.append(BOUNDARY)
            elif body == f"{LONG_LENGTH}+":
                out.append(LONG)
            elif body is not None and body.isdigit() and 1 <= int(body) <= MAX_EXPLICIT_LENGTH:
                out.append(length_label(int(body)))
            else:
                raise PatternError(f"bad length token at offset {i} in {text!r} (escape a literal '<' as '\\<')")
            i = end + 1
        else:
            out.append(literal(c))
            i += 1
    return tuple(out)


def pattern(text):
    """Shorthand for ``FeaturePattern.parse``."""
    return FeaturePattern.parse(text)
