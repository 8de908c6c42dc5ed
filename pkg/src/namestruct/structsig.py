"""Boolean structure predicates per token and collapsed entity signatures.

The predicate table is the contract for checkpoint compatibility: bit order
and semantics are fixed. The first 13 predicates depend only on the token
text; the last two are positional. Signatures use only the 13
position-independent bits so that structurally repeating tokens can collapse
regardless of where they sit in the mention.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

from .corpus import Corpus

_PUNCT = frozenset(string.punctuation)
_DIGITS = frozenset("0123456789")

_INTEGER_RE = re.compile(r"[+-]?[0-9]+\Z")
_NUMERIC_RE = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)\Z")


def _alpha(token: str) -> list[str]:
    return [c for c in token if c.isalpha()]


def _all_caps(t: str) -> bool:
    a = _alpha(t)
    return bool(a) and all(c.isupper() for c in a)


def _all_lower(t: str) -> bool:
    a = _alpha(t)
    return bool(a) and all(c.islower() for c in a)


def _all_alpha(t: str) -> bool:
    return all(c.isalpha() for c in t)


def _punct_only(t: str) -> bool:
    return all(c in _PUNCT for c in t)


def _alphanum_mix(t: str) -> bool:
    has_letter = has_digit = False
    for c in t:
        if c.isalpha():
            has_letter = True
        elif c in _DIGITS:
            has_digit = True
        else:
            return False
    return has_letter and has_digit


def _has_digit(t: str) -> bool:
    return any(c in _DIGITS for c in t)


def _has_punct(t: str) -> bool:
    return any(c in _PUNCT for c in t)


def _first_upper(t: str) -> bool:
    return t[0].isalpha() and t[0].isupper()


def _two_digit(t: str) -> bool:
    return len(t) == 2 and all(c in _DIGITS for c in t)


def _four_digit(t: str) -> bool:
    return len(t) == 4 and all(c in _DIGITS for c in t)


def _single_digit(t: str) -> bool:
    return len(t) == 1 and t in _DIGITS


def _integer(t: str) -> bool:
    return _INTEGER_RE.match(t) is not None


def _numeric(t: str) -> bool:
    return _NUMERIC_RE.match(t) is not None


# Position-independent predicates, in fixed bit order.
CONTENT_PREDICATES: tuple[tuple[str, Callable[[str], bool]], ...] = (
    ("all_caps", _all_caps),
    ("all_lower", _all_lower),
    ("all_alpha", _all_alpha),
    ("punct_only", _punct_only),
    ("alphanum_mix", _alphanum_mix),
    ("has_digit", _has_digit),
    ("has_punct", _has_punct),
    ("first_upper", _first_upper),
    ("two_digit", _two_digit),
    ("four_digit", _four_digit),
    ("single_digit", _single_digit),
    ("integer", _integer),
    ("numeric", _numeric),
)

POSITIONAL_PREDICATES: tuple[str, ...] = ("at_start", "at_end")

SIGNATURE_BITS = len(CONTENT_PREDICATES)
NUM_PREDICATES = SIGNATURE_BITS + len(POSITIONAL_PREDICATES)

PREDICATE_NAMES: tuple[str, ...] = (
    tuple(name for name, _ in CONTENT_PREDICATES) + POSITIONAL_PREDICATES
)


@lru_cache(maxsize=65536)
def content_vector(token: str) -> tuple[bool, ...]:
    """The 13 position-independent predicate bits for a token."""
    if not token:
        raise ValueError("token is empty")
    return tuple(fn(token) for _, fn in CONTENT_PREDICATES)


def eval_predicates(token: str, index: int, length: int) -> tuple[bool, ...]:
    """All 15 predicate bits for a token at ``index`` of a ``length``-token mention."""
    if not 0 <= index < length:
        raise ValueError(f"index {index} out of range for length {length}")
    return content_vector(token) + (index == 0, index == length - 1)


@dataclass(frozen=True, eq=False)
class Signature:
    """Collapsed sequence of content vectors with run lengths.

    Consecutive tokens with equal content vectors merge into one group.
    Equality and hashing compare the group vector sequence only, ignoring run
    lengths, so mentions of different token counts can share a signature.
    """

    groups: tuple[tuple[tuple[bool, ...], int], ...]

    @property
    def vectors(self) -> tuple[tuple[bool, ...], ...]:
        return tuple(vec for vec, _ in self.groups)

    @property
    def token_count(self) -> int:
        return sum(run for _, run in self.groups)

    def __eq__(self, other) -> bool:
        return isinstance(other, Signature) and self.vectors == other.vectors

    def __hash__(self) -> int:
        return hash(self.vectors)


def token_vectors(tokens: Sequence[str]) -> tuple[tuple[bool, ...], ...]:
    """Uncollapsed per-token content vectors."""
    return tuple(content_vector(t) for t in tokens)


def signature(tokens: Sequence[str]) -> Signature:
    """Collapse maximal runs of equal content vectors into signature groups."""
    if not tokens:
        raise ValueError("tokens is empty")
    groups: list[tuple[tuple[bool, ...], int]] = []
    for vec in token_vectors(tokens):
        if groups and groups[-1][0] == vec:
            groups[-1] = (vec, groups[-1][1] + 1)
        else:
            groups.append((vec, 1))
    return Signature(tuple(groups))


def group_by_signature(corpus: Corpus) -> dict[Signature, set[str]]:
    """Partition mention ids by signature equality (run lengths ignored)."""
    buckets: dict[Signature, set[str]] = {}
    for m in corpus.mentions:
        buckets.setdefault(signature(m.tokens), set()).add(m.id)
    return buckets
