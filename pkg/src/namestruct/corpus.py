"""Mention corpora: tokenization, label schemas, JSONL loading, synthetic generators."""

from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

# The 32 ASCII punctuation characters.
PUNCTUATION = frozenset(string.punctuation)

DEFAULT_SEPARATOR = "sep"


class EmptyMentionError(ValueError):
    """Mention string is empty or whitespace-only."""


class ParseError(ValueError):
    """A corpus line could not be parsed."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class SchemaError(ValueError):
    """Labels do not validate against the session's label schema."""


@dataclass(frozen=True)
class LabelSchema:
    """The component set for a session plus the reserved separator label.

    ``components`` may be empty (a degenerate single-class schema consisting
    of only the separator), but names must be unique, non-empty, and distinct
    from the separator.
    """

    components: tuple[str, ...]
    separator: str = DEFAULT_SEPARATOR

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(set(self.components)) != len(self.components):
            raise SchemaError("component names must be unique")
        if any(not c for c in self.components):
            raise SchemaError("component names must be non-empty")
        if not self.separator:
            raise SchemaError("separator name must be non-empty")
        if self.separator in self.components:
            raise SchemaError("separator must be distinct from all components")

    @property
    def labels(self) -> tuple[str, ...]:
        """Every assignable label: components in order, separator last."""
        return self.components + (self.separator,)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise SchemaError(f"unknown label {label!r}") from None

    def validate_labels(self, labels: Sequence[str], n_tokens: int) -> None:
        if len(labels) != n_tokens:
            raise SchemaError(
                f"expected {n_tokens} labels, got {len(labels)}"
            )
        known = set(self.labels)
        for lab in labels:
            if lab not in known:
                raise SchemaError(f"unknown label {lab!r}")

    def to_dict(self) -> dict:
        return {"components": list(self.components), "separator": self.separator}

    @classmethod
    def from_dict(cls, d: Mapping) -> "LabelSchema":
        return cls(tuple(d["components"]), d.get("separator", DEFAULT_SEPARATOR))


@dataclass(frozen=True)
class Mention:
    """A raw entity string with its token sequence and optional gold labels."""

    id: str
    raw: str
    tokens: tuple[str, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise EmptyMentionError(f"mention {self.id!r} has no tokens")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.tokens):
                raise SchemaError(
                    f"mention {self.id!r}: {len(self.labels)} labels for "
                    f"{len(self.tokens)} tokens"
                )

    def to_record(self) -> dict:
        rec = {"id": self.id, "mention": self.raw, "tokens": list(self.tokens)}
        if self.labels is not None:
            rec["labels"] = list(self.labels)
        return rec


@dataclass(frozen=True)
class Corpus:
    mentions: tuple[Mention, ...]
    schema: LabelSchema

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(self.mentions))
        ids = [m.id for m in self.mentions]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise SchemaError(f"duplicate mention id {dup!r}")

    def __len__(self) -> int:
        return len(self.mentions)

    def by_id(self) -> dict[str, Mention]:
        return {m.id: m for m in self.mentions}


def tokenize(raw: str) -> list[str]:
    """Split a mention string into tokens.

    Splits on runs of whitespace, then detaches leading punctuation and
    trailing punctuation from each chunk. A trailing period stays attached so
    abbreviations keep their dot. Interior punctuation is never split.
    """
    if not raw or not raw.strip():
        raise EmptyMentionError("mention is empty or whitespace-only")
    tokens: list[str] = []
    for chunk in raw.split():
        tokens.extend(_split_punctuation(chunk))
    return tokens


def _split_punctuation(chunk: str) -> list[str]:
    if all(c in PUNCTUATION for c in chunk):
        return [chunk]
    leading: list[str] = []
    core = chunk
    while core and core[0] in PUNCTUATION:
        leading.append(core[0])
        core = core[1:]
    trailing: list[str] = []
    while core and core[-1] in PUNCTUATION and core[-1] != ".":
        trailing.append(core[-1])
        core = core[:-1]
    trailing.reverse()
    return leading + [core] + trailing


def detokenize(tokens: Sequence[str]) -> str:
    """Rebuild a display string from tokens, reattaching punctuation.

    Inverse of :func:`tokenize` up to whitespace: closing punctuation glues to
    the previous token, opening punctuation to the next, and double quotes
    alternate by parity.
    """
    no_space_before = set(",.;:!?)]}%")
    no_space_after = set("([{")
    parts: list[str] = []
    glue_next = False
    quote_open = False
    for tok in tokens:
        is_punct = all(c in PUNCTUATION for c in tok)
        if tok == '"':
            if quote_open:
                parts.append(tok)
                glue_next = False
            else:
                parts.append((" " if parts and not glue_next else "") + tok)
                glue_next = True
            quote_open = not quote_open
            continue
        if parts and not glue_next and not (is_punct and tok[0] in no_space_before):
            parts.append(" " + tok)
        else:
            parts.append(tok)
        glue_next = is_punct and tok[-1] in no_space_after
    return "".join(parts)


def load_corpus(path: str | Path, schema: LabelSchema) -> Corpus:
    """Read a JSONL corpus, tokenizing records that carry no explicit tokens."""
    path = Path(path)
    mentions: list[Mention] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise ParseError(line_no, "record is not a JSON object")
            if "id" not in rec or "mention" not in rec:
                raise ParseError(line_no, "record needs 'id' and 'mention' fields")
            tokens = rec.get("tokens")
            if tokens is None:
                try:
                    tokens = tokenize(rec["mention"])
                except EmptyMentionError as exc:
                    raise ParseError(line_no, str(exc)) from exc
            labels = rec.get("labels")
            if labels is not None:
                schema.validate_labels(labels, len(tokens))
            mentions.append(
                Mention(
                    id=str(rec["id"]),
                    raw=rec["mention"],
                    tokens=tuple(tokens),
                    labels=tuple(labels) if labels is not None else None,
                )
            )
    return Corpus(tuple(mentions), schema)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSONL, atomically (write to temp, then rename)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for m in corpus.mentions:
            fh.write(json.dumps(m.to_record(), ensure_ascii=False) + "\n")
    tmp.replace(path)


# ---------------------------------------------------------------------------
# Synthetic corpora
# ---------------------------------------------------------------------------

PERSON_SCHEMA = LabelSchema(
    ("title", "first", "middle", "last", "suffix", "degree", "nickname")
)
ORG_SCHEMA = LabelSchema(("corename", "type", "suffix", "location"))
DATE_SCHEMA = LabelSchema(("MonthOfYear", "Day", "Year", "tok"))

BUILTIN_SCHEMAS: dict[str, LabelSchema] = {
    "person": PERSON_SCHEMA,
    "org": ORG_SCHEMA,
    "date": DATE_SCHEMA,
}

_MONTHS = [
    "January", "February", "March", "April", "May", "June", "July",
    "August", "September", "October", "November", "December",
]
_MONTH_ABBR = [
    "Jan.", "Feb.", "Mar.", "Apr.", "May.", "Jun.", "Jul.",
    "Aug.", "Sep.", "Oct.", "Nov.", "Dec.",
]
_WEEKDAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]

_FIRST_NAMES = [
    "Liat", "Hagop", "Michael", "Mary", "Elena", "Tomas", "Aisha", "Priya",
    "Jordan", "Wei", "Sofia", "Dmitri", "Kwame", "Ingrid", "Rafael", "Yuki",
]
_LAST_NAMES = [
    "Sossove", "Youssoufia", "Adzemovi", "Watson", "Okafor", "Lindqvist",
    "Marchetti", "Novak", "Tanaka", "Herrera", "Dubois", "Petrov", "Mensah",
    "Kowalski", "Byrne", "Iversen",
]
_NICKNAMES = ["Ace", "Red", "Duke", "Skip", "Bud", "Dot", "Kit", "Mo"]
_TITLES = ["Mr", "Ms", "Dr", "Prof", "Sir", "Capt", "Rev", "Gen"]
_DEGREES = ["B.S.", "M.D.", "Ph.D.", "M.A.", "J.D.", "B.A.", "D.D.S.", "M.B.A."]
_SUFFIXES_PERSON = ["Jr.", "Sr.", "II", "III", "IV", "Esq."]

_ORG_CORE = [
    "Apple", "Sony", "Staples", "Jones", "Apparel", "Coca", "Cola", "Acme",
    "Vertex", "Summit", "Harbor", "Pioneer", "Crescent", "Atlas", "Beacon",
    "Orchid",
]
_ORG_TYPES = ["Group", "Holdings", "Industries", "Systems", "Partners", "Labs"]
_ORG_SUFFIXES = ["Inc", "Corp", "Co", "Ltd", "LLC", "PLC", "AG", "NV"]
_ORG_LOCATIONS = ["Zurich", "Austin", "Nairobi", "Osaka", "Lyon", "Dublin", "Bogota", "Perth"]


def _person_templates():
    def first(r):
        return r.choice(_FIRST_NAMES)

    def last(r):
        return r.choice(_LAST_NAMES)

    def initial(r):
        return r.choice(string.ascii_uppercase) + "."

    return [
        lambda r: [(first(r), "first"), (last(r), "last")],
        lambda r: [(r.choice(_TITLES), "title"), (first(r), "first"), (last(r), "last")],
        lambda r: [(r.choice(_TITLES) + ".", "title"), (first(r), "first"), (last(r), "last")],
        lambda r: [(first(r), "first"), (first(r), "middle"), (last(r), "last")],
        lambda r: [(first(r), "first"), (initial(r), "middle"), (last(r), "last")],
        lambda r: [(last(r), "last"), (",", "sep"), (first(r), "first")],
        lambda r: [
            (first(r), "first"), (last(r), "last"), (",", "sep"),
            (r.choice(_DEGREES), "degree"),
        ],
        lambda r: [(first(r), "first"), (last(r), "last"), (r.choice(_SUFFIXES_PERSON), "suffix")],
        lambda r: [
            (first(r), "first"), ('"', "sep"), (r.choice(_NICKNAMES), "nickname"),
            ('"', "sep"), (last(r), "last"),
        ],
        lambda r: [
            (r.choice(_TITLES), "title"), (first(r), "first"),
            (first(r), "middle"), (last(r), "last"),
        ],
        lambda r: [(initial(r), "first"), (last(r), "last")],
        lambda r: [
            (last(r), "last"), (",", "sep"), (first(r), "first"), (initial(r), "middle"),
        ],
    ]


def _org_templates():
    def core(r):
        return r.choice(_ORG_CORE)

    def core_up(r):
        return core(r).upper()

    return [
        lambda r: [(core_up(r), "corename"), (r.choice(_ORG_SUFFIXES).upper() + ".", "suffix")],
        lambda r: [
            (core_up(r), "corename"), (core_up(r), "corename"),
            (r.choice(_ORG_TYPES).upper(), "type"), (r.choice(_ORG_SUFFIXES).upper(), "suffix"),
        ],
        lambda r: [
            (core_up(r), "corename"), (",", "sep"),
            (r.choice(_ORG_SUFFIXES).upper() + ".", "suffix"),
        ],
        lambda r: [(core(r), "corename"), (r.choice(_ORG_SUFFIXES) + ".", "suffix")],
        lambda r: [
            (core(r), "corename"), (core(r), "corename"),
            (r.choice(_ORG_SUFFIXES) + ".", "suffix"),
        ],
        lambda r: [(core(r), "corename"), (r.choice(_ORG_TYPES), "type")],
        lambda r: [
            (core(r), "corename"), (r.choice(_ORG_SUFFIXES) + ".", "suffix"),
            ("(", "sep"), (r.choice(_ORG_LOCATIONS), "location"), (")", "sep"),
        ],
        lambda r: [
            (core(r), "corename"), ("&", "sep"), (core(r), "corename"),
            (r.choice(_ORG_SUFFIXES), "suffix"),
        ],
        lambda r: [
            (core_up(r), "corename"), (r.choice(_ORG_TYPES).upper(), "type"),
            (r.choice(_ORG_SUFFIXES).upper(), "suffix"),
        ],
        lambda r: [
            (core(r), "corename"), (r.choice(_ORG_TYPES), "type"),
            (r.choice(_ORG_SUFFIXES) + ".", "suffix"),
        ],
        lambda r: [
            (core_up(r), "corename"), (",", "sep"), (r.choice(_ORG_SUFFIXES).upper(), "suffix"),
        ],
        lambda r: [
            (core(r), "corename"), (r.choice(_ORG_LOCATIONS), "location"),
            (r.choice(_ORG_SUFFIXES) + ".", "suffix"),
        ],
    ]


def _date_templates():
    def month(r):
        return r.choice(_MONTHS)

    def month_abbr(r):
        return r.choice(_MONTH_ABBR)

    def day(r):
        return str(r.randint(1, 28))

    def year(r):
        return str(r.randint(1900, 2029))

    def ordinal(r):
        d = r.randint(1, 28)
        if 10 <= d % 100 <= 20:
            tail = "th"
        else:
            tail = {1: "st", 2: "nd", 3: "rd"}.get(d % 10, "th")
        return f"{d}{tail}"

    def slash(r):
        return f"{r.randint(1, 12)}/{r.randint(1, 28)}/{r.randint(1900, 2029)}"

    def iso(r):
        return f"{r.randint(1900, 2029)}-{r.randint(1, 12):02d}-{r.randint(1, 28):02d}"

    return [
        lambda r: [(month(r), "MonthOfYear"), (day(r), "Day"), (",", "sep"), (year(r), "Year")],
        lambda r: [(month(r), "MonthOfYear"), (day(r), "Day")],
        lambda r: [(day(r), "Day"), (month(r), "MonthOfYear"), (year(r), "Year")],
        lambda r: [
            (month_abbr(r), "MonthOfYear"), (day(r), "Day"), (",", "sep"), (year(r), "Year"),
        ],
        lambda r: [(ordinal(r), "Day"), (month(r), "MonthOfYear"), (year(r), "Year")],
        lambda r: [
            (ordinal(r), "Day"), ("day", "tok"), ("of", "tok"),
            (month(r), "MonthOfYear"), (year(r), "Year"),
        ],
        lambda r: [(month(r), "MonthOfYear"), (year(r), "Year")],
        lambda r: [(slash(r), "tok")],
        lambda r: [(iso(r), "tok")],
        lambda r: [(month(r), "MonthOfYear"), (day(r), "Day"), (year(r), "Year")],
        lambda r: [(day(r) + ".", "Day"), (month(r), "MonthOfYear"), (year(r), "Year")],
        lambda r: [
            (r.choice(_WEEKDAYS), "tok"), (",", "sep"), (month(r), "MonthOfYear"),
            (day(r), "Day"), (",", "sep"), (year(r), "Year"),
        ],
    ]


_TEMPLATES = {
    "person": _person_templates(),
    "org": _org_templates(),
    "date": _date_templates(),
}


def gen_synthetic(kind: str, n: int, seed: int) -> Corpus:
    """Generate a gold-labeled corpus of ``n`` mentions for ``kind``.

    Deterministic for a fixed (kind, n, seed); mentions are drawn uniformly
    from the structural templates of the kind.
    """
    if kind not in _TEMPLATES:
        raise ValueError(f"unknown kind {kind!r}; expected one of {sorted(_TEMPLATES)}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    templates = _TEMPLATES[kind]
    schema = BUILTIN_SCHEMAS[kind]
    mentions = []
    for i in range(n):
        pairs = rng.choice(templates)(rng)
        tokens = tuple(tok for tok, _ in pairs)
        labels = tuple(lab for _, lab in pairs)
        mentions.append(
            Mention(
                id=f"{kind}-{i:05d}",
                raw=detokenize(tokens),
                tokens=tokens,
                labels=labels,
            )
        )
    return Corpus(tuple(mentions), schema)
