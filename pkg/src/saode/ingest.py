"""Raw text documents to encoded presence/absence instance streams.

Encoded stream format (tab separated, one instance per line)::

    #sode-stream<TAB>n=2000<TAB>seasons=7<TAB>labels=arts,business
    6<TAB>arts,business<TAB>0 7 19

Fields are the season value (``?`` when unknown), the comma-joined sorted
label set, and the space-joined sorted indices of present attributes.  The
header line is optional; without it the reader cannot know ``n``.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

from .classifiers import ClassCatalog
from .counts import Instance
from .seasons import SeasonSpec

log = logging.getLogger(__name__)

_TOKEN = re.compile(r"[^\W_]+")
HEADER_TAG = "#sode-stream"


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("saode").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


def load_stopwords(path: str | Path) -> frozenset[str]:
    return frozenset(Path(path).read_text("utf-8").lower().split())


def tokenize(text: str, stopwords: Iterable[str] | None = None) -> set[str]:
    """Unique lowercase alphanumeric runs of ``text`` minus stop words."""
    stop = default_stopwords() if stopwords is None else stopwords
    return {tok for tok in _TOKEN.findall(text.lower()) if tok not in stop}


@dataclass(frozen=True)
class RawDocument:
    text: str
    labels: tuple[str, ...]
    date: str | None = None
    season: int | None = None

    @classmethod
    def from_json(cls, obj: Mapping) -> "RawDocument":
        labels = obj.get("labels")
        if not isinstance(labels, list) or not all(isinstance(l, str) for l in labels):
            raise ValueError("'labels' must be a list of strings")
        return cls(str(obj.get("text", "")), tuple(labels), obj.get("date"), obj.get("season"))


def read_jsonl(path: str | Path) -> Iterator[RawDocument]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield RawDocument.from_json(json.loads(line))
            except (ValueError, AttributeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc


@dataclass(frozen=True)
class Vocabulary:
    """Top terms by document frequency; ties broken lexicographically."""

    terms: tuple[str, ...]
    frequencies: tuple[int, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    @classmethod
    def from_counts(cls, df: Mapping[str, int], size: int) -> "Vocabulary":
        if size < 1:
            raise ValueError("vocabulary size must be >= 1")
        ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:size]
        return cls(tuple(t for t, _ in ranked), tuple(c for _, c in ranked))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for term, freq in zip(self.terms, self.frequencies):
                fh.write(f"{term}\t{freq}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        terms, freqs = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'term<TAB>frequency'")
                terms.append(parts[0])
                freqs.append(int(parts[1]))
        return cls(tuple(terms), tuple(freqs))


def document_frequencies(texts: Iterable[str], stopwords: Iterable[str] | None = None) -> Counter:
    """Number of documents containing each term.  Shards merge with ``+``."""
    df: Counter = Counter()
    for text in texts:
        df.update(tokenize(text, stopwords))
    return df


def build_vocab(texts: Iterable[str], size: int = 2000,
                stopwords: Iterable[str] | None = None) -> Vocabulary:
    seen = 0

    def counted():
        nonlocal seen
        for text in texts:
            seen += 1
            yield text

    df = document_frequencies(counted(), stopwords)
    if seen == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    return Vocabulary.from_counts(df, size)


def document_season(doc: RawDocument, spec: SeasonSpec) -> int | None:
    """Season of a document, or None (with a warning) when it cannot be derived."""
    try:
        if doc.season is not None:
            return spec.check(int(doc.season))
        if doc.date is not None and spec.kind != "column":
            return spec.parse(doc.date)
    except (ValueError, TypeError) as exc:
        log.warning("season unavailable for document: %s", exc)
        return None
    log.warning("document has no usable date or season value")
    return None


def encode(doc: RawDocument, vocab: Vocabulary, season_spec: SeasonSpec,
           catalog: ClassCatalog | None = None,
           stopwords: Iterable[str] | None = None) -> Instance:
    present = sorted(vocab.index[t] for t in tokenize(doc.text, stopwords) if t in vocab.index)
    if catalog is not None:
        catalog.register(doc.labels)
    return Instance.binary(present, document_season(doc, season_spec), doc.labels)


# -- encoded stream files -------------------------------------------------------


@dataclass(frozen=True)
class StreamHeader:
    n: int | None = None
    n_seasons: int | None = None
    labels: tuple[str, ...] | None = None

    def format(self) -> str:
        parts = [HEADER_TAG]
        if self.n is not None:
            parts.append(f"n={self.n}")
        if self.n_seasons is not None:
            parts.append(f"seasons={self.n_seasons}")
        if self.labels is not None:
            parts.append("labels=" + ",".join(self.labels))
        return "\t".join(parts)

    @classmethod
    def parse(cls, line: str) -> "StreamHeader":
        fields = line.rstrip("\n").split("\t")
        if fields[0] != HEADER_TAG:
            raise ValueError(f"not a stream header: {line!r}")
        kv = dict(f.split("=", 1) for f in fields[1:])
        labels = tuple(l for l in kv["labels"].split(",") if l) if "labels" in kv else None
        return cls(int(kv["n"]) if "n" in kv else None,
                   int(kv["seasons"]) if "seasons" in kv else None, labels)


def _check_label(label: str) -> str:
    if not label or any(ch in label for ch in ",\t\n\r"):
        raise ValueError(f"label {label!r} cannot be written to a stream file")
    return label


def format_instance(x: Instance) -> str:
    season = "?" if x.season is None else str(x.season)
    labels = ",".join(_check_label(l) for l in sorted(x.labels))
    return f"{season}\t{labels}\t{' '.join(map(str, x.present()))}"


def parse_instance(line: str) -> Instance:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 3:
        raise ValueError(f"expected 3 tab-separated fields, got {len(fields)}")
    season_s, labels_s, present_s = fields
    season = None if season_s == "?" else int(season_s)
    labels = frozenset(l for l in labels_s.split(",") if l)
    present = [int(tok) for tok in present_s.split()]
    return Instance.binary(present, season, labels)


def write_stream(fh: IO[str], instances: Iterable[Instance], header: StreamHeader | None = None) -> int:
    written = 0
    if header is not None:
        fh.write(header.format() + "\n")
    for x in instances:
        fh.write(format_instance(x) + "\n")
        written += 1
    return written


def read_stream(fh: IO[str]) -> tuple[StreamHeader, Iterator[Instance]]:
    """Read the optional header eagerly and return a lazy instance iterator."""
    first = fh.readline()
    header = StreamHeader()
    pending: list[str] = []
    if first.startswith(HEADER_TAG):
        header = StreamHeader.parse(first)
    elif first:
        pending.append(first)

    def instances() -> Iterator[Instance]:
        lineno = 1 if pending else 2
        for line in _chain(pending, fh):
            if line.strip() and not line.startswith("#"):
                try:
                    yield parse_instance(line)
                except ValueError as exc:
                    raise ValueError(f"line {lineno}: {exc}") from exc
            lineno += 1

    return header, instances()


def _chain(first: Sequence[str], rest: Iterable[str]) -> Iterator[str]:
    yield from first
    yield from rest


def preprocess(docs: Sequence[RawDocument], vocab: Vocabulary, season_spec: SeasonSpec,
               stopwords: Iterable[str] | None = None) -> tuple[StreamHeader, list[Instance]]:
    """Encode a corpus; the header lists every label in sorted order."""
    catalog = ClassCatalog()
    instances = [encode(d, vocab, season_spec, catalog, stopwords) for d in docs]
    header = StreamHeader(len(vocab), season_spec.n_seasons, tuple(catalog.labels()))
    return header, instances
