"""Naive Bayes, AODE and SAODE over the powerset class space.

All scores are natural-log, unnormalised joint estimates.  Smoothing is
Laplace-style with pseudo-count ``alpha``:

    P(y)              = (c_y + a) / (count + a k)
    P(t | y)          = (N(y, t) + a) / (c_y + a T)
    P(y, x_i, t)      = (N(y, t, x_i) + a) / (count + a k T |V_i|)
    P(x_j | y, x_i, t) = (N(y, t, x_i, x_j) + a) / (N(y, t, x_i) + a |V_j|)
    P(x_i | y)        = (N(y, x_i) + a) / (N(y, i known) + a |V_i|)

AODE uses the same estimates over a store with a single season.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._kernels import binary_ode, general_ode
from .counts import (
    BACKEND_BINARY,
    AttributeSchema,
    FormatError,
    FrequencyStore,
    Instance,
    SchemaError,
    check_instance,
    deserialize,
    iter_sections,
    make_store,
    read_header,
    serialize,
    write_header,
    write_section,
)
from .seasons import SeasonSpec


class UntrainedModelError(RuntimeError):
    """Scoring was requested before any training instance was seen."""


class ClassCatalog:
    """Bijection between label sets and powerset class indices, in first-seen order."""

    def __init__(self, classes: Iterable[Iterable[str]] = ()):
        self.classes: list[frozenset[str]] = []
        self.index: dict[frozenset[str], int] = {}
        for labels in classes:
            self.register(labels)

    def __len__(self) -> int:
        return len(self.classes)

    def register(self, labels: Iterable[str]) -> int:
        key = frozenset(labels)
        y = self.index.get(key)
        if y is None:
            y = self.index[key] = len(self.classes)
            self.classes.append(key)
        return y

    def lookup(self, labels: Iterable[str]) -> int | None:
        return self.index.get(frozenset(labels))

    def labels(self) -> list[str]:
        return sorted(set().union(*self.classes)) if self.classes else []

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(struct.pack("<I", len(self.classes)))
        for labels in self.classes:
            buf.write(struct.pack("<I", len(labels)))
            for label in sorted(labels):
                raw = label.encode("utf-8")
                buf.write(struct.pack("<I", len(raw)))
                buf.write(raw)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, payload: bytes) -> "ClassCatalog":
        pos = 0

        def take(fmt):
            nonlocal pos
            try:
                out = struct.unpack_from(fmt, payload, pos)
            except struct.error as exc:
                raise FormatError("CATL: truncated") from exc
            pos += struct.calcsize(fmt)
            return out[0]

        catalog = cls()
        for _ in range(take("<I")):
            labels = []
            for _ in range(take("<I")):
                size = take("<I")
                if pos + size > len(payload):
                    raise FormatError("CATL: truncated label")
                labels.append(payload[pos:pos + size].decode("utf-8"))
                pos += size
            catalog.register(labels)
        if pos != len(payload):
            raise FormatError("CATL: trailing bytes")
        return catalog


@dataclass(frozen=True)
class ModelConfig:
    m: int = 1
    alpha: float = 1.0
    season: SeasonSpec | None = None

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")


@dataclass
class ScoredPrediction:
    log_scores: np.ndarray
    probabilities: np.ndarray
    best: int
    fallback_used: bool

    @classmethod
    def from_scores(cls, log_scores: np.ndarray, fallback_used: bool) -> "ScoredPrediction":
        top = log_scores.max()
        shifted = np.exp(log_scores - top)
        return cls(log_scores, shifted / shifted.sum(), tie_argmax(log_scores), fallback_used)


# Scores this close to the maximum count as tied; summation order alone can
# move mathematically equal scores apart by a few ulps.
TIE_TOL = 1e-12


def tie_argmax(log_scores: np.ndarray) -> int:
    """Lowest index whose log-score is within TIE_TOL (relative) of the maximum."""
    vals = log_scores.tolist()
    top = max(vals)
    floor = top - TIE_TOL * max(1.0, abs(top))
    return next(y for y, v in enumerate(vals) if v >= floor)


@dataclass(frozen=True)
class PredictionRecord:
    """Output for one document: predicted label set, per-label probabilities, truth."""

    predicted: frozenset[str]
    truth: frozenset[str]
    label_probs: Mapping[str, float] = field(default_factory=dict)
    season: int | None = None
    abstained: bool = False

    @classmethod
    def abstain(cls, truth: Iterable[str], season: int | None = None) -> "PredictionRecord":
        return cls(frozenset(), frozenset(truth), {}, season, abstained=True)


# -- scoring primitives ------------------------------------------------------


def log_prior(store: FrequencyStore, k: int, alpha: float) -> np.ndarray:
    c = store.class_counts(k).astype(np.float64)
    return np.log(c + alpha) - np.log(store.count + alpha * k)


def nb_log_scores(store: FrequencyStore, x: Instance, k: int, alpha: float) -> np.ndarray:
    """log P(y) + sum over known attributes of log P(x_i | y)."""
    known, q = store.query(x)
    scores = log_prior(store, k, alpha)
    if len(known) == 0:
        return scores
    match, total = store.nb_counts(known, q, k)
    card = np.asarray(store.schema.cardinalities, dtype=np.float64)[known]
    return scores + (np.log(match + alpha) - np.log(total + alpha * card)).sum(axis=1)


def ode_log_average(store: FrequencyStore, x: Instance, t: int, k: int,
                    m: int, alpha: float) -> tuple[np.ndarray, int] | None:
    """Log of the averaged one-dependence sum for season ``t``.

    Returns ``(scores, p_count)`` where ``scores[y]`` is
    ``log(sum_i P(y, x_i, t) prod_j P(x_j | y, x_i, t)) - log(p_count)`` over
    the eligible parents ``i``; None when no parent is eligible.
    """
    known, q = store.query(x)
    if len(known) == 0:
        return None
    parents = np.flatnonzero(store.value_counts(known, q) >= m)
    if len(parents) == 0:
        return None
    T = store.schema.n_seasons
    slab = store.pair_slab(t)
    if store.backend == BACKEND_BINARY:
        ct = store.class_season_counts(t, k)
        log_norm = math.log(store.count + alpha * k * T * 2)
        scores = binary_ode(slab, ct, q, parents, k, alpha, log_norm)
    else:
        card = np.asarray(store.schema.cardinalities, dtype=np.float64)[known]
        log_norm = np.log(store.count + alpha * k * T * card[parents])
        scores = general_ode(slab, q, card, parents, k, alpha, log_norm)
    return scores, len(parents)


# -- models --------------------------------------------------------------------


class Classifier:
    """Common train/score/classify surface."""

    kind: str = ""

    def __init__(self, schema: AttributeSchema, config: ModelConfig | None = None,
                 catalog: ClassCatalog | None = None):
        self.schema = schema
        self.config = config or ModelConfig()
        self.catalog = catalog if catalog is not None else ClassCatalog()

    @property
    def trained(self) -> bool:
        return any(s.count > 0 for s in self.stores())

    def stores(self) -> list[FrequencyStore]:
        raise NotImplementedError

    def _set_stores(self, stores: list[FrequencyStore]) -> None:
        raise NotImplementedError

    def validate(self, x: Instance) -> None:
        check_instance(self.schema, x, binary=self.schema.is_binary)

    def train(self, x: Instance) -> None:
        self.validate(x)
        self._learn(x)

    def _learn(self, x: Instance) -> None:
        # x already validated against self.schema
        if not x.labels:
            raise SchemaError("training instance has no labels")
        self._train(x, self.catalog.register(x.labels))

    def train_many(self, xs: Iterable[Instance]) -> None:
        xs = list(xs)
        for x in xs:
            self.validate(x)
            if not x.labels:
                raise SchemaError("training instance has no labels")
        ys = [self.catalog.register(x.labels) for x in xs]
        self._train_many(xs, ys)

    def _train(self, x: Instance, y: int) -> None:
        raise NotImplementedError

    def _train_many(self, xs: list[Instance], ys: list[int]) -> None:
        for x, y in zip(xs, ys):
            self._train(x, y)

    def score(self, x: Instance) -> ScoredPrediction:
        self.validate(x)
        return self._score(x)

    def _score(self, x: Instance) -> ScoredPrediction:
        raise NotImplementedError

    def _require_trained(self) -> None:
        if not self.trained:
            raise UntrainedModelError(f"{self.kind} model has not been trained")

    def classify(self, x: Instance) -> PredictionRecord:
        self.validate(x)
        return self._classify(x)

    def _classify(self, x: Instance) -> PredictionRecord:
        return self._record(x, self._score(x))

    def _classify_and_learn(self, x: Instance) -> PredictionRecord:
        """One prequential step on a validated instance: predict, then train."""
        record = self._classify(x)
        self._learn(x)
        return record

    def _record(self, x: Instance, sp: ScoredPrediction) -> PredictionRecord:
        classes = self.catalog.classes
        probs: dict[str, float] = {}
        for y, p in enumerate(sp.probabilities):
            for label in classes[y]:
                probs[label] = probs.get(label, 0.0) + float(p)
        return PredictionRecord(classes[sp.best], x.labels, probs, x.season)

    def to_bytes(self) -> bytes:
        return save_model(self)

    def describe(self) -> dict:
        return {"kind": self.kind}


class _SingleStore(Classifier):
    track_pairs = True

    def __init__(self, schema, config=None, catalog=None, backend="auto"):
        super().__init__(schema, config, catalog)
        self.store = make_store(self._store_schema(), backend, track_pairs=self.track_pairs)

    def _store_schema(self) -> AttributeSchema:
        return self.schema

    def stores(self):
        return [self.store]

    def _set_stores(self, stores):
        (self.store,) = stores

    def _prepare(self, x: Instance) -> Instance:
        return x

    def _train(self, x, y):
        self.store._apply(self._prepare(x), y)

    def _train_many(self, xs, ys):
        self.store.update_many([self._prepare(x) for x in xs], ys)

    def nb_score(self, x: Instance) -> np.ndarray:
        self._require_trained()
        return nb_log_scores(self.store, x, len(self.catalog), self.config.alpha)


class NaiveBayes(_SingleStore):
    """Naive Bayes over the non-season attributes."""

    kind = "nb"
    track_pairs = False

    def _score(self, x):
        return ScoredPrediction.from_scores(self.nb_score(x), fallback_used=False)


class AODE(_SingleStore):
    """Averaged one-dependence estimators; seasons are ignored."""

    kind = "aode"

    def _store_schema(self):
        return self.schema.with_seasons(1)

    def _prepare(self, x):
        return x if x.season == 0 else Instance(x.values, 0, x.labels)

    def _score(self, x: Instance) -> ScoredPrediction:
        self._require_trained()
        k = len(self.catalog)
        # the store holds everything under season 0; queries ignore x.season
        res = ode_log_average(self.store, x, 0, k, self.config.m, self.config.alpha)
        if res is None:
            return ScoredPrediction.from_scores(self.nb_score(x), fallback_used=True)
        return ScoredPrediction.from_scores(res[0], fallback_used=False)


class SAODE(_SingleStore):
    """AODE with the season as a super-parent and a P(y) P(t|y) class weight."""

    kind = "saode"

    def _score(self, x: Instance) -> ScoredPrediction:
        self._require_trained()
        k = len(self.catalog)
        t = x.season
        res = None
        if t is not None:
            res = ode_log_average(self.store, x, t, k, self.config.m, self.config.alpha)
        if res is None:
            return ScoredPrediction.from_scores(self.nb_score(x), fallback_used=True)
        alpha = self.config.alpha
        T = self.schema.n_seasons
        c = self.store.class_counts(k).astype(np.float64)
        ct = self.store.class_season_counts(t, k).astype(np.float64)
        weight = log_prior(self.store, k, alpha) + np.log(ct + alpha) - np.log(c + alpha * T)
        return ScoredPrediction.from_scores(weight + res[0], fallback_used=False)


_INNER = {"nb": NaiveBayes, "aode": AODE}


class SeasonFeature(Classifier):
    """Appends the season as an ordinary attribute with ``T`` values."""

    def __init__(self, inner: str, schema, config=None, catalog=None):
        super().__init__(schema, config, catalog)
        if inner not in _INNER:
            raise ValueError(f"season-feature wrapper supports {sorted(_INNER)}, not {inner!r}")
        self.inner_kind = inner
        # a single-season cycle still gets two values so the schema stays valid
        widened = AttributeSchema(schema.cardinalities + (max(schema.n_seasons, 2),), 1)
        # the season may be missing, which only the general backend can hold
        self.inner = _INNER[inner](widened, self.config, self.catalog, backend="general")
        self.kind = f"{inner}+season"
        self._binary_source = schema.is_binary

    def stores(self):
        return self.inner.stores()

    def _set_stores(self, stores):
        self.inner._set_stores(stores)

    def widen(self, x: Instance) -> Instance:
        n = self.schema.n
        if self._binary_source:
            values: dict[int, int | None] = dict.fromkeys(range(n), 0)
            values.update(x.values)
        else:
            values = dict(x.values)
        values[n] = x.season
        return Instance(values, None, x.labels)

    def _train(self, x, y):
        self.inner._train(self.widen(x), y)

    def _train_many(self, xs, ys):
        self.inner._train_many([self.widen(x) for x in xs], ys)

    def _score(self, x):
        return self.inner._score(self.widen(x))

    def _classify_and_learn(self, x):
        if not x.labels:
            raise SchemaError("training instance has no labels")
        w = self.widen(x)
        record = self._record(x, self.inner._score(w))
        self.inner._train(w, self.catalog.register(x.labels))
        return record

    def describe(self):
        return {"kind": "season-feature", "inner": self.inner_kind}


class PerSeason(Classifier):
    """One inner model per season value, plus one for instances without a season.

    A season that has never been trained on gets prior-only scores computed
    from the class counts of every sub-model.
    """

    def __init__(self, inner: str, schema, config=None, catalog=None):
        super().__init__(schema, config, catalog)
        if inner not in _INNER:
            raise ValueError(f"per-season ensemble supports {sorted(_INNER)}, not {inner!r}")
        self.inner_kind = inner
        self.kind = f"{inner}-per-season"
        self.models = [_INNER[inner](schema, self.config, self.catalog)
                       for _ in range(schema.n_seasons + 1)]

    def _route(self, x: Instance) -> Classifier:
        return self.models[self.schema.n_seasons if x.season is None else x.season]

    def stores(self):
        return [m.store for m in self.models]

    def _set_stores(self, stores):
        for model, store in zip(self.models, stores, strict=True):
            model.store = store

    def _train(self, x, y):
        self._route(x)._train(x, y)

    def _train_many(self, xs, ys):
        groups: dict[int, tuple[list, list]] = {}
        for x, y in zip(xs, ys):
            key = self.schema.n_seasons if x.season is None else x.season
            gx, gy = groups.setdefault(key, ([], []))
            gx.append(x)
            gy.append(y)
        for key, (gx, gy) in sorted(groups.items()):
            self.models[key]._train_many(gx, gy)

    def prior_scores(self) -> np.ndarray:
        k = len(self.catalog)
        counts = sum(s.class_counts(k) for s in self.stores())
        alpha = self.config.alpha
        return np.log(counts + alpha) - np.log(counts.sum() + alpha * k)

    def _score(self, x):
        self._require_trained()
        sub = self._route(x)
        if not sub.trained:
            return ScoredPrediction.from_scores(self.prior_scores(), fallback_used=True)
        return sub._score(x)

    def describe(self):
        return {"kind": "per-season", "inner": self.inner_kind}


MODEL_KINDS = ("nb", "aode", "saode")


def build_model(kind: str, schema: AttributeSchema, config: ModelConfig | None = None,
                season_feature: bool = False, per_season: bool = False) -> Classifier:
    """Factory behind the CLI's ``--model``/``--season-feature``/``--per-season`` flags."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model {kind!r}; expected one of {MODEL_KINDS}")
    if season_feature and per_season:
        raise ValueError("choose at most one of season_feature and per_season")
    if kind == "saode" and (season_feature or per_season):
        raise ValueError("saode already models the season; wrappers apply to nb and aode")
    if season_feature:
        return SeasonFeature(kind, schema, config)
    if per_season:
        return PerSeason(kind, schema, config)
    return {"nb": NaiveBayes, "aode": AODE, "saode": SAODE}[kind](schema, config)


# -- persistence ----------------------------------------------------------------


def save_model(model: Classifier) -> bytes:
    cfg = model.config
    meta = dict(model.describe())
    meta.update(
        cardinalities=list(model.schema.cardinalities),
        n_seasons=model.schema.n_seasons,
        m=cfg.m,
        alpha=cfg.alpha,
        season=None if cfg.season is None else dataclasses.asdict(cfg.season),
    )
    buf = io.BytesIO()
    write_header(buf)
    write_section(buf, b"MODL", json.dumps(meta, sort_keys=True).encode("utf-8"))
    write_section(buf, b"CATL", model.catalog.to_bytes())
    for store in model.stores():
        write_section(buf, b"STOR", serialize(store))
    return buf.getvalue()


def load_model(data: bytes) -> Classifier:
    offset = read_header(data)
    sections = list(iter_sections(data, offset))
    tags = [t for t, _ in sections]
    if tags[:2] != [b"MODL", b"CATL"] or any(t != b"STOR" for t in tags[2:]):
        raise FormatError(f"unexpected model sections {tags}")
    try:
        meta = json.loads(sections[0][1].decode("utf-8"))
        schema = AttributeSchema(tuple(meta["cardinalities"]), meta["n_seasons"])
        season = SeasonSpec(**meta["season"]) if meta["season"] else None
        config = ModelConfig(meta["m"], meta["alpha"], season)
        kind = meta["kind"]
        if kind == "season-feature":
            model = build_model(meta["inner"], schema, config, season_feature=True)
        elif kind == "per-season":
            model = build_model(meta["inner"], schema, config, per_season=True)
        else:
            model = build_model(kind, schema, config)
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"bad MODL section: {exc}") from exc
    catalog = ClassCatalog.from_bytes(sections[1][1])
    stores = [deserialize(payload) for _, payload in sections[2:]]
    if len(stores) != len(model.stores()):
        raise FormatError(f"expected {len(model.stores())} stores, found {len(stores)}")
    for fresh, loaded in zip(model.stores(), stores):
        if fresh.schema != loaded.schema or fresh.backend != loaded.backend:
            raise FormatError("store schema does not match model header")
    model.catalog.classes[:] = catalog.classes
    model.catalog.index.clear()
    model.catalog.index.update(catalog.index)
    model._set_stores(stores)
    return model
