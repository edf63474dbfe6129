"""Test-then-train evaluation with overall, windowed and per-season breakdowns."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .classifiers import Classifier, ModelConfig, PredictionRecord, build_model
from .counts import AttributeSchema, Instance, SchemaError
from .metrics import HIGHER_IS_BETTER, METRICS, EvaluationLedger

log = logging.getLogger(__name__)

MISSING_SEASON = "?"


@dataclass(frozen=True)
class RunConfig:
    model: str = "saode"
    season_feature: bool = False
    per_season: bool = False
    model_config: ModelConfig = field(default_factory=ModelConfig)
    window: int = 1000
    season_breakdown: bool = True
    label_breakdown: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window size must be >= 1")

    @property
    def model_name(self) -> str:
        if self.season_feature:
            return f"{self.model}+season"
        if self.per_season:
            return f"{self.model}-per-season"
        return self.model

    def build(self, schema: AttributeSchema) -> Classifier:
        return build_model(self.model, schema, self.model_config,
                           season_feature=self.season_feature, per_season=self.per_season)


@dataclass
class MetricRow:
    key: str
    ledger: EvaluationLedger

    @property
    def n(self) -> int:
        return self.ledger.n

    def values(self) -> dict[str, float]:
        return self.ledger.values()


@dataclass
class RunReport:
    run_id: str
    model_name: str
    labels: tuple[str, ...]
    overall: MetricRow
    windows: list[MetricRow]
    seasons: list[MetricRow]
    season_labels: list[tuple[str, str, MetricRow]]
    records: list[PredictionRecord]
    skipped: int = 0

    def season_mla(self) -> dict[str, float]:
        return {row.key: row.values()["MLA"] for row in self.seasons}


def _season_key(season: int | None) -> str:
    return MISSING_SEASON if season is None else str(season)


def _season_order(key: str) -> tuple[int, int]:
    return (1, 0) if key == MISSING_SEASON else (0, int(key))


def run_prequential(source: Iterable[Instance], schema: AttributeSchema, config: RunConfig,
                    labels: Sequence[str] | None = None, run_id: str = "run",
                    model: Classifier | None = None, keep_records: bool = True) -> RunReport:
    """Classify each instance with the current model, record it, then train on it.

    The first instance meets an untrained model and is recorded as an
    abstention (empty prediction, zero probabilities), which counts as wrong.
    Instances that fail schema validation are skipped and counted.
    """
    if labels is None:
        source = list(source)
        labels = sorted(set().union(*(x.labels for x in source))) if source else []
    labels = tuple(labels)
    if model is None:
        model = config.build(schema)

    overall = EvaluationLedger(labels)
    windows: list[EvaluationLedger] = []
    seasons: dict[str, EvaluationLedger] = {}
    season_labels: dict[tuple[str, str], EvaluationLedger] = {}
    records: list[PredictionRecord] = []
    skipped = 0

    for x in source:
        try:
            model.validate(x)
            if not x.labels:
                raise SchemaError("instance has no labels")
            if not x.labels <= set(labels):
                raise SchemaError(f"labels {sorted(x.labels - set(labels))} outside the label universe")
        except SchemaError as exc:
            skipped += 1
            log.warning("skipping malformed instance #%d: %s", overall.n + skipped, exc)
            continue

        if model.trained:
            record = model._classify_and_learn(x)
        else:
            record = PredictionRecord.abstain(x.labels, x.season)
            model._learn(x)

        if overall.n % config.window == 0:
            windows.append(EvaluationLedger(labels))
        terms = overall.contribution(record)
        overall.accumulate(terms)
        windows[-1].accumulate(terms)
        if config.season_breakdown:
            key = _season_key(x.season)
            seasons.setdefault(key, EvaluationLedger(labels)).accumulate(terms)
            if config.label_breakdown:
                for label in x.labels:
                    season_labels.setdefault((key, label), EvaluationLedger(labels)).accumulate(terms)
        if keep_records:
            records.append(record)

    if overall.n == 0:
        raise ValueError("stream yielded no usable labelled instance")
    if skipped:
        log.warning("%d malformed instance(s) skipped", skipped)

    return RunReport(
        run_id=run_id,
        model_name=config.model_name,
        labels=labels,
        overall=MetricRow("all", overall),
        windows=[MetricRow(str(i), w) for i, w in enumerate(windows)],
        seasons=[MetricRow(k, seasons[k]) for k in sorted(seasons, key=_season_order)],
        season_labels=[(k, label, MetricRow(f"{k}/{label}", season_labels[(k, label)]))
                       for k, label in sorted(season_labels, key=lambda kl: (_season_order(kl[0]), kl[1]))],
        records=records,
        skipped=skipped,
    )


@dataclass
class Comparison:
    """Models by metrics, with the best value per metric flagged."""

    models: list[str]
    values: list[dict[str, float]]
    best: dict[str, list[int]]

    def render(self) -> str:
        width = max(len(m) for m in self.models + ["model"])
        lines = ["model".ljust(width) + "".join(f"{name:>10}" for name in METRICS)]
        for row, (model, vals) in enumerate(zip(self.models, self.values)):
            cells = []
            for name in METRICS:
                text = f"{vals[name]:.1f}" if name == "AP" else f"{vals[name]:.3f}"
                if row in self.best[name]:
                    text += "*"
                cells.append(f"{text:>10}")
            lines.append(model.ljust(width) + "".join(cells))
        return "\n".join(lines)


def compare_runs(*reports: RunReport) -> Comparison:
    """Align the overall rows of several runs; ties share the best flag."""
    if not reports:
        raise ValueError("nothing to compare")
    universe = reports[0].labels
    for report in reports[1:]:
        if report.labels != universe:
            raise ValueError(f"label universe of {report.model_name!r} differs from {reports[0].model_name!r}")
    return compare_values([r.model_name for r in reports], [r.overall.values() for r in reports])


def compare_values(models: Sequence[str], values: Sequence[dict[str, float]]) -> Comparison:
    if not models:
        raise ValueError("nothing to compare")
    best = {}
    for name in METRICS:
        column = [v[name] for v in values]
        target = max(column) if HIGHER_IS_BETTER[name] else min(column)
        best[name] = [i for i, v in enumerate(column) if v == target]
    return Comparison(list(models), list(values), best)
