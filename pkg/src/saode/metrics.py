"""Multi-label evaluation measures accumulated over prediction records.

AP counts exact label-set matches.  Jaccard (MLA) and F1 (MLFS) treat an
empty-versus-empty document as a perfect match.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .classifiers import PredictionRecord

METRICS = ("AP", "HL", "MLA", "MLFS", "RMSE")
# True where larger is better.
HIGHER_IS_BETTER = {"AP": True, "HL": False, "MLA": True, "MLFS": True, "RMSE": False}


class UndefinedMetricError(ValueError):
    pass


def _overlap(predicted: frozenset, truth: frozenset) -> tuple[float, float]:
    union = len(predicted | truth)
    if union == 0:
        return 1.0, 1.0
    inter = len(predicted & truth)
    return inter / union, 2 * inter / (len(predicted) + len(truth))


@dataclass
class EvaluationLedger:
    """Running sums for the five measures over a fixed label universe."""

    labels: tuple[str, ...]
    n: int = 0
    exact: int = 0
    hamming: float = 0.0
    jaccard: float = 0.0
    f1: float = 0.0
    squared_error: float = 0.0
    cells: int = 0

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if not self.labels:
            raise ValueError("label universe must be non-empty")

    def add(self, record: PredictionRecord) -> None:
        self.accumulate(self.contribution(record))

    def contribution(self, record: PredictionRecord) -> tuple[int, float, float, float, float]:
        """Per-record terms, so one record can feed several ledgers cheaply."""
        h, y = record.predicted, record.truth
        exact = int(not record.abstained and h == y)
        jac, f1 = _overlap(h, y)
        probs = record.label_probs
        se = 0.0
        for label in self.labels:
            d = probs.get(label, 0.0) - (label in y)
            se += d * d
        return exact, len(h ^ y) / len(self.labels), jac, f1, se

    def accumulate(self, terms: tuple[int, float, float, float, float]) -> None:
        exact, ham, jac, f1, se = terms
        self.n += 1
        self.exact += exact
        self.hamming += ham
        self.jaccard += jac
        self.f1 += f1
        self.squared_error += se
        self.cells += len(self.labels)

    def extend(self, records: Iterable[PredictionRecord]) -> "EvaluationLedger":
        for record in records:
            self.add(record)
        return self

    def merge(self, other: "EvaluationLedger") -> "EvaluationLedger":
        if self.labels != other.labels:
            raise ValueError("cannot merge ledgers over different label universes")
        return EvaluationLedger(
            self.labels,
            self.n + other.n,
            self.exact + other.exact,
            self.hamming + other.hamming,
            self.jaccard + other.jaccard,
            self.f1 + other.f1,
            self.squared_error + other.squared_error,
            self.cells + other.cells,
        )

    def _need_records(self) -> None:
        if self.n == 0:
            raise UndefinedMetricError("no records accumulated")

    def values(self) -> dict[str, float]:
        return {name: fn(self) for name, fn in zip(METRICS, (ap, hl, mla, mlfs, rmse))}


def ap(ledger: EvaluationLedger) -> float:
    """Percentage of exact label-set matches."""
    ledger._need_records()
    return 100.0 * ledger.exact / ledger.n


def hl(ledger: EvaluationLedger) -> float:
    ledger._need_records()
    return ledger.hamming / ledger.n


def mla(ledger: EvaluationLedger) -> float:
    ledger._need_records()
    return ledger.jaccard / ledger.n


def mlfs(ledger: EvaluationLedger) -> float:
    ledger._need_records()
    return ledger.f1 / ledger.n


def rmse(ledger: EvaluationLedger) -> float:
    ledger._need_records()
    return math.sqrt(ledger.squared_error / ledger.cells)


def batch_metrics(records: Sequence[PredictionRecord], labels: Sequence[str]) -> dict[str, float]:
    """Recompute all five measures from scratch with indicator matrices."""
    if not records:
        raise UndefinedMetricError("no records")
    labels = list(labels)
    col = {label: j for j, label in enumerate(labels)}
    H = np.zeros((len(records), len(labels)), dtype=bool)
    Y = np.zeros_like(H)
    lam = np.zeros(H.shape)
    for d, rec in enumerate(records):
        H[d, [col[l] for l in rec.predicted]] = True
        Y[d, [col[l] for l in rec.truth]] = True
        for label, p in rec.label_probs.items():
            lam[d, col[label]] = p
    abstained = np.array([r.abstained for r in records])
    exact = (H == Y).all(axis=1) & ~abstained
    inter = (H & Y).sum(axis=1)
    union = (H | Y).sum(axis=1)
    sizes = H.sum(axis=1) + Y.sum(axis=1)
    empty = union == 0
    jac = np.where(empty, 1.0, inter / np.where(empty, 1, union))
    f1 = np.where(empty, 1.0, 2 * inter / np.where(empty, 1, sizes))
    return {
        "AP": 100.0 * exact.mean(),
        "HL": (H ^ Y).sum(axis=1).mean() / len(labels),
        "MLA": jac.mean(),
        "MLFS": f1.mean(),
        "RMSE": float(np.sqrt(((lam - Y) ** 2).mean())),
    }
