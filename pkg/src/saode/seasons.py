"""Seasonal cycles: how a calendar date maps to a season value."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

KINDS = ("dow", "month", "weekend", "column")
_FIXED = {"dow": 7, "month": 12, "weekend": 2}


@dataclass(frozen=True)
class SeasonSpec:
    """A seasonal cycle.

    ``dow``: Monday=0 ... Sunday=6.  ``month``: January=0 ... December=11.
    ``weekend``: weekday=0, Saturday/Sunday=1.  ``column``: the season value is
    supplied directly and ``cardinality`` must be given.
    """

    kind: str = "dow"
    cardinality: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown season kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "column":
            if self.cardinality is None or self.cardinality < 1:
                raise ValueError("column seasons need a cardinality >= 1")
        elif self.cardinality not in (None, _FIXED[self.kind]):
            raise ValueError(f"{self.kind} seasons have cardinality {_FIXED[self.kind]}")

    @property
    def n_seasons(self) -> int:
        return self.cardinality if self.kind == "column" else _FIXED[self.kind]

    def of_date(self, date: dt.date) -> int:
        if self.kind == "dow":
            return date.weekday()
        if self.kind == "month":
            return date.month - 1
        if self.kind == "weekend":
            return int(date.weekday() >= 5)
        raise ValueError("column seasons are not derived from dates")

    def parse(self, date: str) -> int:
        """Season of an ISO-8601 date string; raises ValueError if unparseable."""
        return self.of_date(dt.date.fromisoformat(date[:10]))

    def check(self, value: int) -> int:
        if not (0 <= value < self.n_seasons):
            raise ValueError(f"season {value} outside [0, {self.n_seasons})")
        return value
