"""Synthetic binary streams with periodic (seasonal) concept drift.

Instance ``i`` belongs to season ``i mod T``.  Its class is drawn from
``priors[t]`` and each attribute from an independent Bernoulli with rate
``rates[y, t, i]``.  With ``coupling > 0`` every odd attribute copies its even
neighbour with that probability, which gives one-dependence structure.

Randomness comes from a counter-based Philox stream where every instance
consumes a fixed number of draws, so any index range can be generated on its
own and matches the same slice of the full stream.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .counts import AttributeSchema, Instance

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


def default_label_sets(k: int) -> tuple[frozenset[str], ...]:
    """The first ``k`` non-empty subsets of l0, l1, ... ordered by size then name."""
    width = max(1, math.ceil(math.log2(k + 1)))
    names = [f"l{i}" for i in range(width)]
    subsets = [frozenset(c) for r in range(1, width + 1) for c in itertools.combinations(names, r)]
    return tuple(subsets[:k])


@dataclass(frozen=True)
class GeneratorSpec:
    priors: np.ndarray                 # (T, k), rows sum to 1
    rates: np.ndarray                  # (k, T, n)
    n_instances: int
    seed: int = 0
    coupling: float = 0.0
    label_sets: tuple[frozenset[str], ...] = field(default=())

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64)
        rates = np.asarray(self.rates, dtype=np.float64)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "rates", rates)
        if priors.ndim != 2 or rates.ndim != 3:
            raise ValueError("priors must be (T, k) and rates (k, T, n)")
        T, k = priors.shape
        if rates.shape[:2] != (k, T):
            raise ValueError(f"rates shape {rates.shape} does not match priors (T={T}, k={k})")
        if ((priors < 0) | (priors > 1)).any() or ((rates < 0) | (rates > 1)).any():
            raise ValueError("priors and rates must lie in [0, 1]")
        if not np.allclose(priors.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("class priors must sum to 1 in every season")
        if self.n_instances < 0:
            raise ValueError("n_instances must be >= 0")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling must lie in [0, 1]")
        sets = tuple(frozenset(s) for s in self.label_sets) or default_label_sets(k)
        if len(sets) != k or len(set(sets)) != k or not all(sets):
            raise ValueError(f"need {k} distinct non-empty label sets")
        object.__setattr__(self, "label_sets", sets)

    @property
    def n(self) -> int:
        return self.rates.shape[2]

    @property
    def k(self) -> int:
        return self.priors.shape[1]

    @property
    def n_seasons(self) -> int:
        return self.priors.shape[0]

    @property
    def schema(self) -> AttributeSchema:
        return AttributeSchema.binary(self.n, self.n_seasons)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(set().union(*self.label_sets)))

    def _draws_per_instance(self) -> int:
        used = 1 + self.n + (self.n // 2 if self.coupling > 0 else 0)
        return 4 * math.ceil(used / 4)


def random_spec(n: int = 20, k: int = 4, n_seasons: int = 7, n_instances: int = 10_000,
                seed: int = 0, prior_concentration: float = 1.0, rate_drift: float = 0.3,
                rate_range: tuple[float, float] = (0.05, 0.95), coupling: float = 0.0,
                seasonal: bool = True) -> GeneratorSpec:
    """Draw generator parameters.

    Every season gets its own class prior from a symmetric Dirichlet with
    ``prior_concentration``.  Each (class, season, attribute) rate keeps the
    class's base rate, except that with probability ``rate_drift`` it is
    redrawn for that season.  ``seasonal=False`` shares one prior and one rate
    table across seasons.
    """
    rng = np.random.default_rng([seed, 0x5EA5])
    lo, hi = rate_range
    base = rng.uniform(lo, hi, size=(k, n))
    if seasonal:
        priors = rng.dirichlet(np.full(k, prior_concentration), size=n_seasons)
        redraw = rng.random((k, n_seasons, n)) < rate_drift
        fresh = rng.uniform(lo, hi, size=(k, n_seasons, n))
        rates = np.where(redraw, fresh, base[:, None, :])
    else:
        priors = np.tile(rng.dirichlet(np.full(k, prior_concentration)), (n_seasons, 1))
        rates = np.repeat(base[:, None, :], n_seasons, axis=1)
    return GeneratorSpec(priors, rates, n_instances, seed, coupling)


def generate_arrays(spec: GeneratorSpec, start: int = 0, stop: int | None = None
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seasons (m,), classes (m,) and a presence matrix (m, n) for instances [start, stop)."""
    stop = spec.n_instances if stop is None else min(stop, spec.n_instances)
    if start < 0 or start > stop:
        raise ValueError(f"bad instance range [{start}, {stop})")
    width = spec._draws_per_instance()
    bitgen = np.random.Philox(key=spec.seed)
    bitgen.advance(start * width // 4)
    u = np.random.Generator(bitgen).random((stop - start, width))
    seasons = np.arange(start, stop) % spec.n_seasons
    cdf = np.cumsum(spec.priors, axis=1)[seasons]
    classes = np.minimum((u[:, :1] >= cdf).sum(axis=1), spec.k - 1)
    n = spec.n
    p = spec.rates[classes, seasons]
    x = u[:, 1:n + 1] < p
    if spec.coupling > 0:
        copy = u[:, n + 1:n + 1 + n // 2] < spec.coupling
        odd = np.arange(1, 2 * (n // 2), 2)
        x[:, odd] = np.where(copy, x[:, odd - 1], x[:, odd])
    return seasons, classes, x


def generate(spec: GeneratorSpec, start: int = 0, stop: int | None = None,
             chunk: int = 4096) -> Iterator[Instance]:
    """Yield instances ``start`` ... ``stop - 1`` of the stream."""
    stop = spec.n_instances if stop is None else min(stop, spec.n_instances)
    for lo in range(start, stop, chunk):
        seasons, classes, x = generate_arrays(spec, lo, min(lo + chunk, stop))
        for t, y, row in zip(seasons, classes, x):
            yield Instance.binary(np.flatnonzero(row).tolist(), int(t), spec.label_sets[y])


def bayes_optimal_score(spec: GeneratorSpec, x: Instance) -> np.ndarray:
    """Exact posterior over the spec's classes (uniform mixture over seasons if unknown)."""
    seasons = range(spec.n_seasons) if x.season is None else [x.season]
    z = np.zeros(spec.n, dtype=bool)
    z[[i for i, v in x.values.items() if v]] = True
    joint = np.zeros(spec.k)
    for t in seasons:
        p = spec.rates[:, t, :]
        lik = np.where(z, p, 1 - p)
        if spec.coupling > 0:
            c = spec.coupling
            odd = np.arange(1, 2 * (spec.n // 2), 2)
            same = z[odd] == z[odd - 1]
            lik[:, odd] = c * same + (1 - c) * lik[:, odd]
        joint += spec.priors[t] * lik.prod(axis=1)
    total = joint.sum()
    if total == 0:
        return np.full(spec.k, 1.0 / spec.k)
    return joint / total


def load_spec(path: str | Path) -> GeneratorSpec:
    """Read a generator spec from TOML (see docs/generator.md)."""
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    return spec_from_dict(cfg)


def spec_from_dict(cfg: dict) -> GeneratorSpec:
    known = {"n_attributes", "n_classes", "n_seasons", "n_instances", "seed", "coupling",
             "priors", "rates", "label_sets", "random"}
    unknown = set(cfg) - known
    if unknown:
        raise ValueError(f"unknown generator keys: {sorted(unknown)}")
    seed = int(cfg.get("seed", 0))
    n_instances = int(cfg.get("n_instances", 10_000))
    coupling = float(cfg.get("coupling", 0.0))
    label_sets = tuple(frozenset(s) for s in cfg.get("label_sets", ()))
    if "priors" in cfg or "rates" in cfg:
        return GeneratorSpec(np.array(cfg["priors"]), np.array(cfg["rates"]),
                             n_instances, seed, coupling, label_sets)
    params = dict(cfg.get("random", {}))
    if "rate_range" in params:
        params["rate_range"] = tuple(params["rate_range"])
    spec = random_spec(int(cfg.get("n_attributes", 20)), int(cfg.get("n_classes", 4)),
                       int(cfg.get("n_seasons", 7)), n_instances, seed, coupling=coupling, **params)
    if label_sets:
        spec = GeneratorSpec(spec.priors, spec.rates, n_instances, seed, coupling, label_sets)
    return spec
