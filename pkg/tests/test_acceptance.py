"""Acceptance suite.  Each test carries a ``criterion`` marker and the run
ends with one PASS/FAIL line per criterion (see conftest.py)."""

import math
import random
import statistics
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from oracles import (
    aode_linear,
    dense_recount,
    argmax_lowest,
    densify,
    label_sets,
    log_or_neg_inf,
    random_instance,
    random_stream,
    saode_linear,
    saode_unfactored,
)
from saode.classifiers import PredictionRecord, build_model, log_prior, tie_argmax
from saode.counts import AttributeSchema, Instance, make_store
from saode.metrics import EvaluationLedger, batch_metrics
from saode.prequential import RunConfig, run_prequential
from saode.synth import generate, random_spec


def _first_seen(ys):
    order = {}
    for y in ys:
        order.setdefault(y, len(order))
    return [order[y] for y in ys], len(order)


def _store_matches_dense(store, d):
    n, T, k = d.n, d.T, d.k
    assert store.count == d.count
    for y in range(k):
        assert store.class_count(y) == d.c[y]
        for t in range(T):
            assert store.class_season_count(y, t) == d.ct[y][t]
        for i in range(n):
            assert store.class_known_count(y, i) == d.nbk[y][i]
            for v in range(d.cards[i]):
                assert store.class_value_count(y, i, v) == d.nb[y][i][v]
    for t in range(T):
        assert store.season_count(t) == d.t[t]
    for i in range(n):
        assert store.attribute_count(i) == d.a[i]
        for v in range(d.cards[i]):
            assert store.value_count(i, v) == d.av[i][v]
    for key, expected in d.f.items():
        assert store.joint_count(*key) == expected, key


@pytest.mark.criterion("count oracle: 200 random streams, both backends, exact, < 10 s")
def test_count_oracle():
    rng = random.Random(20240601)
    start = time.perf_counter()
    checked = 0
    for s in range(200):
        binary = s % 2 == 0
        schema, xs, ys, k = random_stream(rng, binary)
        d = dense_recount(xs, ys, schema.cardinalities, schema.n_seasons, k, binary=binary)
        if binary:
            store = make_store(schema, backend="binary")
            for x, y in zip(xs, ys):
                store.update(x, y)
            _store_matches_dense(store, d)
            general = make_store(schema, backend="general")
            for x, y in zip(xs, ys):
                general.update(densify(x, schema.n), y)
            _store_matches_dense(general, d)
            checked += 2
        else:
            store = make_store(schema, backend="general")
            for x, y in zip(xs, ys):
                store.update(x, y)
            _store_matches_dense(store, d)
            checked += 1
    elapsed = time.perf_counter() - start
    assert checked == 300
    assert elapsed < 10.0, f"count oracle took {elapsed:.1f} s"


def _decision_fixtures(seed, n_streams, queries_per_stream):
    """Yield (schema, instances, catalog classes, query, m, alpha, dense, dense_T1, binary)."""
    rng = random.Random(seed)
    for s in range(n_streams):
        schema, xs, ys, _ = random_stream(rng, binary=s % 2 == 0)
        # an all-binary schema gets the binary backend, where absent means 0
        binary = schema.is_binary
        ys, k = _first_seen(ys)
        sets = label_sets(k)
        xs = [Instance(x.values, x.season, sets[y]) for x, y in zip(xs, ys)]
        m = rng.choice([0, 1, 1, 2, 5])
        alpha = rng.choice([1.0, 1.0, 0.5])
        d = dense_recount(xs, ys, schema.cardinalities, schema.n_seasons, k, binary=binary)
        flat = [Instance(x.values, 0, x.labels) for x in xs]
        d1 = dense_recount(flat, ys, schema.cardinalities, 1, k, binary=binary)
        queries = [random_instance(rng, schema.cardinalities, schema.n_seasons, binary)
                   for _ in range(queries_per_stream)]
        yield schema, xs, m, alpha, d, d1, queries, binary


def _trained(kind, schema, xs, m, alpha):
    from saode.classifiers import ModelConfig
    model = build_model(kind, schema, ModelConfig(m=m, alpha=alpha))
    for x in xs:
        model.train(x)
    return model


def _vals(x, n, binary):
    default = 0 if binary else None
    return [x.values.get(i, default) for i in range(n)]


@pytest.mark.criterion("decision rule: 1000 (stream, query) pairs, argmax exact, log-scores 1e-9, < 30 s")
def test_decision_rule_oracle():
    start = time.perf_counter()
    pairs = 0
    worst = 0.0
    for schema, xs, m, alpha, d, d1, queries, binary in _decision_fixtures(7, 100, 10):
        saode = _trained("saode", schema, xs, m, alpha)
        aode = _trained("aode", schema, xs, m, alpha)
        for q in queries:
            vals = _vals(q, schema.n, binary)
            expected, fb = saode_linear(d, vals, q.season, m, alpha)
            sp = saode.score(q)
            assert sp.fallback_used == fb
            assert sp.best == argmax_lowest(expected)
            diff = np.abs(sp.log_scores - log_or_neg_inf(expected)).max()
            worst = max(worst, diff)
            assert diff < 1e-9

            expected, fb = aode_linear(d1, vals, m, alpha)
            sp = aode.score(q)
            assert sp.fallback_used == fb
            assert sp.best == argmax_lowest(expected)
            diff = np.abs(sp.log_scores - log_or_neg_inf(expected)).max()
            worst = max(worst, diff)
            assert diff < 1e-9
            pairs += 1
    elapsed = time.perf_counter() - start
    assert pairs == 1000
    assert elapsed < 30.0, f"decision-rule oracle took {elapsed:.1f} s"


@pytest.mark.criterion("factored and unfactored forms agree (< 1e-10 in log space); argmax scale-invariant")
def test_factoring_and_scale_invariance():
    compared = 0
    for schema, xs, m, alpha, d, _, queries, binary in _decision_fixtures(11, 60, 8):
        saode = _trained("saode", schema, xs, m, alpha)
        for q in queries:
            vals = _vals(q, schema.n, binary)
            factored, fb = saode_linear(d, vals, q.season, m, alpha)
            if fb:
                continue
            literal = saode_unfactored(d, vals, q.season, m, alpha)
            sp = saode.score(q)
            assert np.abs(log_or_neg_inf(literal) - log_or_neg_inf(factored)).max() < 1e-10
            assert np.abs(sp.log_scores - log_or_neg_inf(literal)).max() < 1e-10
            for c in (1e-6, 0.37, 1.0, 8.0, 1e6):
                assert argmax_lowest([c * v for v in factored]) == argmax_lowest(factored)
                assert tie_argmax(sp.log_scores + math.log(c)) == sp.best
            # dropping the 1/p_count denominator is one such positive scaling
            ps = [i for i in range(d.n) if vals[i] is not None and d.av[i][vals[i]] >= m]
            assert tie_argmax(sp.log_scores + math.log(len(ps))) == sp.best
            compared += 1
    assert compared >= 300


@pytest.mark.criterion("single season: SAODE argmax equals AODE argmax on a 2000-instance fixture")
@pytest.mark.xfail(strict=True, reason="with T=1 the SAODE rule keeps an extra P(y) factor that AODE lacks; "
                                       "see test_single_season_identity")
def test_single_season_collapse():
    spec = random_spec(n=8, k=3, n_seasons=1, n_instances=2000, seed=0)
    xs = list(generate(spec))
    saode = build_model("saode", spec.schema)
    aode = build_model("aode", spec.schema)
    saode.train_many(xs)
    aode.train_many(xs)
    disagree = sum(saode.score(x).best != aode.score(x).best for x in xs)
    assert disagree == 0, f"argmax differs on {disagree} of {len(xs)} instances"


@pytest.mark.criterion("fallback: missing season and oversized m give fallback_used and exact NB scores")
def test_fallback_equals_nb():
    from saode.classifiers import ModelConfig
    rng = random.Random(5)
    cases = 0
    for s in range(40):
        schema, xs, ys, _ = random_stream(rng, binary=s % 2 == 0)
        binary = schema.is_binary
        ys, k = _first_seen(ys)
        sets = label_sets(k)
        xs = [Instance(x.values, x.season, sets[y]) for x, y in zip(xs, ys)]
        big_m = len(xs) + 1
        for m in (1, big_m):
            saode = build_model("saode", schema, ModelConfig(m=m))
            nb = build_model("nb", schema, ModelConfig(m=m))
            saode.train_many(xs)
            nb.train_many(xs)
            for _ in range(10):
                q = random_instance(rng, schema.cardinalities, schema.n_seasons, binary)
                if m == 1:
                    q = Instance(q.values, None)
                sp = saode.score(q)
                assert sp.fallback_used
                assert np.array_equal(sp.log_scores, nb.score(q).log_scores)
                cases += 1
            aode = build_model("aode", schema, ModelConfig(m=big_m))
            aode.train_many(xs)
            q = random_instance(rng, schema.cardinalities, schema.n_seasons, binary)
            sp = aode.score(q)
            assert sp.fallback_used
            assert np.array_equal(sp.log_scores, nb.score(q).log_scores)
    assert cases == 800


@pytest.mark.criterion("incremental training is byte-identical to batch training")
def test_incremental_equals_batch():
    rng = random.Random(3)
    for s in range(30):
        binary = s % 2 == 0
        schema, xs, ys, _ = random_stream(rng, binary)
        sets = label_sets(4)
        xs = [Instance(x.values, x.season, sets[y]) for x, y in zip(xs, ys)]
        variants = [("nb", {}), ("aode", {}), ("saode", {}), ("aode", {"season_feature": True}),
                    ("nb", {"per_season": True})]
        for kind, flags in variants:
            one = build_model(kind, schema, **flags)
            for x in xs:
                one.train(x)
            many = build_model(kind, schema, **flags)
            many.train_many(xs)
            assert one.to_bytes() == many.to_bytes(), (kind, flags)


def _metric_fixture():
    labels = ("A", "B", "C")
    fs = frozenset
    records = [
        PredictionRecord(fs("A"), fs("A"), {"A": 1.0}),
        PredictionRecord(fs("AB"), fs("A"), {"A": 0.9, "B": 0.6}),
        PredictionRecord(fs("C"), fs("AB"), {"A": 0.2, "B": 0.1, "C": 0.8}),
        PredictionRecord(fs("BC"), fs("BC"), {"A": 0.3, "B": 0.7, "C": 0.5}),
        PredictionRecord.abstain(fs("B")),
        PredictionRecord(fs("AC"), fs("ABC"), {"A": 1.0, "B": 0.4, "C": 0.6}),
    ]
    # hand-derived per record: exact, |sym diff|, jaccard, f1, squared error
    exact = 2
    hl = Fraction(0 + 1 + 3 + 0 + 1 + 1, 3 * 6)
    mla = (1 + Fraction(1, 2) + 0 + 1 + 0 + Fraction(2, 3)) / 6
    mlfs = (1 + Fraction(2, 3) + 0 + 1 + 0 + Fraction(4, 5)) / 6
    se = Fraction(0) + Fraction(37, 100) + Fraction(209, 100) + Fraction(43, 100) + 1 + Fraction(52, 100)
    expected = {
        "AP": 100 * exact / 6,
        "HL": float(hl),
        "MLA": float(mla),
        "MLFS": float(mlfs),
        "RMSE": math.sqrt(se / 18),
    }
    return labels, records, expected


@pytest.mark.criterion("metric fixtures: six records match hand values to 1e-12; streaming equals batch")
def test_metric_fixture():
    labels, records, expected = _metric_fixture()
    ledger = EvaluationLedger(labels).extend(records)
    got = ledger.values()
    batch = batch_metrics(records, labels)
    for name, value in expected.items():
        assert abs(got[name] - value) < 1e-12, name
        assert abs(batch[name] - got[name]) < 1e-12, name


SEEDS = range(5)


@pytest.fixture(scope="module")
def seasonal_runs():
    """Median-of-five synthetic experiment shared by the two seasonal criteria."""
    start = time.perf_counter()
    configs = {
        "saode": RunConfig("saode"),
        "aode+season": RunConfig("aode", season_feature=True),
        "aode": RunConfig("aode"),
    }
    mla = {name: [] for name in configs}
    spread = {name: [] for name in configs}
    for seed in SEEDS:
        spec = random_spec(n=20, k=4, n_seasons=7, n_instances=50_000, seed=seed,
                           prior_concentration=1.0, rate_drift=0.3)
        for name, cfg in configs.items():
            report = run_prequential(generate(spec), spec.schema, cfg, labels=spec.labels,
                                     keep_records=False)
            mla[name].append(report.overall.values()["MLA"])
            by_season = report.season_mla().values()
            spread[name].append(min(by_season) - max(by_season))
    return mla, spread, time.perf_counter() - start


@pytest.mark.criterion("seasonal ordering: median MLA(SAODE) >= AODE+season - 0.005 and >= AODE + 0.01, < 2 min")
def test_seasonal_ordering(seasonal_runs):
    mla, _, elapsed = seasonal_runs
    med = {name: statistics.median(v) for name, v in mla.items()}
    assert med["saode"] >= med["aode+season"] - 0.005, med
    assert med["saode"] >= med["aode"] + 0.01, med
    assert elapsed < 120.0, f"seasonal experiment took {elapsed:.1f} s"


@pytest.mark.criterion("per-season robustness: SAODE worst-minus-best season MLA no worse than AODE+season")
def test_per_season_robustness(seasonal_runs):
    _, spread, _ = seasonal_runs
    assert statistics.median(spread["saode"]) >= statistics.median(spread["aode+season"]), spread


@pytest.mark.criterion("sparsity: binary update cost is s^2 increments, independent of n")
def test_sparsity_counters():
    s = 50
    per_n = {}
    for n in (100, 1000, 2000):
        store = make_store(AttributeSchema.binary(n, 7), backend="binary")
        rng = random.Random(n)
        for step in range(20):
            present = rng.sample(range(n), s)
            before = store.pair_increments
            store.update(Instance.binary(present, step % 7), step % 3)
            assert store.pair_increments - before == s * s
        per_n[n] = store.pair_increments
    assert len(set(per_n.values())) == 1
    # and quadratic in s at fixed n
    store = make_store(AttributeSchema.binary(2000, 7), backend="binary")
    for size in (5, 10, 20, 40):
        before = store.pair_increments
        store.update(Instance.binary(range(size), 0), 0)
        assert store.pair_increments - before == size * size


@pytest.mark.criterion("CLI determinism: repeated runs give byte-identical report CSVs")
def test_cli_determinism(tmp_path):
    spec = tmp_path / "g.toml"
    spec.write_text("n_attributes = 12\nn_classes = 4\nn_seasons = 7\nn_instances = 1500\nseed = 4\n")

    def cli(*args):
        done = subprocess.run([sys.executable, "-m", "saode", *map(str, args)],
                              capture_output=True, text=True)
        assert done.returncode == 0, done.stderr

    outputs = []
    for rep in range(2):
        stream = tmp_path / f"s{rep}.tsv"
        cli("generate", "--spec", spec, "--out", stream, "--seed", 9)
        report = tmp_path / f"r{rep}"
        cli("run", "--model", "saode", "--input", stream, "--out", report, "--window", 250, "--svg")
        outputs.append(report)
    assert (tmp_path / "s0.tsv").read_bytes() == (tmp_path / "s1.tsv").read_bytes()
    names = sorted(p.name for p in outputs[0].glob("*.csv"))
    assert names == ["overall.csv", "season_labels.csv", "seasons.csv", "windows.csv"]
    for name in names + ["season_mla.svg"]:
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes(), name


def test_single_season_identity():
    """What does hold with T = 1: the SAODE score is the AODE score plus log P(y)."""
    spec = random_spec(n=8, k=3, n_seasons=1, n_instances=2000, seed=0)
    xs = list(generate(spec))
    saode = build_model("saode", spec.schema)
    aode = build_model("aode", spec.schema)
    saode.train_many(xs)
    aode.train_many(xs)
    prior = log_prior(saode.store, len(saode.catalog), 1.0)
    for x in xs[:500]:
        diff = saode.score(x).log_scores - aode.score(x).log_scores
        assert np.allclose(diff, prior, atol=1e-9)
