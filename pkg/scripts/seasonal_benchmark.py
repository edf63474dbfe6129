"""Prequential comparison of SAODE against the AODE and NB variants on
synthetic seasonal streams.

    python scripts/seasonal_benchmark.py --seeds 5 --n-instances 50000 --out bench.csv
"""

import argparse
import csv
import statistics
import time

from saode.metrics import METRICS
from saode.prequential import RunConfig, compare_values, run_prequential
from saode.synth import generate, random_spec

CONFIGS = {
    "saode": RunConfig("saode"),
    "aode+season": RunConfig("aode", season_feature=True),
    "aode-per-season": RunConfig("aode", per_season=True),
    "aode": RunConfig("aode"),
    "nb+season": RunConfig("nb", season_feature=True),
    "nb": RunConfig("nb"),
}


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--n-instances", type=int, default=50_000)
    p.add_argument("--n-attributes", type=int, default=20)
    p.add_argument("--n-classes", type=int, default=4)
    p.add_argument("--n-seasons", type=int, default=7)
    p.add_argument("--rate-drift", type=float, default=0.3)
    p.add_argument("--prior-concentration", type=float, default=1.0)
    p.add_argument("--coupling", type=float, default=0.0)
    p.add_argument("--models", nargs="+", choices=sorted(CONFIGS), default=list(CONFIGS))
    p.add_argument("--out", help="per-seed CSV")
    args = p.parse_args()

    rows = []
    per_model = {m: [] for m in args.models}
    for seed in range(args.seeds):
        spec = random_spec(args.n_attributes, args.n_classes, args.n_seasons, args.n_instances, seed,
                           prior_concentration=args.prior_concentration, rate_drift=args.rate_drift,
                           coupling=args.coupling)
        for name in args.models:
            start = time.perf_counter()
            report = run_prequential(generate(spec), spec.schema, CONFIGS[name], labels=spec.labels,
                                     keep_records=False)
            vals = report.overall.values()
            season_mla = report.season_mla().values()
            spread = max(season_mla) - min(season_mla)
            elapsed = time.perf_counter() - start
            per_model[name].append(vals)
            rows.append([seed, name, *(vals[m] for m in METRICS), spread, elapsed])
            print(f"seed {seed} {name:16s} MLA={vals['MLA']:.4f} season spread={spread:.4f} ({elapsed:.1f} s)")

    medians = [{m: statistics.median(v[m] for v in per_model[name]) for m in METRICS} for name in args.models]
    print()
    print(f"median over {args.seeds} seed(s)")
    print(compare_values(args.models, medians).render())

    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "model", *METRICS, "season_mla_spread", "seconds"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
