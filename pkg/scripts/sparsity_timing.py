"""Binary-store update cost as the vocabulary grows with document length fixed.

The pair counters touched per update depend only on the number of present
words, so the increment column stays flat across n.  Wall time still rises
somewhat with n because larger pair slabs miss cache more often.
"""

import argparse
import time

import numpy as np

from saode.counts import AttributeSchema, Instance, make_store


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--present", type=int, default=50)
    p.add_argument("--updates", type=int, default=5000)
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 2000, 5000])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'n':>6} {'us/update':>10} {'pair incr/update':>17}")
    for n in args.sizes:
        store = make_store(AttributeSchema.binary(n, 7))
        xs = [Instance.binary(sorted(rng.choice(n, args.present, replace=False).tolist()), i % 7)
              for i in range(args.updates)]
        store.update(xs[0], 0)  # compile
        start = time.perf_counter()
        for i, x in enumerate(xs[1:], 1):
            store.update(x, i % 4)
        per = (time.perf_counter() - start) / (len(xs) - 1) * 1e6
        print(f"{n:>6} {per:>10.1f} {store.pair_increments / store.count:>17.0f}")


if __name__ == "__main__":
    main()
