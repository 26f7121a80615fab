"""Benchmark the built-in NSGA-II across continuous benchmark families.

Prints a median/best/worst final-IGD table over several seeds, the same
numbers the acceptance anchors bound.
"""

import argparse
import time

import numpy as np

from opevo import baseline as B
from opevo import problems as P


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--families", nargs="+", default=["zdt1", "zdt3", "zdt6", "dtlz2"])
    ap.add_argument("--n-var", type=int, default=50)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--population", type=int, default=100)
    ap.add_argument("--generations", type=int, default=200)
    args = ap.parse_args()

    cfg = B.SolverConfig(population_size=args.population, generations=args.generations)
    print(f"{'family':<10} {'median IGD':>12} {'best':>12} {'worst':>12} {'time':>8}")
    for family in args.families:
        inst = P.make_cmop(family, n_var=args.n_var)
        start = time.time()
        finals = np.asarray(
            [B.nsga2_run(inst, cfg, np.random.default_rng(s))[1][-1] for s in range(args.seeds)]
        )
        print(
            f"{family:<10} {np.median(finals):>12.4e} {finals.min():>12.4e} "
            f"{finals.max():>12.4e} {time.time() - start:>7.1f}s"
        )


if __name__ == "__main__":
    main()
