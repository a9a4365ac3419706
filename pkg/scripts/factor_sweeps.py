#!/usr/bin/env python3
"""Factor sweeps: vary the relative bound, the error probability, the group
count, or the population size, and record total sample size, wall time, and
simulated confidence for the optimizer, the normality-assuming baseline, and
(for multi-group data) the order-preserving variant.  One CSV per factor."""

import argparse

from sampleopt import AnalyticalFunction as F
from sampleopt import GeneratorSpec, SearchConfig, SweepSpec, run_sweep
from sampleopt.harness import write_sweep_csv

DEFAULT_SWEEPS = {
    "eps_rel": (0.01, 0.005, 0.002),
    "delta": (0.1, 0.05, 0.01, 0.005),
    "groups": (1, 2, 4),
    "rows": (100_000, 1_000_000, 10_000_000),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--factors", nargs="+", default=list(DEFAULT_SWEEPS), choices=list(DEFAULT_SWEEPS))
    ap.add_argument("--rows", type=int, default=1_000_000)
    ap.add_argument("--groups", type=int, default=1)
    ap.add_argument("--bias", type=float, default=0.05, help="group offset ladder for multi-group data")
    ap.add_argument("--alg-reps", type=int, default=3)
    ap.add_argument("--conf-reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--prefix", default="sweep")
    args = ap.parse_args()

    for factor in args.factors:
        groups = args.groups if factor != "groups" else max(args.groups, 1)
        base = GeneratorSpec(
            "normal", (1.0, 1.0), rows_per_group=args.rows,
            num_groups=groups, group_bias=args.bias if groups > 1 else 0.0,
            seed=args.seed,
        )
        algorithms = ("optimizer", "clt") if groups < 2 else ("optimizer", "clt", "ordering")
        spec = SweepSpec(
            factor=factor,
            values=DEFAULT_SWEEPS[factor],
            base=base,
            fn=F.avg(),
            alg_reps=args.alg_reps,
            conf_reps=args.conf_reps,
            config=SearchConfig(),
            algorithms=algorithms,
            seed=args.seed,
        )
        rows = run_sweep(spec)
        path = f"{args.prefix}_{factor}.csv"
        write_sweep_csv(rows, path)
        print(f"{factor}: {len(rows)} rows -> {path}")


if __name__ == "__main__":
    main()
