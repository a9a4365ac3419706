#!/usr/bin/env python3
"""Desk-scale accuracy grid: run the optimizer over function-by-distribution
cases and report simulated confidence, model fit, sizes, and wall time.

Writes one JSON object per case.  Flagged cases are the ones where bootstrap
error estimation has no consistency guarantee (max-style quantile proxies,
pareto tails with shape <= 2); the report keeps them so the failure behavior
stays visible.
"""

import argparse
import json

from sampleopt import AnalyticalFunction as F
from sampleopt import GeneratorSpec, GridCase, Predicate, SearchConfig, run_grid

DISTS = {
    "normal": ("normal", (1.0, 1.0)),
    "uniform": ("uniform", (0.0, 1.0)),
    "exponential": ("exponential", (1.0,)),
    "pareto1": ("pareto", (1.0,)),
    "pareto2": ("pareto", (2.0,)),
    "pareto3": ("pareto", (3.0,)),
}

PREDICATE_CUT = {"normal": 2.28, "uniform": 0.9, "exponential": 2.3,
                 "pareto1": 10.0, "pareto2": 3.16, "pareto3": 2.15}


def build_cases(rows, dists, seed):
    cases = []
    for i, name in enumerate(dists):
        dist, params = DISTS[name]
        spec = GeneratorSpec(dist, params, rows_per_group=rows, seed=seed + i)
        cut = PREDICATE_CUT[name]
        fns = [
            ("avg", F.avg(), 0.01),
            ("var", F.var(), 0.01),
            ("median", F.median(), 0.01),
            ("proportion", F.proportion(Predicate("value", ">", cut)), 0.05),
            ("max", F.max_approx(1e-9), 0.01),
        ]
        for fn_name, fn, eps_rel in fns:
            cases.append(GridCase(f"{fn_name}-{name}", fn, (spec,), eps_rel=eps_rel))
    return cases


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=1_000_000)
    ap.add_argument("--dists", nargs="+", default=["normal", "uniform"], choices=sorted(DISTS))
    ap.add_argument("--alg-reps", type=int, default=1)
    ap.add_argument("--conf-reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="accuracy_grid.json")
    args = ap.parse_args()

    cases = build_cases(args.rows, args.dists, args.seed)
    reports = run_grid(
        cases, alg_reps=args.alg_reps, conf_reps=args.conf_reps,
        config=SearchConfig(), seed=args.seed,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(json.dumps(rep.to_dict()) + "\n")
            flag = " [no consistency guarantee]" if rep.flagged_inconsistent else ""
            conf = "-" if rep.confidence is None else f"{rep.confidence:.3f}"
            r2 = "-" if rep.r2 is None else f"{rep.r2:.3f}"
            size = "-" if rep.size_mean is None else f"{rep.size_mean:.0f}"
            print(f"{rep.case:24s} c={conf:6s} r2={r2:6s} size={size:9s} "
                  f"statuses={rep.status_counts}{flag}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
