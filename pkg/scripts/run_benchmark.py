#!/usr/bin/env python3
"""Run the convergence benchmark and write per-run marker counts as CSV.

    python scripts/run_benchmark.py --out results/convergence.csv
    python scripts/run_benchmark.py --p-symmetric 0.5 --designs 10
"""

import argparse
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

from abutfix.bench import benchmark_suite, run_design, summarize


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--designs", type=int, default=20)
    ap.add_argument("--seeds", type=int, default=5, help="fixer seeds per design")
    ap.add_argument("--max-iterations", type=int, default=10)
    ap.add_argument("--pattern-fraction", type=float, default=0.01)
    ap.add_argument("--p-symmetric", type=float, default=None,
                    help="override the share of mirror-symmetric masters")
    ap.add_argument("--mode", choices=("full", "boundaries"), default="full")
    ap.add_argument("--out", type=Path, default=None, help="CSV of per-run counts")
    args = ap.parse_args(argv)

    configs = benchmark_suite(args.designs, args.pattern_fraction)
    if args.p_symmetric is not None:
        configs = [dataclasses.replace(c, p_symmetric=args.p_symmetric) for c in configs]

    t0 = time.perf_counter()
    results = []
    for idx, cfg in enumerate(configs):
        runs = run_design(idx, cfg, range(args.seeds), args.max_iterations, args.mode)
        results.extend(runs)
        print(f"design {idx:2d}  cells {cfg.n_cells:6d}  util {cfg.utilization:.4f}  "
              f"patterns {runs[0].n_patterns:3d}  counts "
              + " | ".join(" ".join(map(str, r.counts)) for r in runs), flush=True)
    elapsed = time.perf_counter() - t0

    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        width = args.max_iterations + 1
        with args.out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["design", "n_cells", "utilization", "n_patterns", "fix_seed", "status"]
                       + [f"iter_{i}" for i in range(width)])
            for r in results:
                padded = [r.remaining_after(i) for i in range(width)]
                w.writerow([r.design, r.n_cells, r.utilization, r.n_patterns, r.fix_seed,
                            r.status] + padded)

    summary = summarize(results, within=4)
    summary["seconds"] = round(elapsed, 1)
    print(json.dumps(summary, indent=2))
    return 0 if summary["all_clean"] else 2


if __name__ == "__main__":
    sys.exit(main())
