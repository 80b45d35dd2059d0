"""Desk-scale convergence benchmark: a fixed suite of synthetic designs,
each repaired under several fixer seeds."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .autofix import FixConfig, fix_loop
from .placement import check_legality
from .synth import SynthConfig, generate

SIZES = (1000, 5000, 20000)


def benchmark_suite(n_designs: int = 20, pattern_fraction: float = 0.01) -> list[SynthConfig]:
    """Designs cycling through SIZES with utilization spread evenly over [0.65, 0.85]."""
    configs = []
    for i in range(n_designs):
        util = 0.65 + 0.20 * i / max(1, n_designs - 1)
        configs.append(SynthConfig(seed=1000 + i, n_cells=SIZES[i % len(SIZES)],
                                   utilization=round(util, 4),
                                   pattern_fraction=pattern_fraction))
    return configs


@dataclass
class RunResult:
    design: int
    n_cells: int
    utilization: float
    n_patterns: int
    fix_seed: int
    counts: list[int]
    status: str
    legal: bool
    seconds: float

    def remaining_after(self, iterations: int) -> int:
        """Markers left after `iterations` fix passes (0 once the run went clean)."""
        if iterations < len(self.counts):
            return self.counts[iterations]
        return self.counts[-1] if self.status != "clean" else 0


def run_design(idx: int, cfg: SynthConfig, fix_seeds=range(5), max_iterations: int = 10,
               verify_mode: str = "full") -> list[RunResult]:
    base, lib, _ = generate(cfg)
    out = []
    for seed in fix_seeds:
        p = base.copy()
        t0 = time.perf_counter()
        rep = fix_loop(p, lib, FixConfig(seed=seed, max_iterations=max_iterations,
                                         verify_mode=verify_mode))
        out.append(RunResult(idx, cfg.n_cells, cfg.utilization, len(lib), seed, rep.counts,
                             rep.status, not check_legality(p), time.perf_counter() - t0))
    return out


def summarize(results: list[RunResult], within: int = 4) -> dict:
    initial = sum(r.counts[0] for r in results)
    left = sum(r.remaining_after(within) for r in results)
    return {
        "runs": len(results),
        "initial_markers": initial,
        f"remaining_after_{within}": left,
        f"resolved_fraction_{within}": (initial - left) / initial if initial else 1.0,
        "all_clean": all(r.status == "clean" for r in results),
        "all_legal": all(r.legal for r in results),
        "max_iterations_used": max((len(r.counts) - 1 for r in results), default=0),
    }
