"""Benchmark the compiled exchange kernel against the pure-Python fallback.

Runs the same configuration on each available engine, reports attempts per
second and the speedup, and verifies that both engines produce bit-identical
trajectories (same final balances from the same seed).

Usage: python3 benchmarks/bench_kernel.py [--agents N] [--sweeps S] [--rule R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from kinex import (
    DebtCap,
    FixedAmount,
    NoDebt,
    ReserveRatioBank,
    SavingPropensity,
    SimConfig,
    UniformRandomFraction,
    available_engines,
    run_simulation,
)

RULES = {
    "uniform": lambda: (UniformRandomFraction(), NoDebt()),
    "fixed": lambda: (FixedAmount(1.0), NoDebt()),
    "saving": lambda: (SavingPropensity(0.5), NoDebt()),
    "debt": lambda: (UniformRandomFraction(), DebtCap(max_debt=800.0)),
    "reserve": lambda: (UniformRandomFraction(), ReserveRatioBank(reserve_ratio=0.8)),
}


def bench(config: SimConfig, engine: str, repeats: int) -> tuple[float, np.ndarray]:
    best = float("inf")
    final = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = run_simulation(config, engine=engine)
        elapsed = time.perf_counter() - start
        best = min(best, elapsed)
        final = result.final_balances
    return best, final


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--agents", type=int, default=500)
    parser.add_argument("--sweeps", type=int, default=2000)
    parser.add_argument("--rule", choices=sorted(RULES), default="uniform")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=1234)
    args = parser.parse_args()

    rule, boundary = RULES[args.rule]()
    config = SimConfig(
        num_agents=args.agents,
        initial_balance=1000.0,
        rule=rule,
        boundary=boundary,
        sweeps=args.sweeps,
        seed=args.seed,
        snapshot_every=max(1, args.sweeps // 10),
    )
    attempts = args.agents * args.sweeps

    engines = available_engines()
    print(f"rule={args.rule} agents={args.agents} sweeps={args.sweeps} "
          f"({attempts:,} attempts), best of {args.repeats}")
    timings: dict[str, float] = {}
    finals: dict[str, np.ndarray] = {}
    for engine in engines:
        elapsed, final = bench(config, engine, args.repeats)
        timings[engine] = elapsed
        finals[engine] = final
        print(f"  {engine:>8}: {elapsed:8.3f} s   {attempts / elapsed:12,.0f} attempts/s")

    if len(engines) == 2:
        speedup = timings["python"] / timings["compiled"]
        identical = np.array_equal(finals["python"], finals["compiled"])
        print(f"  speedup: {speedup:.1f}x   trajectories bit-identical: {identical}")
        if not identical:
            print("  ERROR: engines disagree")
            return 1
    else:
        print("  (compiled engine not built; only the fallback was timed)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
