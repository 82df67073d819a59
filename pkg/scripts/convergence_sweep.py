#!/usr/bin/env python3
"""Sweep seeded random multi-client scenarios and report convergence.

Runs N scenarios (3 clients, jittered delivery, random edit workload) and
prints one line per seed plus a summary. Non-zero exit if any seed fails.

Usage:
    python3 scripts/convergence_sweep.py --seeds 100 --clients 3 --edits 200
"""

import argparse
import importlib.resources as ir
import sys
import time

from collabgraph.harness import Scenario, ScriptStep, run_scenario
from collabgraph.metamodel import parse_metamodel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--clients", type=int, default=3)
    ap.add_argument("--edits", type=int, default=200, help="random edits per client")
    ap.add_argument("--schedule", choices=["fifo", "randomDelay"], default="randomDelay")
    ap.add_argument("--quiet", action="store_true", help="only print the summary")
    args = ap.parse_args()

    spec = parse_metamodel(
        (ir.files("collabgraph") / "samples" / "flowchart.yaml").read_text())
    failures = []
    started = time.perf_counter()
    for seed in range(args.seeds):
        scenario = Scenario(
            seed=seed,
            clients=args.clients,
            modelId="sweep",
            script=[
                ScriptStep(clientIndex=i, delay=0.0,
                           action={"kind": "randomEdits", "count": args.edits})
                for i in range(args.clients)
            ],
            deliverySchedule=args.schedule,
        )
        report = run_scenario(scenario, spec)
        ok = report.converged and report.replayMatches
        if not ok:
            failures.append(seed)
        if not args.quiet:
            print(f"seed {seed:4d}  {'OK ' if ok else 'FAIL'}  "
                  f"committed={report.committed:4d} rejected={report.rejected:3d} "
                  f"reverted={report.reverted:3d} t={report.virtualTime:8.2f}")
    elapsed = time.perf_counter() - started
    print(f"\n{args.seeds - len(failures)}/{args.seeds} converged "
          f"in {elapsed:.2f}s wall time")
    if failures:
        print(f"failing seeds: {failures}")
        sys.exit(1)


if __name__ == "__main__":
    main()
