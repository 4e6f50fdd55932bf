#!/usr/bin/env python3
"""Sweep annealer hyperparameters for one (workload, profile) pair and emit
the runtime/cost points plus their non-dominated frontier.

The full 13 x 30 grid at the default evaluation budget takes a while; use
--budget / --moves to scale it down for a quick look.
"""
import argparse
import csv
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from chipdse import cost, ppac, sa
from chipdse.analysis import ParetoPoint, pareto_frontier, write_points_csv
from chipdse.cli import resolve_workload
from chipdse.design_space import DesignSpace


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workload", default="WL-6")
    parser.add_argument("--profile", default="balance")
    parser.add_argument("--budget", type=int, default=20_000)
    parser.add_argument("--moves", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--basis-n", type=int, default=10_000)
    parser.add_argument("--restrict", default=None, help="design-space restriction JSON")
    parser.add_argument("--out-dir", default="runs/grid_sweep")
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    consts = ppac.load_constants()
    space = ppac.default_space(consts)
    if args.restrict:
        space = DesignSpace.from_json(json.loads(args.restrict), base=space)
    wl = resolve_workload(args.workload)
    profile = cost.resolve_profile(args.profile)

    print(f"normalization basis over {args.basis_n} samples ...")
    basis = cost.compute_basis(wl, space, consts, n=args.basis_n, seed=97)
    cost.save_basis(basis, out / "basis.json")

    base = sa.SaSettings(moves_per_temp=args.moves, seed=args.seed, eval_budget=args.budget)
    points = []
    start = time.perf_counter()
    with (out / "grid_summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("method", "settings", "best_cost", "runtime_s", "evaluations"))
        for i, settings in enumerate(sa.grid_settings(base), start=1):
            trace = sa.anneal(wl, profile, basis, space, consts, settings)
            writer.writerow(["sa", settings.label(), repr(trace.best_cost),
                             repr(trace.wall_clock_s), trace.evaluations])
            points.append(ParetoPoint(trace.wall_clock_s, trace.best_cost, settings.label()))
            if i % 30 == 0:
                print(f"  {i}/390 settings, elapsed {time.perf_counter() - start:.0f}s")

    with (out / "points.csv").open("w", newline="") as fh:
        write_points_csv(points, fh)
    frontier = pareto_frontier(points)
    with (out / "frontier.csv").open("w", newline="") as fh:
        write_points_csv(frontier, fh)
    best = min(points, key=lambda p: p.cost)
    print(f"{len(points)} settings, best cost {best.cost:.4f} ({best.label})")
    print(f"frontier size {len(frontier)}; artifacts in {out}/")


if __name__ == "__main__":
    main()
