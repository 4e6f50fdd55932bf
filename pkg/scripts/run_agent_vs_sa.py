#!/usr/bin/env python3
"""Runtime/cost comparison of the exploration loop against the annealer.

Sweeps the agent loop over iteration counts (5..40 step 5) and reasoning
efforts, and the annealer over a reduced hyperparameter grid, then overlays
both frontiers in one scatter.  Uses the heuristic backend by default so the
whole comparison runs offline; pass --backend llm with CHICO_API_BASE,
CHICO_MODEL and CHICO_API_KEY set to drive a real reasoning model.
"""
import argparse
import json
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from chipdse import cost, orchestrator, ppac, sa
from chipdse.analysis import ParetoPoint, pareto_frontier, scatter_svg, write_points_csv
from chipdse.cli import resolve_workload
from chipdse.design_space import DesignSpace

EFFORTS = ("low", "medium", "high", "xhigh")
ITERATIONS = tuple(range(5, 41, 5))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workload", default="WL-6")
    parser.add_argument("--profile", default="wearables")
    parser.add_argument("--backend", choices=("heuristic", "llm"), default="heuristic")
    parser.add_argument("--agents", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--basis-n", type=int, default=10_000)
    parser.add_argument("--sa-budget", type=int, default=20_000)
    parser.add_argument("--restrict", default=None)
    parser.add_argument("--out-dir", default="runs/agent_vs_sa")
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

    sa_points = []
    base = sa.SaSettings(seed=args.seed, eval_budget=args.sa_budget)
    # a coarse slice of the grid keeps the baseline honest but quick
    for settings, best_cost, runtime, _ in sa.grid_sweep(
        wl, profile, basis, space, consts, base=base,
        t0_values=(4000.0, 7000.0, 10000.0),
        rates=(0.70, 0.80, 0.90, 0.95, 0.99),
    ):
        sa_points.append(ParetoPoint(runtime, best_cost, f"sa:{settings.label()}"))

    agent_points = []
    for effort in EFFORTS:
        for iters in ITERATIONS:
            settings = orchestrator.AgentRunSettings(
                n_agents=args.agents,
                max_iterations=iters,
                reasoning_effort=effort,
                seed=args.seed,
                backend=args.backend,
            )
            start = time.perf_counter()
            with tempfile.TemporaryDirectory() as tmp:
                _, best_cost, _ = orchestrator.run(
                    wl, profile, basis, space, consts, settings, tmp
                )
            runtime = time.perf_counter() - start
            agent_points.append(
                ParetoPoint(runtime, best_cost, f"agent:effort={effort},iters={iters}")
            )
            print(f"  agent effort={effort} iters={iters}: {best_cost:.4f} in {runtime:.1f}s")

    for name, points in (("sa", sa_points), ("agent", agent_points)):
        with (out / f"{name}_points.csv").open("w", newline="") as fh:
            write_points_csv(points, fh)
        with (out / f"{name}_frontier.csv").open("w", newline="") as fh:
            write_points_csv(pareto_frontier(points), fh)

    everything = sa_points + agent_points
    scatter_svg(everything, pareto_frontier(everything), out / "comparison.svg")
    best_sa = min(p.cost for p in sa_points)
    best_agent = min(p.cost for p in agent_points)
    print(f"best sa {best_sa:.4f} vs best agent {best_agent:.4f}; artifacts in {out}/")


if __name__ == "__main__":
    main()
