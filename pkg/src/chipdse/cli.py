"""Command-line surface.

Subcommands: evaluate, normalize, sa, agent, bruteforce, pareto, summarize.
Exit codes: 0 success, 2 infeasible or invalid input, 3 backend failure,
4 enumeration cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

from . import analysis, cost, orchestrator, ppac, sa
from .backends import BackendError
from .design_space import (
    BlacklistError,
    ConfigParseError,
    DesignSpace,
    InfeasibleSpaceError,
    check_feasible,
    format_config,
    load_blacklist,
    parse_blacklist,
    parse_config,
)
from .mapping import WorkloadSpec, load_workloads

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BACKEND = 3
EXIT_CAP = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def resolve_workload(spec: str) -> WorkloadSpec:
    """Workload by bundled name (e.g. WL-6) or as explicit 'm,k,n'."""
    for wl in load_workloads():
        if wl.name.lower() == spec.strip().lower():
            return wl
    parts = spec.split(",")
    if len(parts) == 3:
        m, k, n = (int(p) for p in parts)
        return WorkloadSpec(m=m, k=k, n=n, name="custom")
    names = [w.name for w in load_workloads()]
    raise CliError(f"unknown workload {spec!r}; use one of {names} or m,k,n")


def _add_common(parser: argparse.ArgumentParser, workload: bool = True) -> None:
    if workload:
        parser.add_argument("--workload", default="WL-6", help="bundled name or m,k,n")
        parser.add_argument("--profile", default="balance", help="profile name or a,b,c,d weights")
    parser.add_argument("--constants", default=None, help="constants JSON overriding the default")
    parser.add_argument("--blacklist", default=None, help="blacklist JSON (default: bundled)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default=None)
    parser.add_argument("--no-timestamps", action="store_true",
                        help="omit timestamps and wall-clock fields from artifacts")
    parser.add_argument("--restrict", default=None,
                        help="JSON object (or @file) narrowing design-space dimensions")
    parser.add_argument("--basis", default=None, help="normalization basis JSON file")
    parser.add_argument("--basis-n", type=int, default=10_000)
    parser.add_argument("--basis-seed", type=int, default=97)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chipdse",
                                     description="chiplet system design-space exploration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score one configuration")
    _add_common(p)
    p.add_argument("--config", required=True, help="canonical configuration string")

    p = sub.add_parser("normalize", help="compute and store a normalization basis")
    _add_common(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--out", default=None, help="basis file to write")

    p = sub.add_parser("sa", help="simulated annealing run or grid sweep")
    _add_common(p)
    p.add_argument("--t0", type=float, default=4000.0)
    p.add_argument("--rate", type=float, default=0.95)
    p.add_argument("--moves", type=int, default=50)
    p.add_argument("--tfinal", type=float, default=1.0)
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--grid", action="store_true", help="run the full 390-point sweep")

    p = sub.add_parser("agent", help="admin/field exploration loop")
    _add_common(p)
    p.add_argument("--backend", choices=("heuristic", "llm"), default="heuristic")
    p.add_argument("--agents", type=int, default=100)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--effort", choices=("low", "medium", "high", "xhigh"), default="medium")
    p.add_argument("--plan-size", type=int, default=5)

    p = sub.add_parser("bruteforce", help="exhaustive oracle over a restricted space")
    _add_common(p)
    p.add_argument("--cap", type=int, default=analysis.DEFAULT_ENUMERATION_CAP)

    p = sub.add_parser("pareto", help="non-dominated frontier of (runtime, cost) points")
    _add_common(p, workload=False)
    p.add_argument("--points", required=True, help="CSV with runtime_s,cost,label columns")
    p.add_argument("--svg", default=None, help="also write a scatter plot")

    p = sub.add_parser("summarize", help="summarize a run directory")
    _add_common(p, workload=False)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out", default=None)
    return parser


def _load_context(args):
    consts = ppac.load_constants(args.constants)
    if args.blacklist is not None:
        rules = load_blacklist(args.blacklist)
    else:
        text = resources.files("chipdse.data").joinpath("BLACKLIST.json").read_text()
        rules = parse_blacklist(json.loads(text), source="bundled BLACKLIST.json")
    space = ppac.default_space(consts, rules)
    if args.restrict:
        text = args.restrict
        if text.startswith("@"):
            text = Path(text[1:]).read_text()
        space = DesignSpace.from_json(json.loads(text), base=space)
    return consts, space


def _resolve_basis(args, wl, space, consts, out_dir: Path | None):
    if args.basis:
        return cost.load_basis(args.basis)
    basis = cost.compute_basis(wl, space, consts, n=args.basis_n, seed=args.basis_seed)
    if out_dir is not None:
        cost.save_basis(basis, out_dir / "basis.json")
    return basis


def _out_dir(args, default_name: str) -> Path:
    out = Path(args.out_dir) if args.out_dir else Path("runs") / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_evaluate(args) -> int:
    consts, space = _load_context(args)
    wl = resolve_workload(args.workload)
    profile = cost.resolve_profile(args.profile)
    cfg = parse_config(args.config)
    verdict = check_feasible(cfg, space.rules, space.areas_of(cfg))
    if not verdict.ok:
        raise CliError(
            "infeasible configuration: " + "; ".join(
                f"{v} ({m})" for v, m in zip(verdict.violations, verdict.messages)
            )
        )
    report = ppac.evaluate(wl, cfg, consts)
    payload = {
        "config": format_config(cfg),
        "workload": wl.name,
        "energy_j": report.energy_j,
        "area_mm2": report.area_mm2,
        "latency_s": report.latency_s,
        "mfg_cost_usd": report.mfg_cost_usd,
    }
    if args.basis:
        basis = cost.load_basis(args.basis)
        ne, na, nl, nc = cost.normalized_metrics(report, basis)
        payload.update(
            norm_e=ne, norm_a=na, norm_l=nl, norm_c=nc,
            weighted_cost=cost.weighted_cost(report, basis, profile),
        )
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_normalize(args) -> int:
    consts, space = _load_context(args)
    wl = resolve_workload(args.workload)
    out_dir = _out_dir(args, "normalize")
    basis = cost.compute_basis(wl, space, consts, n=args.n, seed=args.seed)
    out = Path(args.out) if args.out else out_dir / f"basis-{wl.name}.json"
    cost.save_basis(basis, out)
    print(f"basis written to {out}")
    return EXIT_OK


def _write_sa_artifacts(out_dir: Path, rows, no_timestamps: bool, grid: bool) -> None:
    import csv as _csv

    if grid:
        with (out_dir / "grid_summary.csv").open("w", newline="") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(analysis.SUMMARY_COLUMNS)
            for settings, best_cost, runtime, evals in rows:
                writer.writerow([
                    "sa", settings.label(), repr(best_cost),
                    repr(0.0 if no_timestamps else runtime), evals,
                ])
        return
    trace = rows
    with (out_dir / "trace.csv").open("w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(("eval_idx", "temperature", "cost", "accepted", "config"))
        for rec in trace.records:
            writer.writerow([rec.eval_idx, repr(rec.temperature), repr(rec.cost),
                             int(rec.accepted), rec.config])
    with (out_dir / "summary.csv").open("w", newline="") as fh:
        analysis.write_summary_csv(
            [analysis.SummaryRow(
                method="sa",
                settings=trace.settings.label(),
                best_cost=trace.best_cost,
                runtime_s=0.0 if no_timestamps else trace.wall_clock_s,
                evaluations=trace.evaluations,
            )],
            fh,
        )


def cmd_sa(args) -> int:
    consts, space = _load_context(args)
    wl = resolve_workload(args.workload)
    profile = cost.resolve_profile(args.profile)
    out_dir = _out_dir(args, "sa")
    basis = _resolve_basis(args, wl, space, consts, out_dir)
    base = sa.SaSettings(
        t0=args.t0, t_final=args.tfinal, rate=args.rate,
        moves_per_temp=args.moves, seed=args.seed, eval_budget=args.budget,
    )
    if args.grid:
        rows = sa.grid_sweep(wl, profile, basis, space, consts, base=base)
        _write_sa_artifacts(out_dir, rows, args.no_timestamps, grid=True)
        best = min(rows, key=lambda r: r[1])
        print(f"grid of {len(rows)} settings; best {best[1]:.6f} at {best[0].label()}")
        return EXIT_OK
    trace = sa.anneal(wl, profile, basis, space, consts, base)
    _write_sa_artifacts(out_dir, trace, args.no_timestamps, grid=False)
    meta = {
        "method": "sa",
        "settings": base.label(),
        "workload": wl.name,
        "profile": profile.name,
        "best_cost": trace.best_cost,
        "best_config": format_config(trace.best_config),
        "evaluations": trace.evaluations,
        "wall_clock_s": 0.0 if args.no_timestamps else trace.wall_clock_s,
    }
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"best {trace.best_cost:.6f} @ {format_config(trace.best_config)}")
    return EXIT_OK


def cmd_agent(args) -> int:
    consts, space = _load_context(args)
    wl = resolve_workload(args.workload)
    profile = cost.resolve_profile(args.profile)
    out_dir = _out_dir(args, "agent")
    basis = _resolve_basis(args, wl, space, consts, out_dir)
    settings = orchestrator.AgentRunSettings(
        n_agents=args.agents,
        max_iterations=args.iterations,
        reasoning_effort=args.effort,
        seed=args.seed,
        backend=args.backend,
        configs_per_plan=args.plan_size,
        no_timestamps=args.no_timestamps,
    )
    best_cfg, best_cost, run_dir = orchestrator.run(
        wl, profile, basis, space, consts, settings, out_dir
    )
    print(f"best {best_cost:.6f} @ {format_config(best_cfg)} (run dir: {run_dir})")
    return EXIT_OK


def cmd_bruteforce(args) -> int:
    consts, space = _load_context(args)
    wl = resolve_workload(args.workload)
    profile = cost.resolve_profile(args.profile)
    out_dir = _out_dir(args, "bruteforce")
    basis = _resolve_basis(args, wl, space, consts, out_dir)
    start = time.perf_counter()
    result = analysis.brute_force(
        wl, profile, basis, space, consts, cap=args.cap,
        description=args.restrict or "full space",
    )
    runtime = 0.0 if args.no_timestamps else time.perf_counter() - start
    payload = {
        "description": result.description,
        "total_configs": result.total_configs,
        "best_cost": result.best_cost,
        "best_config": format_config(result.best_config),
        "runtime_s": runtime,
    }
    (out_dir / "oracle.json").write_text(json.dumps(payload, indent=2) + "\n")
    meta = {
        "method": "bruteforce",
        "settings": f"cap={args.cap},restrict={args.restrict or 'none'}",
        "best_cost": result.best_cost,
        "best_config": format_config(result.best_config),
        "evaluations": result.total_configs,
        "wall_clock_s": runtime,
    }
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"optimum {result.best_cost:.6f} over {result.total_configs} configs")
    return EXIT_OK


def cmd_pareto(args) -> int:
    out_dir = _out_dir(args, "pareto")
    points = analysis.read_points_csv(args.points)
    if not points:
        raise CliError("points file is empty")
    frontier = analysis.pareto_frontier(points)
    with (out_dir / "frontier.csv").open("w", newline="") as fh:
        analysis.write_points_csv(frontier, fh)
    if args.svg:
        analysis.scatter_svg(points, frontier, args.svg)
    print(f"{len(frontier)} non-dominated of {len(points)} points -> {out_dir / 'frontier.csv'}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    rows = analysis.summarize_run(args.run_dir)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            analysis.write_summary_csv(rows, fh)
    else:
        analysis.write_summary_csv(rows, sys.stdout)
    return EXIT_OK


_COMMANDS = {
    "evaluate": cmd_evaluate,
    "normalize": cmd_normalize,
    "sa": cmd_sa,
    "agent": cmd_agent,
    "bruteforce": cmd_bruteforce,
    "pareto": cmd_pareto,
    "summarize": cmd_summarize,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigParseError, BlacklistError, InfeasibleSpaceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except analysis.EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
