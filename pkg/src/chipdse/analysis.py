"""Pareto analysis, the exhaustive oracle, and run-directory summaries."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import ppac
from .cost import NormalizationBasis, Profile, weighted_cost
from .design_space import DesignSpace, SystemConfig, enumerate_configs, format_config
from .mapping import WorkloadSpec

DEFAULT_ENUMERATION_CAP = 1_000_000


class EnumerationCapError(RuntimeError):
    """The restricted space is larger than the configured oracle cap."""


@dataclass(frozen=True)
class ParetoPoint:
    runtime_s: float
    cost: float
    label: str = ""

    def __post_init__(self) -> None:
        if self.runtime_s <= 0:
            raise ValueError("runtime must be positive")


def dominates(p: ParetoPoint, q: ParetoPoint) -> bool:
    """p dominates q when it is no worse on both axes and better on one."""
    return (
        p.runtime_s <= q.runtime_s
        and p.cost <= q.cost
        and (p.runtime_s < q.runtime_s or p.cost < q.cost)
    )


def pareto_frontier(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated subset, sorted by runtime ascending.

    Duplicate coordinates are all kept (neither copy dominates the other).
    """
    if not points:
        raise ValueError("empty point list")
    ordered = sorted(points, key=lambda p: (p.runtime_s, p.cost, p.label))
    frontier: list[ParetoPoint] = []
    best_cost = float("inf")
    best_runtime = float("nan")
    for p in ordered:
        if p.cost < best_cost:
            frontier.append(p)
            best_cost, best_runtime = p.cost, p.runtime_s
        elif p.cost == best_cost and p.runtime_s == best_runtime:
            frontier.append(p)
    return frontier


@dataclass(frozen=True)
class OracleResult:
    description: str
    total_configs: int
    best_config: SystemConfig
    best_cost: float
    runtime_s: float


def brute_force(
    wl: WorkloadSpec,
    profile: Profile,
    basis: NormalizationBasis,
    space: DesignSpace,
    consts: ppac.ModelConstants,
    cap: int = DEFAULT_ENUMERATION_CAP,
    description: str = "",
) -> OracleResult:
    """Exhaustively score a restricted space; the exact optimum, with cost
    ties broken by canonical string."""
    start = time.perf_counter()
    best: tuple[float, str, SystemConfig] | None = None
    total = 0
    for cfg in enumerate_configs(space):
        total += 1
        if total > cap:
            raise EnumerationCapError(
                f"restricted space exceeds the oracle cap of {cap} configurations; "
                "tighten the restriction"
            )
        cost = weighted_cost(ppac.evaluate(wl, cfg, consts), basis, profile)
        key = (cost, format_config(cfg))
        if best is None or key < (best[0], best[1]):
            best = (key[0], key[1], cfg)
    if best is None:
        raise ValueError("restricted space contains no feasible configuration")
    return OracleResult(
        description=description,
        total_configs=total,
        best_config=best[2],
        best_cost=best[0],
        runtime_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Run summaries
# ---------------------------------------------------------------------------

SUMMARY_COLUMNS = ("method", "settings", "best_cost", "runtime_s", "evaluations")


@dataclass(frozen=True)
class SummaryRow:
    method: str
    settings: str
    best_cost: float
    runtime_s: float
    evaluations: int


def summarize_run(run_dir: str | Path) -> list[SummaryRow]:
    """One summary row per setting found in a run directory.

    Agent and single-SA runs produce one row; grid sweeps one per grid
    point.  The directory kind is detected from its artifacts.
    """
    run_dir = Path(run_dir)
    grid = run_dir / "grid_summary.csv"
    if grid.exists():
        rows = []
        with grid.open(newline="") as fh:
            for row in csv.DictReader(fh):
                rows.append(
                    SummaryRow(
                        method=row["method"],
                        settings=row["settings"],
                        best_cost=float(row["best_cost"]),
                        runtime_s=float(row["runtime_s"]),
                        evaluations=int(row["evaluations"]),
                    )
                )
        return rows
    meta_path = run_dir / "run_meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        return [
            SummaryRow(
                method=meta["method"],
                settings=meta["settings"],
                best_cost=float(meta["best_cost"]),
                runtime_s=float(meta["wall_clock_s"]),
                evaluations=int(meta["evaluations"]),
            )
        ]
    raise ValueError(f"{run_dir} is not a recognizable run directory")


def write_summary_csv(rows: Iterable[SummaryRow], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow(
            [row.method, row.settings, repr(row.best_cost), repr(row.runtime_s), row.evaluations]
        )


def read_points_csv(path: str | Path) -> list[ParetoPoint]:
    """Points from a CSV with columns runtime_s, cost and optional label."""
    points = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            points.append(
                ParetoPoint(
                    runtime_s=float(row["runtime_s"]),
                    cost=float(row["cost"]),
                    label=row.get("label", "") or "",
                )
            )
    return points


def write_points_csv(points: Iterable[ParetoPoint], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(("runtime_s", "cost", "label"))
    for p in points:
        writer.writerow([repr(p.runtime_s), repr(p.cost), p.label])


def scatter_svg(
    points: Sequence[ParetoPoint], frontier: Sequence[ParetoPoint], path: str | Path
) -> None:
    """Runtime/cost scatter (log runtime) with the frontier drawn on top."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter([p.runtime_s for p in points], [p.cost for p in points],
               s=12, alpha=0.5, label="runs")
    ax.plot([p.runtime_s for p in frontier], [p.cost for p in frontier],
            "o-", color="crimson", markersize=4, label="frontier")
    ax.set_xscale("log")
    ax.set_xlabel("runtime [s]")
    ax.set_ylabel("best system cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
