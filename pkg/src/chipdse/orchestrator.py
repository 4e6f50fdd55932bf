"""Admin/field exploration loop over persistent and evolving context files.

Each iteration runs three phases: the admin turns the system context into a
batch of exploration plans (orchestrate), field evaluators score every plan
configuration (explore), and the admin folds the findings back into the run
directory (evaluate_and_merge).  The run directory is the single source of
truth:

    AGENTS.md, MODEL_INFO.md, BLACKLIST.json   static operating docs
    KNOWHOW.md                                 append-only findings log
    BEST.csv                                   ranked incumbents (top 20)
    RESULTS.csv                                every evaluation ever made
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import ppac
from .backends import (
    BackendError,
    ExplorationPlan,
    HeuristicBackend,
    PlanRequest,
    make_backend,
    derive_rng,
)
from .cost import NormalizationBasis, Profile, normalized_metrics, weighted_cost
from .design_space import (
    DesignSpace,
    SystemConfig,
    format_config,
    parse_config,
    sample_feasible,
)
from .mapping import WorkloadSpec

RESULTS_COLUMNS = (
    "iteration", "plan_id", "config", "energy_j", "area_mm2", "latency_s",
    "mfg_cost_usd", "norm_e", "norm_a", "norm_l", "norm_c", "weighted_cost",
    "backend", "timestamp_iso8601",
)
BEST_COLUMNS = ("rank", "weighted_cost", "config", "iteration_found")
BEST_TABLE_DEPTH = 20
DIGEST_LIMIT_BYTES = 32 * 1024
WATERMARK_FILE = ".merge_watermark"


class MergeConflictError(RuntimeError):
    """Raised when an iteration's results would be merged twice."""


@dataclass(frozen=True)
class AgentRunSettings:
    n_agents: int = 100
    max_iterations: int = 10
    reasoning_effort: str = "medium"
    seed: int = 0
    backend: str = "heuristic"
    configs_per_plan: int = 5
    no_timestamps: bool = False

    def __post_init__(self) -> None:
        if self.n_agents < 1 or self.max_iterations < 1:
            raise ValueError("n_agents and max_iterations must be >= 1")

    def label(self) -> str:
        return (
            f"backend={self.backend},agents={self.n_agents},"
            f"iterations={self.max_iterations},effort={self.reasoning_effort},seed={self.seed}"
        )


@dataclass
class FieldResult:
    plan: ExplorationPlan
    backend_name: str
    evaluations: list[tuple[SystemConfig, ppac.PpacReport, tuple[float, float, float, float], float]] = field(default_factory=list)
    best_config: SystemConfig | None = None
    best_cost: float = float("inf")
    insight: str = ""
    error: str | None = None

    @property
    def plan_id(self) -> str:
        return self.plan.plan_id


def _bundled(name: str) -> str:
    return resources.files("chipdse.data").joinpath(name).read_text()


class ContextStore:
    """Filesystem-backed system context for one optimization run."""

    def __init__(self, run_dir: str | Path, no_timestamps: bool = False):
        self.run_dir = Path(run_dir)
        self.no_timestamps = no_timestamps

    # -- paths ---------------------------------------------------------------
    @property
    def knowhow_path(self) -> Path:
        return self.run_dir / "KNOWHOW.md"

    @property
    def best_path(self) -> Path:
        return self.run_dir / "BEST.csv"

    @property
    def results_path(self) -> Path:
        return self.run_dir / "RESULTS.csv"

    @property
    def watermark_path(self) -> Path:
        return self.run_dir / WATERMARK_FILE

    # -- lifecycle -----------------------------------------------------------
    @classmethod
    def create(cls, run_dir: str | Path, no_timestamps: bool = False) -> "ContextStore":
        store = cls(run_dir, no_timestamps)
        store.run_dir.mkdir(parents=True, exist_ok=True)
        (store.run_dir / "AGENTS.md").write_text(_bundled("AGENTS.md"))
        (store.run_dir / "MODEL_INFO.md").write_text(_bundled("MODEL_INFO.md"))
        (store.run_dir / "BLACKLIST.json").write_text(_bundled("BLACKLIST.json"))
        store.knowhow_path.write_text("")
        store.best_path.write_text(",".join(BEST_COLUMNS) + "\n")
        store.results_path.write_text(",".join(RESULTS_COLUMNS) + "\n")
        store.watermark_path.write_text("0\n")
        return store

    def persistent_docs(self) -> tuple[str, str, str]:
        return (
            (self.run_dir / "AGENTS.md").read_text(),
            (self.run_dir / "MODEL_INFO.md").read_text(),
            (self.run_dir / "BLACKLIST.json").read_text(),
        )

    # -- reads ---------------------------------------------------------------
    def merged_iterations(self) -> int:
        return int(self.watermark_path.read_text().strip() or 0)

    def best_entries(self) -> list[tuple[float, str, int]]:
        entries = []
        with self.best_path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                entries.append((float(row["weighted_cost"]), row["config"], int(row["iteration_found"])))
        return entries

    def results_count(self) -> int:
        with self.results_path.open() as fh:
            return sum(1 for _ in fh) - 1

    def global_best(self) -> tuple[float, str] | None:
        entries = self.best_entries()
        if not entries:
            return None
        cost, canon, _ = entries[0]
        return cost, canon

    def last_iteration_knowhow(self, iteration: int) -> str:
        marker = f"## Iter {iteration} /"
        lines = self.knowhow_path.read_text().splitlines()
        keep: list[str] = []
        active = False
        for line in lines:
            if line.startswith("## "):
                active = line.startswith(marker)
            if active:
                keep.append(line)
        return "\n".join(keep)

    # -- merge ---------------------------------------------------------------
    def _timestamp(self) -> str:
        if self.no_timestamps:
            return ""
        return datetime.now(timezone.utc).isoformat()

    def merge(self, results: list[FieldResult], iteration: int) -> None:
        """Commit an iteration: append knowhow and results, re-rank BEST.

        Guarded by a watermark so a crashed and restarted run cannot merge
        the same iteration twice; all files are staged and swapped in at the
        end, so a failure leaves the previous context intact.
        """
        if iteration <= self.merged_iterations():
            raise MergeConflictError(f"iteration {iteration} already merged")

        incumbent = self.global_best()
        running_best = incumbent[0] if incumbent else None

        knowhow_new = io.StringIO()
        results_new = io.StringIO()
        results_writer = csv.writer(results_new, lineterminator="\n")
        best_entries = self.best_entries()

        for fr in sorted(results, key=lambda r: r.plan_id):
            if fr.error is not None:
                knowhow_new.write(f"> note: plan {fr.plan_id} failed: {fr.error}\n")
                continue
            assert fr.best_config is not None
            best_canon = format_config(fr.best_config)
            delta = 0.0 if running_best is None else fr.best_cost - running_best
            knowhow_new.write(
                f"## Iter {iteration} / Plan {fr.plan_id}\n"
                f"- configs: {len(fr.evaluations)}\n"
                f"- batch best: {fr.best_cost:.6f} @ {best_canon}\n"
                f"- delta vs global best: {delta:+.6f}\n"
                f"- insight: {fr.insight}\n"
            )
            if running_best is None or fr.best_cost < running_best:
                running_best = fr.best_cost
            for cfg, report, norms, cost in fr.evaluations:
                results_writer.writerow(
                    [
                        iteration, fr.plan_id, format_config(cfg),
                        repr(report.energy_j), repr(report.area_mm2),
                        repr(report.latency_s), repr(report.mfg_cost_usd),
                        repr(norms[0]), repr(norms[1]), repr(norms[2]), repr(norms[3]),
                        repr(cost), fr.backend_name, self._timestamp(),
                    ]
                )
                best_entries.append((cost, format_config(cfg), iteration))

        # strict-improvement ranking: older entries win cost ties
        dedup: dict[str, tuple[float, str, int]] = {}
        for cost, canon, it in sorted(best_entries, key=lambda e: (e[0], e[2], e[1])):
            if canon not in dedup:
                dedup[canon] = (cost, canon, it)
        ranked = sorted(dedup.values(), key=lambda e: (e[0], e[2], e[1]))[:BEST_TABLE_DEPTH]

        best_new = io.StringIO()
        best_writer = csv.writer(best_new, lineterminator="\n")
        best_writer.writerow(BEST_COLUMNS)
        for rank, (cost, canon, it) in enumerate(ranked, start=1):
            best_writer.writerow([rank, repr(cost), canon, it])

        staged = [
            (self.knowhow_path, self.knowhow_path.read_text() + knowhow_new.getvalue()),
            (self.results_path, self.results_path.read_text() + results_new.getvalue()),
            (self.best_path, best_new.getvalue()),
            (self.watermark_path, f"{iteration}\n"),
        ]
        tmp_paths = []
        try:
            for target, content in staged:
                tmp = target.with_suffix(target.suffix + ".tmp")
                tmp.write_text(content)
                tmp_paths.append((tmp, target))
        except OSError:
            for tmp, _ in tmp_paths:
                tmp.unlink(missing_ok=True)
            raise
        for tmp, target in tmp_paths:
            os.replace(tmp, target)

    def append_note(self, text: str) -> None:
        with self.knowhow_path.open("a") as fh:
            fh.write(f"> note: {text}\n")


def build_digest(ctx: ContextStore, iteration: int, limit_bytes: int = DIGEST_LIMIT_BYTES) -> str:
    """Evolving-context digest for the backend: top incumbents, the previous
    iteration's findings, and totals, truncated to the byte budget."""
    best_csv = ctx.best_path.read_text().strip()
    recent = ctx.last_iteration_knowhow(iteration - 1)
    digest = (
        "## BEST (top 20)\n"
        f"{best_csv}\n"
        "\n## KNOWHOW (latest iteration)\n"
        f"{recent}\n"
        "\n## TOTALS\n"
        f"evaluations: {ctx.results_count()}\n"
    )
    if len(digest.encode()) > limit_bytes:
        head = digest.encode()[:limit_bytes]
        digest = head.decode(errors="ignore") + "\n[digest truncated]\n"
    return digest


def _feasibility_errors(plans: list[ExplorationPlan], space: DesignSpace) -> dict[str, list[str]]:
    bad: dict[str, list[str]] = {}
    for plan in plans:
        infeasible = [format_config(c) for c in plan.configs if not space.is_feasible(c)]
        if infeasible:
            bad[plan.plan_id] = infeasible
    return bad


def orchestrate(
    ctx: ContextStore,
    iteration: int,
    settings: AgentRunSettings,
    backend,
    space: DesignSpace,
    wl: WorkloadSpec,
    profile: Profile,
) -> tuple[list[ExplorationPlan], str]:
    """Produce exactly n_agents feasible plans for one iteration.

    Infeasible configurations are sent back to the backend for up to three
    replacement rounds, then substituted with seeded feasible samples.  A
    failing backend drops the whole iteration to the heuristic fallback.
    """
    agents_doc, model_doc, blacklist_doc = ctx.persistent_docs()
    digest = "" if iteration == 1 else build_digest(ctx, iteration)
    req = PlanRequest(
        workload=wl,
        profile=profile,
        iteration=iteration,
        n_plans=settings.n_agents,
        agents_doc=agents_doc,
        model_info_doc=model_doc,
        blacklist_doc=blacklist_doc,
        evolving_digest=digest,
        reasoning_effort=settings.reasoning_effort,
    )

    backend_name = getattr(backend, "name", "unknown")
    try:
        response = backend.generate(req)
        plans = list(response.plans)
        for round_idx in range(3):
            bad = _feasibility_errors(plans, space)
            if not bad:
                break
            errors_text = "\n".join(
                f"plan {pid}: infeasible {', '.join(cfgs)}" for pid, cfgs in bad.items()
            )
            retry_req = replace(
                req,
                n_plans=len(bad),
                evolving_digest=(digest or "(first iteration)")
                + f"\n## FEASIBILITY ERRORS (round {round_idx + 1})\n{errors_text}\n",
                iteration=max(iteration, 2),
            )
            try:
                replacements = list(backend.generate(retry_req).plans)
            except BackendError:
                break
            by_id = sorted(bad)
            for pid, rep in zip(by_id, replacements):
                idx = next(i for i, p in enumerate(plans) if p.plan_id == pid)
                plans[idx] = replace(rep, plan_id=pid)
    except BackendError as exc:
        ctx.append_note(f"backend {backend_name!r} failed at iteration {iteration}: {exc}; using heuristic plans")
        fallback = HeuristicBackend(space, settings.seed, settings.configs_per_plan)
        plans = list(fallback.generate(req).plans)
        backend_name = "heuristic-fallback"

    # final pass: substitute any remaining infeasible config, pad, trim
    rng = derive_rng(settings.seed, "orchestrate", iteration)
    fixed: list[ExplorationPlan] = []
    for plan in plans[: settings.n_agents]:
        configs = tuple(
            c if space.is_feasible(c) else sample_feasible(space, rng) for c in plan.configs
        )
        fixed.append(replace(plan, configs=configs))
    while len(fixed) < settings.n_agents:
        ordinal = len(fixed) + 1
        fixed.append(
            ExplorationPlan(
                plan_id=f"p{ordinal:03d}",
                configs=tuple(
                    sample_feasible(space, rng) for _ in range(settings.configs_per_plan)
                ),
                rationale="backfill: uniform feasible sample",
                target_region="whole space",
            )
        )
    plans = [
        replace(p, plan_id=f"i{iteration:03d}-p{j:03d}") for j, p in enumerate(fixed, start=1)
    ]
    return plans, backend_name


def explore(
    plans: list[ExplorationPlan],
    wl: WorkloadSpec,
    profile: Profile,
    basis: NormalizationBasis,
    consts: ppac.ModelConstants,
    backend_name: str,
) -> list[FieldResult]:
    """Field evaluation: score every plan configuration with the models.

    Each plan is independent and side-effect free, so plans may be scored in
    parallel; results are always reported in plan_id order.
    """
    out = []
    for plan in plans:
        fr = FieldResult(plan=plan, backend_name=backend_name)
        try:
            for cfg in plan.configs:
                report = ppac.evaluate(wl, cfg, consts)
                norms = normalized_metrics(report, basis)
                cost = weighted_cost(report, basis, profile)
                fr.evaluations.append((cfg, report, norms, cost))
                key = (cost, format_config(cfg))
                if fr.best_config is None or key < (fr.best_cost, format_config(fr.best_config)):
                    fr.best_config, fr.best_cost = cfg, cost
            assert fr.best_config is not None
            best = fr.best_config
            fr.insight = (
                f"{len(fr.evaluations)} configs in {plan.target_region or 'unspecified region'}; "
                f"best uses {best.count} chiplet(s), {best.package.integration}/"
                f"{best.package.memory}, {best.mapping.dataflow} dataflow, "
                f"split_k={int(best.mapping.split_k)}, share={int(best.mapping.data_sharing)}"
            )
        except ppac.ModelError as exc:
            fr.error = str(exc)
        out.append(fr)
    return sorted(out, key=lambda r: r.plan_id)


def evaluate_and_merge(ctx: ContextStore, results: list[FieldResult], iteration: int) -> None:
    ctx.merge(results, iteration)


def run(
    wl: WorkloadSpec,
    profile: Profile,
    basis: NormalizationBasis,
    space: DesignSpace,
    consts: ppac.ModelConstants,
    settings: AgentRunSettings,
    out_dir: str | Path,
) -> tuple[SystemConfig, float, Path]:
    """Full optimization run; returns (best config, best cost, run directory)."""
    start = time.perf_counter()
    ctx = ContextStore.create(out_dir, no_timestamps=settings.no_timestamps)
    backend = make_backend(settings.backend, space, settings.seed, settings.configs_per_plan)
    for iteration in range(1, settings.max_iterations + 1):
        plans, backend_name = orchestrate(ctx, iteration, settings, backend, space, wl, profile)
        results = explore(plans, wl, profile, basis, consts, backend_name)
        evaluate_and_merge(ctx, results, iteration)
    best = ctx.global_best()
    assert best is not None
    best_cost, best_canon = best
    evaluations = ctx.results_count()
    meta = {
        "method": "agent",
        "settings": settings.label(),
        "workload": wl.name,
        "profile": profile.name,
        "best_cost": best_cost,
        "best_config": best_canon,
        "evaluations": evaluations,
        "wall_clock_s": 0.0 if settings.no_timestamps else time.perf_counter() - start,
    }
    (ctx.run_dir / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return parse_config(best_canon), best_cost, ctx.run_dir
