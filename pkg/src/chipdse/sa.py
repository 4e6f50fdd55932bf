"""Simulated-annealing baseline over the feasible configuration space."""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field

from . import ppac
from .cost import NormalizationBasis, Profile, weighted_cost
from .design_space import DesignSpace, SystemConfig, format_config, random_mutation, sample_feasible
from .mapping import WorkloadSpec

T0_GRID = tuple(4000.0 + 500.0 * i for i in range(13))
RATE_GRID = tuple(round(0.70 + 0.01 * i, 2) for i in range(30))


@dataclass(frozen=True)
class SaSettings:
    t0: float = 4000.0
    t_final: float = 1.0
    rate: float = 0.95
    moves_per_temp: int = 50
    seed: int = 0
    eval_budget: int = 100_000

    def __post_init__(self) -> None:
        if not self.t0 > self.t_final > 0:
            raise ValueError("need t0 > t_final > 0")
        if not 0 < self.rate < 1:
            raise ValueError("cooling rate must be in (0,1)")
        if self.moves_per_temp < 1:
            raise ValueError("moves_per_temp must be >= 1")

    def label(self) -> str:
        return (
            f"t0={self.t0:g},rate={self.rate:g},moves={self.moves_per_temp},"
            f"tfinal={self.t_final:g},seed={self.seed},budget={self.eval_budget}"
        )


@dataclass(frozen=True)
class TraceRecord:
    eval_idx: int
    temperature: float
    cost: float
    accepted: bool
    config: str


@dataclass
class SaTrace:
    settings: SaSettings
    records: list[TraceRecord] = field(default_factory=list)
    best_config: SystemConfig | None = None
    best_cost: float = math.inf
    best_series: list[float] = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def evaluations(self) -> int:
        return len(self.records)


def metropolis_accept(delta: float, temperature: float, rng: random.Random) -> bool:
    """Accept improving moves always, worsening ones with exp(-delta/T)."""
    if delta <= 0:
        return True
    if temperature <= 0:
        return False
    return rng.random() < math.exp(-delta / temperature)


def neighbor(cfg: SystemConfig, space: DesignSpace, rng: random.Random, retries: int = 50) -> SystemConfig:
    """One feasible single-field perturbation (null move on repair exhaustion)."""
    return random_mutation(cfg, space, rng, retries=retries)


def anneal(
    wl: WorkloadSpec,
    profile: Profile,
    basis: NormalizationBasis,
    space: DesignSpace,
    consts: ppac.ModelConstants,
    settings: SaSettings,
) -> SaTrace:
    """Metropolis annealing with geometric cooling, seeded and deterministic."""
    rng = random.Random(settings.seed)
    cache: dict[str, float] = {}

    def cost_of(cfg: SystemConfig) -> float:
        canon = format_config(cfg)
        if canon not in cache:
            cache[canon] = weighted_cost(ppac.evaluate(wl, cfg, consts), basis, profile)
        return cache[canon]

    start = time.perf_counter()
    trace = SaTrace(settings=settings)
    current = sample_feasible(space, rng)
    current_cost = cost_of(current)
    trace.records.append(TraceRecord(0, settings.t0, current_cost, True, format_config(current)))
    trace.best_config, trace.best_cost = current, current_cost
    trace.best_series.append(current_cost)

    temperature = settings.t0
    evals = 1
    while temperature >= settings.t_final and evals < settings.eval_budget:
        for _ in range(settings.moves_per_temp):
            candidate = neighbor(current, space, rng)
            cand_cost = cost_of(candidate)
            accepted = metropolis_accept(cand_cost - current_cost, temperature, rng)
            trace.records.append(
                TraceRecord(evals, temperature, cand_cost, accepted, format_config(candidate))
            )
            if accepted:
                current, current_cost = candidate, cand_cost
            if cand_cost < trace.best_cost:
                trace.best_config, trace.best_cost = candidate, cand_cost
            trace.best_series.append(trace.best_cost)
            evals += 1
            if evals >= settings.eval_budget:
                break
        temperature *= settings.rate

    trace.wall_clock_s = time.perf_counter() - start
    return trace


def grid_settings(
    base: SaSettings | None = None,
    t0_values: tuple[float, ...] = T0_GRID,
    rates: tuple[float, ...] = RATE_GRID,
) -> list[SaSettings]:
    """Cartesian sweep of initial temperature and cooling rate (13 x 30 = 390
    settings by default), everything else taken from ``base``."""
    base = base if base is not None else SaSettings()
    out = []
    for t0 in t0_values:
        for rate in rates:
            out.append(
                SaSettings(
                    t0=t0, t_final=base.t_final, rate=rate,
                    moves_per_temp=base.moves_per_temp, seed=base.seed,
                    eval_budget=base.eval_budget,
                )
            )
    return out


def grid_sweep(
    wl: WorkloadSpec,
    profile: Profile,
    basis: NormalizationBasis,
    space: DesignSpace,
    consts: ppac.ModelConstants,
    base: SaSettings | None = None,
    t0_values: tuple[float, ...] = T0_GRID,
    rates: tuple[float, ...] = RATE_GRID,
) -> list[tuple[SaSettings, float, float, int]]:
    """Run the sweep; one (settings, best cost, runtime, evaluations) per point."""
    out = []
    for settings in grid_settings(base, t0_values, rates):
        trace = anneal(wl, profile, basis, space, consts, settings)
        out.append((settings, trace.best_cost, trace.wall_clock_s, trace.evaluations))
    return out
