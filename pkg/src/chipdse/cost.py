"""Scalar system cost: median-normalized PPAC metrics under profile weights."""
from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from . import ppac
from .design_space import DesignSpace, SystemConfig, format_config, sample_uniform
from .mapping import WorkloadSpec


@dataclass(frozen=True)
class Profile:
    """Non-negative weights for energy, area, latency and manufacturing cost."""

    alpha: float
    beta: float
    gamma: float
    theta: float
    name: str = ""

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.gamma, self.theta) < 0:
            raise ValueError("profile weights must be non-negative")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.theta)


PROFILES = {
    "balance": Profile(1.0, 1.0, 1.0, 1.0, "balance"),
    "mobile": Profile(0.8, 0.2, 0.1, 0.1, "mobile"),
    "automotive": Profile(0.1, 0.1, 0.7, 0.7, "automotive"),
    "wearables": Profile(0.6, 0.6, 0.1, 0.1, "wearables"),
}


@dataclass(frozen=True)
class NormalizationBasis:
    """Per-workload medians of the raw metrics over a uniform sample."""

    workload: str
    n: int
    seed: int
    median_energy_j: float
    median_area_mm2: float
    median_latency_s: float
    median_cost_usd: float

    def __post_init__(self) -> None:
        if min(self.median_energy_j, self.median_area_mm2,
               self.median_latency_s, self.median_cost_usd) <= 0:
            raise ValueError("basis medians must be positive")


def compute_basis(
    wl: WorkloadSpec,
    space: DesignSpace,
    consts: ppac.ModelConstants,
    n: int = 10_000,
    seed: int = 0,
) -> NormalizationBasis:
    """Evaluate a seeded uniform sample and record the per-metric medians.

    ``statistics.median`` averages the middle pair for even sample sizes.
    """
    reports = [ppac.evaluate(wl, cfg, consts) for cfg in sample_uniform(space, n, seed)]
    return NormalizationBasis(
        workload=wl.name,
        n=n,
        seed=seed,
        median_energy_j=statistics.median(r.energy_j for r in reports),
        median_area_mm2=statistics.median(r.area_mm2 for r in reports),
        median_latency_s=statistics.median(r.latency_s for r in reports),
        median_cost_usd=statistics.median(r.mfg_cost_usd for r in reports),
    )


def normalized_metrics(report: ppac.PpacReport, basis: NormalizationBasis) -> tuple[float, float, float, float]:
    return (
        report.energy_j / basis.median_energy_j,
        report.area_mm2 / basis.median_area_mm2,
        report.latency_s / basis.median_latency_s,
        report.mfg_cost_usd / basis.median_cost_usd,
    )


def weighted_cost(report: ppac.PpacReport, basis: NormalizationBasis, profile: Profile) -> float:
    ne, na, nl, nc = normalized_metrics(report, basis)
    return profile.alpha * ne + profile.beta * na + profile.gamma * nl + profile.theta * nc


def argmin_over(
    configs: Iterable[SystemConfig],
    wl: WorkloadSpec,
    profile: Profile,
    basis: NormalizationBasis,
    consts: ppac.ModelConstants,
) -> tuple[SystemConfig, float]:
    """Exact minimum over a stream; cost ties go to the lexicographically
    smallest canonical string so the result never depends on stream order."""
    best: tuple[float, str, SystemConfig] | None = None
    for cfg in configs:
        cost = weighted_cost(ppac.evaluate(wl, cfg, consts), basis, profile)
        key = (cost, format_config(cfg))
        if best is None or key < (best[0], best[1]):
            best = (key[0], key[1], cfg)
    if best is None:
        raise ValueError("empty configuration stream")
    return best[2], best[0]


def save_basis(basis: NormalizationBasis, path: str | Path) -> None:
    payload = {
        "workload": basis.workload,
        "n": basis.n,
        "seed": basis.seed,
        "medians": {
            "energy_j": basis.median_energy_j,
            "area_mm2": basis.median_area_mm2,
            "latency_s": basis.median_latency_s,
            "cost_usd": basis.median_cost_usd,
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_basis(path: str | Path) -> NormalizationBasis:
    raw = json.loads(Path(path).read_text())
    medians = raw["medians"]
    return NormalizationBasis(
        workload=raw["workload"],
        n=int(raw["n"]),
        seed=int(raw["seed"]),
        median_energy_j=float(medians["energy_j"]),
        median_area_mm2=float(medians["area_mm2"]),
        median_latency_s=float(medians["latency_s"]),
        median_cost_usd=float(medians["cost_usd"]),
    )


def resolve_profile(spec: str) -> Profile:
    """Profile by name (see PROFILES) or as explicit 'a,b,c,d' weights."""
    name = spec.strip().lower()
    if name in PROFILES:
        return PROFILES[name]
    parts = spec.split(",")
    if len(parts) == 4:
        a, b, g, t = (float(p) for p in parts)
        return Profile(a, b, g, t, name="custom")
    raise ValueError(f"unknown profile {spec!r}; use one of {sorted(PROFILES)} or a,b,c,d weights")
