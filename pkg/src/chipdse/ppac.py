"""Analytical surrogate models for latency, energy, area and cost.

These closed-form models trade accuracy for evaluation speed so that
millions of candidate systems can be scored.  All technology coefficients
live in a versioned constants file (see ``data/constants.json``); the
bundled defaults are inspired by public technology surveys and make no
claim of matching any particular foundry or product.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import mapping as mp
from .design_space import ChipletSpec, DesignSpace, SystemConfig, stack_partition

WAFER_DIAMETER_MM = 300.0
YIELD_CLUSTERING = 3.0  # negative-binomial clustering parameter


class ModelError(ValueError):
    """Raised when a configuration cannot be evaluated (e.g. unbuildable die)."""


@dataclass(frozen=True)
class NodeConstants:
    freq_ghz: float
    mac_pj: float
    sram_pj_per_byte: float
    pe_area_mm2: float
    sram_area_mm2_per_kb: float
    defect_density_per_mm2: float
    wafer_cost_usd: float


@dataclass(frozen=True)
class MemoryConstants:
    bw_gbps: float
    dram_pj_per_byte: float
    cost_usd: float


@dataclass(frozen=True)
class LinkConstants:
    bump_pitch_um: float
    pj_per_byte: float


@dataclass(frozen=True)
class ProtocolConstants:
    lane_rate_gbps: float
    efficiency: float


@dataclass(frozen=True)
class IntegrationConstants:
    package_base_cost_usd: float
    whitespace_factor: float


@dataclass(frozen=True)
class ModelConstants:
    node: dict[int, NodeConstants]
    memory: dict[str, MemoryConstants]
    interconnect: dict[str, LinkConstants]
    protocol: dict[str, ProtocolConstants]
    integration: dict[str, IntegrationConstants]
    topology: dict[str, float]  # bandwidth derating
    logic_overhead_factor: float
    bond_yield: float
    link_cost_usd: float
    bump_utilization: float  # usable fraction of face bumps in a 3D stack
    lane_rows: int  # bump rows along each die edge for 2.5D links

    def validate(self) -> None:
        for name, table in (("node", self.node), ("memory", self.memory),
                            ("interconnect", self.interconnect), ("protocol", self.protocol),
                            ("integration", self.integration)):
            if not table:
                raise ModelError(f"constants table {name!r} is empty")
        for node, c in self.node.items():
            if min(c.freq_ghz, c.mac_pj, c.sram_pj_per_byte, c.pe_area_mm2,
                   c.sram_area_mm2_per_kb, c.defect_density_per_mm2, c.wafer_cost_usd) <= 0:
                raise ModelError(f"non-positive constant for node {node}")
        for proto, c in self.protocol.items():
            if not 0 < c.efficiency <= 1:
                raise ModelError(f"protocol {proto} efficiency outside (0,1]")
        for topo, derate in self.topology.items():
            if not 0 < derate <= 1:
                raise ModelError(f"topology {topo} derate outside (0,1]")
        for integ, c in self.integration.items():
            if c.whitespace_factor < 1:
                raise ModelError(f"integration {integ} whitespace factor below 1")
        if not 0 < self.bond_yield <= 1:
            raise ModelError("bond yield outside (0,1]")
        if min(self.logic_overhead_factor, self.link_cost_usd,
               self.bump_utilization, self.lane_rows) <= 0:
            raise ModelError("scalar constants must be positive")


def load_constants(path: str | Path | None = None) -> ModelConstants:
    """Load model constants from JSON (bundled defaults when path is None)."""
    if path is None:
        text = resources.files("chipdse.data").joinpath("constants.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    consts = ModelConstants(
        node={int(k): NodeConstants(**v) for k, v in raw["node"].items()},
        memory={k: MemoryConstants(**v) for k, v in raw["memory"].items()},
        interconnect={k: LinkConstants(**v) for k, v in raw["interconnect"].items()},
        protocol={k: ProtocolConstants(**v) for k, v in raw["protocol"].items()},
        integration={k: IntegrationConstants(**v) for k, v in raw["integration"].items()},
        topology={k: float(v) for k, v in raw["topology"].items()},
        logic_overhead_factor=float(raw["logic_overhead_factor"]),
        bond_yield=float(raw["bond_yield"]),
        link_cost_usd=float(raw["link_cost_usd"]),
        bump_utilization=float(raw["bump_utilization"]),
        lane_rows=int(raw["lane_rows"]),
    )
    consts.validate()
    return consts


@dataclass(frozen=True)
class PpacReport:
    """Raw metrics of one (workload, configuration) evaluation."""

    latency_s: float
    energy_j: float
    area_mm2: float
    mfg_cost_usd: float
    latency_compute_s: float
    latency_d2d_s: float
    latency_write_s: float
    energy_compute_j: float
    energy_d2d_j: float
    chiplet_areas_mm2: tuple[float, ...]
    die_costs_usd: tuple[float, ...]
    package_cost_usd: float
    memory_cost_usd: float
    d2d_bandwidth_bytes_s: float


# ---------------------------------------------------------------------------
# Latency
# ---------------------------------------------------------------------------

def compute_cycles(work: mp.ChipletWork, chip: ChipletSpec, dataflow: str) -> int:
    """Systolic-array cycles for one tile.

    Tiles are issued back to back; each pass through the array costs its
    fill/drain (2A-2) plus one cycle per element of the streamed dimension.
    """
    a = chip.array_dim
    m, k, n = work.m_i, work.k_i, work.n_i
    if dataflow == "OS":
        return math.ceil(m / a) * math.ceil(n / a) * (2 * a + k - 2)
    if dataflow == "WS":
        return math.ceil(k / a) * math.ceil(n / a) * (2 * a + m - 2)
    if dataflow == "IS":
        return math.ceil(k / a) * math.ceil(m / a) * (2 * a + n - 2)
    raise ModelError(f"unknown dataflow {dataflow!r}")


def _square_side_um(area_mm2: float) -> float:
    return math.sqrt(area_mm2) * 1000.0


def d2d_bandwidth(cfg: SystemConfig, areas: tuple[float, ...], consts: ModelConstants) -> float:
    """Aggregate die-to-die bandwidth in bytes/s.

    3D stacks use face bumps across the smaller die of each bonded pair;
    2.5D links use bump rows along the smaller die edge.  A hybrid system is
    limited by the slower of its two link types.
    """
    pkg = cfg.package
    if pkg.integration == "2D" or cfg.count < 2:
        raise ModelError("no die-to-die link exists in a 2D single-die system")
    derate = consts.topology[pkg.topology]

    def vertical_bw(stacks, ic: str, proto: str) -> float:
        pitch = consts.interconnect[ic].bump_pitch_um
        min_adjacent = None
        for stack in stacks:
            idx = list(stack)
            for lo, hi in zip(idx, idx[1:]):
                pair_min = min(areas[lo], areas[hi])
                if min_adjacent is None or pair_min < min_adjacent:
                    min_adjacent = pair_min
        assert min_adjacent is not None
        lanes = math.floor(min_adjacent * 1e6 / pitch**2) * consts.bump_utilization
        rate = consts.protocol[proto]
        return lanes * rate.lane_rate_gbps * 1e9 * rate.efficiency * derate / 8.0

    def lateral_bw(member_areas, ic: str, proto: str) -> float:
        pitch = consts.interconnect[ic].bump_pitch_um
        min_perimeter = min(4.0 * _square_side_um(a) for a in member_areas)
        lanes = math.floor(min_perimeter / pitch) * consts.lane_rows
        rate = consts.protocol[proto]
        return lanes * rate.lane_rate_gbps * 1e9 * rate.efficiency * derate / 8.0

    if pkg.integration == "3D":
        return vertical_bw((range(cfg.count),), pkg.interconnect, pkg.protocol)
    if pkg.integration == "2.5D":
        return lateral_bw(areas, pkg.interconnect, pkg.protocol)

    # hybrid: vertical bonds inside the stacks, one lateral link between them
    stacks = [s for s in stack_partition(cfg.count) if len(s) >= 2]
    assert pkg.interconnect_3d is not None and pkg.protocol_3d is not None
    vbw = vertical_bw(stacks, pkg.interconnect_3d, pkg.protocol_3d)
    stack_bases = [max(areas[i] for i in s) for s in stack_partition(cfg.count) if len(s) > 0]
    lbw = lateral_bw(stack_bases, pkg.interconnect, pkg.protocol)
    return min(vbw, lbw)


def system_latency(
    cfg: SystemConfig,
    result: mp.MappingResult,
    consts: ModelConstants,
    areas: tuple[float, ...],
) -> tuple[float, float, float, float, float]:
    """Returns (latency_s, compute, d2d, write, d2d_bw)."""
    mem_bw = consts.memory[cfg.package.memory].bw_gbps * 1e9 / 8.0
    compute = 0.0
    for work, chip in zip(result.works, cfg.chiplets):
        if work.macs == 0:
            continue
        cycles = compute_cycles(work, chip, cfg.mapping.dataflow)
        t = cycles / (consts.node[chip.tech_node].freq_ghz * 1e9)
        t += work.dram_read_bytes / mem_bw
        compute = max(compute, t)

    bw = 0.0
    d2d = 0.0
    if cfg.package.integration != "2D" and cfg.count > 1:
        bw = d2d_bandwidth(cfg, areas, consts)
        d2d = result.total_d2d_bytes / bw

    write = max(w.dram_write_bytes for w in result.works) / mem_bw
    return compute + d2d + write, compute, d2d, write, bw


# ---------------------------------------------------------------------------
# Energy
# ---------------------------------------------------------------------------

SRAM_BYTES_PER_MAC = 2  # one operand fetch plus one accumulator update


def _d2d_pj_per_byte(cfg: SystemConfig, consts: ModelConstants) -> float:
    pkg = cfg.package
    if pkg.integration == "2D":
        return 0.0
    pj = consts.interconnect[pkg.interconnect].pj_per_byte
    if pkg.integration == "2.5D+3D":
        assert pkg.interconnect_3d is not None
        # traffic crosses both link types; charge the costlier one
        pj = max(pj, consts.interconnect[pkg.interconnect_3d].pj_per_byte)
    return pj


def system_energy(
    cfg: SystemConfig, result: mp.MappingResult, consts: ModelConstants
) -> tuple[float, float, float]:
    """Returns (energy_j, compute_j, d2d_j)."""
    dram_pj = consts.memory[cfg.package.memory].dram_pj_per_byte
    compute_pj = 0.0
    for work, chip in zip(result.works, cfg.chiplets):
        node = consts.node[chip.tech_node]
        compute_pj += (work.dram_read_bytes + work.dram_write_bytes) * dram_pj
        compute_pj += work.macs * node.mac_pj
        compute_pj += SRAM_BYTES_PER_MAC * work.macs * node.sram_pj_per_byte
    d2d_pj = result.total_d2d_bytes * _d2d_pj_per_byte(cfg, consts)
    return (compute_pj + d2d_pj) * 1e-12, compute_pj * 1e-12, d2d_pj * 1e-12


# ---------------------------------------------------------------------------
# Area
# ---------------------------------------------------------------------------

def chiplet_area(chip: ChipletSpec, consts: ModelConstants) -> float:
    node = consts.node[chip.tech_node]
    raw = chip.array_dim**2 * node.pe_area_mm2 + chip.sram_kb * node.sram_area_mm2_per_kb
    return raw * consts.logic_overhead_factor


def _bipartition_box(areas: list[float], horizontal: bool) -> tuple[float, float]:
    """Recursive balanced bipartition of square dies; returns (w, h) in mm."""
    if len(areas) == 1:
        side = math.sqrt(areas[0])
        return side, side
    ordered = sorted(areas, reverse=True)
    groups: tuple[list[float], list[float]] = ([], [])
    totals = [0.0, 0.0]
    for a in ordered:
        target = 0 if totals[0] <= totals[1] else 1
        groups[target].append(a)
        totals[target] += a
    if not groups[1]:  # degenerate, should not happen for len >= 2
        groups = (groups[0][:-1], [groups[0][-1]])
    w1, h1 = _bipartition_box(groups[0], not horizontal)
    w2, h2 = _bipartition_box(groups[1], not horizontal)
    if horizontal:
        return w1 + w2, max(h1, h2)
    return max(w1, w2), h1 + h2


def system_area(
    cfg: SystemConfig, areas: tuple[float, ...], consts: ModelConstants
) -> tuple[float, tuple[float, float]]:
    """(footprint mm^2, bounding box).  Monolithic and 3D systems are bounded
    by the base die; 2.5D floorplans add whitespace to the bounding box;
    hybrids collapse each stack to its base-die square first."""
    integ = cfg.package.integration
    if integ in ("2D", "3D"):
        base = max(areas)
        side = math.sqrt(base)
        return base, (side, side)
    whitespace = consts.integration[integ].whitespace_factor
    if integ == "2.5D":
        members = list(areas)
    else:
        members = [max(areas[i] for i in s) for s in stack_partition(cfg.count)]
    w, h = _bipartition_box(members, horizontal=True)
    return w * h * whitespace, (w, h)


# ---------------------------------------------------------------------------
# Manufacturing cost
# ---------------------------------------------------------------------------

def die_yield(area_mm2: float, defect_density_per_mm2: float) -> float:
    """Negative-binomial die yield; in (0, 1] and decreasing in area."""
    return (1.0 + area_mm2 * defect_density_per_mm2 / YIELD_CLUSTERING) ** (-YIELD_CLUSTERING)


def dies_per_wafer(area_mm2: float) -> float:
    """Gross dies on a 300 mm wafer, with edge loss."""
    radius = WAFER_DIAMETER_MM / 2.0
    wafer_area = math.pi * radius**2
    if area_mm2 >= wafer_area:
        raise ModelError(f"die area {area_mm2:.0f} mm^2 exceeds the wafer")
    gross = wafer_area / area_mm2 - math.pi * WAFER_DIAMETER_MM / math.sqrt(2.0 * area_mm2)
    if gross < 1.0:
        raise ModelError(f"die area {area_mm2:.0f} mm^2 yields no whole die per wafer")
    return gross


def die_cost(area_mm2: float, tech_node: int, consts: ModelConstants) -> float:
    node = consts.node[tech_node]
    return node.wafer_cost_usd / dies_per_wafer(area_mm2) / die_yield(
        area_mm2, node.defect_density_per_mm2
    )


def mfg_cost(
    cfg: SystemConfig, areas: tuple[float, ...], consts: ModelConstants
) -> tuple[float, tuple[float, ...], float, float]:
    """Returns (total_usd, per-die costs, package cost, memory cost)."""
    dies = tuple(
        die_cost(area, chip.tech_node, consts) for area, chip in zip(areas, cfg.chiplets)
    )
    links = cfg.count - 1
    package = consts.integration[cfg.package.integration].package_base_cost_usd
    if links > 0:
        package += links * consts.link_cost_usd / consts.bond_yield**links
    memory = consts.memory[cfg.package.memory].cost_usd
    return sum(dies) + package + memory, dies, package, memory


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def evaluate(wl: mp.WorkloadSpec, cfg: SystemConfig, consts: ModelConstants) -> PpacReport:
    """Score one (workload, configuration) pair; deterministic and pure."""
    result = mp.map_workload(wl, cfg)
    areas = tuple(chiplet_area(c, consts) for c in cfg.chiplets)
    latency, l_compute, l_d2d, l_write, bw = system_latency(cfg, result, consts, areas)
    energy, e_compute, e_d2d = system_energy(cfg, result, consts)
    area, _box = system_area(cfg, areas, consts)
    total_cost, dies, package, memory = mfg_cost(cfg, areas, consts)
    return PpacReport(
        latency_s=latency,
        energy_j=energy,
        area_mm2=area,
        mfg_cost_usd=total_cost,
        latency_compute_s=l_compute,
        latency_d2d_s=l_d2d,
        latency_write_s=l_write,
        energy_compute_j=e_compute,
        energy_d2d_j=e_d2d,
        chiplet_areas_mm2=areas,
        die_costs_usd=dies,
        package_cost_usd=package,
        memory_cost_usd=memory,
        d2d_bandwidth_bytes_s=bw,
    )


def default_space(consts: ModelConstants, rules=()) -> DesignSpace:
    """Full design space wired to this constants set (for the stack rule)."""
    return DesignSpace(rules=tuple(rules), area_fn=lambda chip: chiplet_area(chip, consts))
