"""GEMM partitioning across chiplets and the traffic it implies.

A workload ``C[m,n] = A[m,k] @ B[k,n]`` is split across the chiplets of a
configuration either along N (proportionally to compute throughput) or, with
split-K enabled, evenly along the reduction dimension K with partial sums
aggregated over die-to-die links.  DRAM traffic per chiplet follows a blocked
reuse model bounded by the local SRAM.

Operand widths are fixed: int8 inputs, fp32 accumulators and outputs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .design_space import (
    ChipletSpec,
    MappingSpec,
    ORDER_ASCENDING,
    SystemConfig,
)

IN_BYTES = 1
ACC_BYTES = 4
OUT_BYTES = 4


@dataclass(frozen=True)
class WorkloadSpec:
    m: int
    k: int
    n: int
    name: str = ""

    def __post_init__(self) -> None:
        if min(self.m, self.k, self.n) < 1:
            raise ValueError(f"workload dims must be >= 1, got {(self.m, self.k, self.n)}")

    @property
    def macs(self) -> int:
        return self.m * self.k * self.n


def load_workloads(path: str | Path | None = None) -> list[WorkloadSpec]:
    """Workload definitions from JSON (array of {name, m, k, n} objects);
    the bundled file carries the six reference GEMMs."""
    if path is None:
        text = resources.files("chipdse.data").joinpath("workloads.json").read_text()
    else:
        text = Path(path).read_text()
    return [WorkloadSpec(m=e["m"], k=e["k"], n=e["n"], name=e["name"]) for e in json.loads(text)]


@dataclass(frozen=True)
class ChipletWork:
    """Tile assigned to one chiplet plus its traffic volumes (bytes)."""

    m_i: int
    k_i: int
    n_i: int
    macs: int
    dram_read_bytes: int = 0
    dram_write_bytes: int = 0
    d2d_send_bytes: int = 0
    # portion of dram_read_bytes that belongs to operand panels every
    # chiplet needs; this is what data sharing can move onto D2D links
    shared_operand_read_bytes: int = 0


@dataclass(frozen=True)
class MappingResult:
    works: tuple[ChipletWork, ...]
    total_d2d_bytes: int
    shared_dram_savings_bytes: int = 0
    owner_index: int = 0  # first chiplet in allocation order: sharing owner / split-K root


def allocation_order(cfg: SystemConfig) -> list[int]:
    """Chiplet indices ranked by the throughput proxy array_dim^2.

    Ascending order starts allocation at the smallest chiplet, descending at
    the largest.  Throughput ties are broken by chiplet identity (node, then
    SRAM) rather than list position, so the ranking, and with it remainder
    and owner assignment, is invariant under permutations of the list.
    """
    ascending = cfg.mapping.order == ORDER_ASCENDING

    def key(i: int):
        c = cfg.chiplets[i]
        primary = c.array_dim**2 if ascending else -(c.array_dim**2)
        return (primary, c.tech_node, c.sram_kb, i)

    return sorted(range(cfg.count), key=key)


_BLOCK_TIE = {
    # preference on equal read volume: the stationary operand grows first
    "OS": lambda bm, bn: (bm * bn, bn),
    "WS": lambda bm, bn: (bn, bm),
    "IS": lambda bm, bn: (bm, bn),
}


def choose_blocks(m: int, k: int, n: int, chip: ChipletSpec, dataflow: str) -> tuple[int, int]:
    """Pick SRAM-resident block sizes (Bm, Bn), multiples of the array dim.

    The budget holds an A-panel block, a B-panel block and the accumulator
    block: Bm*k + k*Bn + 4*Bm*Bn <= sram bytes.  Maximizing reuse means
    minimizing the bytes re-streamed from DRAM, so the blocks minimize the
    read volume under the budget; read ties favor the stationary operand of
    the dataflow (OS the output block, WS the weight panel, IS the input
    panel).  If even an AxA block overflows the SRAM both blocks fall back
    to A.  Bigger SRAM only ever widens the candidate set, so read volume
    is non-increasing in the buffer size.
    """
    a = chip.array_dim
    sram = chip.sram_kb * 1024
    bm_cap = math.ceil(m / a) * a
    bn_cap = math.ceil(n / a) * a
    tie = _BLOCK_TIE[dataflow]

    def fits(bm: int, bn: int) -> bool:
        return bm * k * IN_BYTES + k * bn * IN_BYTES + bm * bn * ACC_BYTES <= sram

    def max_bn(bm: int) -> int:
        budget = (sram - bm * k * IN_BYTES) / (k * IN_BYTES + bm * ACC_BYTES)
        return min(bn_cap, int(budget // a) * a)

    if not fits(a, a):
        return a, a

    # only (bm, largest feasible bn) pairs can be read-minimal or win a tie
    best: tuple | None = None
    for bm in range(a, bm_cap + 1, a):
        if not fits(bm, a):
            break
        bn = max(a, max_bn(bm))
        reads = m * k * math.ceil(n / bn) + k * n * math.ceil(m / bm)
        key = (reads, tuple(-x for x in tie(bm, bn)))
        if best is None or key < best[0]:
            best = (key, (bm, bn))
    assert best is not None
    return best[1]


def dram_traffic(work: ChipletWork, chip: ChipletSpec, mapping: MappingSpec) -> tuple[int, int]:
    """(read_bytes, write_bytes) for one chiplet's tile under blocked reuse.

    Each operand panel is streamed once per block pass: the A panel is read
    ceil(n/Bn) times and the B panel ceil(m/Bm) times.
    """
    bm, bn = choose_blocks(work.m_i, work.k_i, work.n_i, chip, mapping.dataflow)
    reads = (
        work.m_i * work.k_i * IN_BYTES * math.ceil(work.n_i / bn)
        + work.k_i * work.n_i * IN_BYTES * math.ceil(work.m_i / bm)
    )
    writes = work.m_i * work.n_i * OUT_BYTES
    return reads, writes


def _a_panel_reads(work: ChipletWork, chip: ChipletSpec, mapping: MappingSpec) -> int:
    bm, bn = choose_blocks(work.m_i, work.k_i, work.n_i, chip, mapping.dataflow)
    return work.m_i * work.k_i * IN_BYTES * math.ceil(work.n_i / bn)


def partition(wl: WorkloadSpec, cfg: SystemConfig) -> MappingResult:
    """Split a workload across the chiplets of a configuration.

    Without split-K the N dimension is divided proportionally to array_dim^2
    with remainders going to earlier-ranked chiplets; each chiplet writes its
    own output slice.  With split-K the reduction dimension is divided evenly
    (remainder to earlier-ranked), every chiplet covers the full MxN output,
    and all non-root chiplets ship fp32 partial sums to the root, which is
    the only one writing results to DRAM.
    """
    rank = allocation_order(cfg)
    count = cfg.count
    owner = rank[0]
    mapping = cfg.mapping

    dims: list[tuple[int, int, int]] = [(0, 0, 0)] * count
    if mapping.split_k:
        q, r = divmod(wl.k, count)
        for pos, idx in enumerate(rank):
            k_i = q + (1 if pos < r else 0)
            dims[idx] = (wl.m, k_i, wl.n)
    else:
        weights = [cfg.chiplets[i].array_dim ** 2 for i in range(count)]
        total_w = sum(weights)
        quotas = [wl.n * weights[i] // total_w for i in range(count)]
        remainder = wl.n - sum(quotas)
        for pos, idx in enumerate(rank):
            if remainder <= 0:
                break
            quotas[idx] += 1
            remainder -= 1
        for idx in range(count):
            dims[idx] = (wl.m, wl.k, quotas[idx])

    works: list[ChipletWork] = []
    for idx in range(count):
        m_i, k_i, n_i = dims[idx]
        macs = m_i * k_i * n_i
        if macs == 0:
            works.append(ChipletWork(m_i, k_i, n_i, 0))
            continue
        work = ChipletWork(m_i, k_i, n_i, macs)
        reads, writes = dram_traffic(work, cfg.chiplets[idx], mapping)
        if mapping.split_k:
            d2d = 0 if idx == owner else wl.m * wl.n * ACC_BYTES
            writes = writes if idx == owner else 0
            shared = reads  # every chiplet walks full panels along its K slice
        else:
            d2d = 0
            shared = _a_panel_reads(work, cfg.chiplets[idx], mapping)
        if count == 1:
            shared = 0  # no peer to share with
        works.append(
            replace(
                work,
                dram_read_bytes=reads,
                dram_write_bytes=writes,
                d2d_send_bytes=d2d,
                shared_operand_read_bytes=shared,
            )
        )

    total_d2d = sum(w.d2d_send_bytes for w in works)
    return MappingResult(
        works=tuple(works), total_d2d_bytes=total_d2d, owner_index=owner
    )


def apply_data_sharing(result: MappingResult, mapping: MappingSpec) -> MappingResult:
    """Convert redundant DRAM reads into die-to-die broadcasts.

    One owner chiplet (the first in allocation order) keeps reading the
    shared operand panels from DRAM and forwards them to its peers; each
    peer's shared-panel read volume moves from DRAM onto the D2D link.
    Identity when sharing is off or only one chiplet exists.
    """
    if not mapping.data_sharing or len(result.works) < 2:
        return result
    owner = result.owner_index
    moved = 0
    works = list(result.works)
    owner_extra = 0
    for idx, work in enumerate(works):
        if idx == owner or work.shared_operand_read_bytes == 0:
            continue
        volume = work.shared_operand_read_bytes
        works[idx] = replace(
            work,
            dram_read_bytes=work.dram_read_bytes - volume,
            shared_operand_read_bytes=0,
        )
        owner_extra += volume
        moved += volume
    works[owner] = replace(
        works[owner], d2d_send_bytes=works[owner].d2d_send_bytes + owner_extra
    )
    return MappingResult(
        works=tuple(works),
        total_d2d_bytes=sum(w.d2d_send_bytes for w in works),
        shared_dram_savings_bytes=result.shared_dram_savings_bytes + moved,
        owner_index=owner,
    )


def map_workload(wl: WorkloadSpec, cfg: SystemConfig) -> MappingResult:
    """Partition plus data sharing: the input the PPAC models consume."""
    return apply_data_sharing(partition(wl, cfg), cfg.mapping)
