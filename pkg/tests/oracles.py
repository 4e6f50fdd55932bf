"""Reference implementations kept deliberately naive and independent of the
package internals; tests compare the fast paths against these."""
import itertools
import math

from chipdse.design_space import LINKS_25D, LINKS_3D, PROTOCOLS_25D, ChipletSpec

IN_BYTES = 1
ACC_BYTES = 4


def _walk_blocks(m: int, k: int, n: int, bm: int, bn: int) -> int:
    """Count every operand byte loaded from DRAM by a literal block walk."""
    reads = 0
    for jb in range(math.ceil(n / bn)):
        bn_eff = min(bn, n - jb * bn)
        for ib in range(math.ceil(m / bm)):
            bm_eff = min(bm, m - ib * bm)
            reads += bm_eff * k * IN_BYTES  # stream the A row-block
            reads += k * bn_eff * IN_BYTES  # stream the B column-block
    return reads


def exhaustive_blocks(m: int, k: int, n: int, chip: ChipletSpec, dataflow: str):
    """Block choice by brute force: walk every legal multiple pair, keep the
    one with the fewest simulated loads, dataflow preference on ties."""
    a = chip.array_dim
    sram = chip.sram_kb * 1024
    bm_cap = math.ceil(m / a) * a
    bn_cap = math.ceil(n / a) * a
    candidates = [
        (bm, bn)
        for bm in range(a, bm_cap + 1, a)
        for bn in range(a, bn_cap + 1, a)
        if bm * k * IN_BYTES + k * bn * IN_BYTES + bm * bn * ACC_BYTES <= sram
    ]
    if not candidates:
        return a, a
    tie = {
        "OS": lambda p: (p[0] * p[1], p[1]),
        "WS": lambda p: (p[1], p[0]),
        "IS": lambda p: (p[0], p[1]),
    }[dataflow]
    return min(
        candidates,
        key=lambda p: (_walk_blocks(m, k, n, p[0], p[1]), tuple(-x for x in tie(p))),
    )


def simulated_dram_reads(m: int, k: int, n: int, chip: ChipletSpec, dataflow: str) -> int:
    bm, bn = exhaustive_blocks(m, k, n, chip, dataflow)
    return _walk_blocks(m, k, n, bm, bn)


def dominated_by_any(point, points) -> bool:
    return any(
        q.runtime_s <= point.runtime_s
        and q.cost <= point.cost
        and (q.runtime_s < point.runtime_s or q.cost < point.cost)
        for q in points
    )


def quadratic_frontier(points):
    """O(n^2) non-dominated filter used to verify the fast path."""
    return sorted(
        (p for p in points if not dominated_by_any(p, points)),
        key=lambda p: (p.runtime_s, p.cost, p.label),
    )


def recount_small_space(space, per_chiplet_area) -> int:
    """Independent enumeration count for a homogeneous restricted space.

    Written as plain nested loops with its own legality predicate rather
    than reusing the package enumeration machinery.
    """
    assert space.homogeneous
    count = 0
    chip_specs = [
        ChipletSpec(a, t, s)
        for a in space.array_dims
        for t in space.tech_nodes
        for s in space.sram_kbs
    ]
    for n_chips in space.counts:
        for chip in chip_specs:
            mapping_combos = (
                len(space.orders)
                * len(space.dataflows)
                * len(space.split_ks)
                * len(space.data_sharings)
            )
            pkg_combos = 0
            for integ in space.integrations:
                if integ == "2D":
                    if n_chips != 1:
                        continue
                    pairs = [("NA", "NA")]
                elif integ == "2.5D":
                    if n_chips == 1:
                        continue
                    pairs = [
                        (ic, pr)
                        for ic in LINKS_25D
                        if ic in space.interconnects
                        for pr in PROTOCOLS_25D
                        if pr in space.protocols and not (pr == "UCA" and ic == "RDL")
                    ]
                elif integ == "3D":
                    if n_chips == 1:
                        continue
                    # identical chiplets always satisfy the stack-order rule
                    pairs = [
                        (ic, "UC3")
                        for ic in LINKS_3D
                        if ic in space.interconnects and "UC3" in space.protocols
                    ]
                else:  # 2.5D+3D
                    if n_chips < 3:
                        continue
                    lateral = [
                        (ic, pr)
                        for ic in LINKS_25D
                        if ic in space.interconnects
                        for pr in PROTOCOLS_25D
                        if pr in space.protocols and not (pr == "UCA" and ic == "RDL")
                    ]
                    vertical = [
                        (ic, "UC3")
                        for ic in LINKS_3D
                        if ic in space.interconnects and "UC3" in space.protocols
                    ]
                    pairs = list(itertools.product(lateral, vertical))
                pkg_combos += len(pairs) * len(space.memories) * len(space.topologies)
            count += mapping_combos * pkg_combos
    return count
