"""Configuration vector for chiplet-based accelerator systems.

A system configuration bundles an ordered list of chiplets (each a systolic
array with a local SRAM buffer on some technology node), a workload-mapping
strategy, and a packaging choice.  Shorthand grammar:

    chiplet   A-T-S     e.g. 64-7-512    (array dim, node nm, SRAM KB)
    mapping   O-D-K     e.g. 1-OS-0      (order, dataflow, split-K)
    package   I-P-M     e.g. 2.5D-RDL-DDR5

The long canonical form serialises a full configuration for CSV logs:

    <count>|<A-T-S>;...|<O-D-K>|<share>|<I-P-M>|<proto>|<topo>

All types here are immutable values; every function is pure, so they are
safe to use from any number of workers.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

ARRAY_DIMS = (64, 96, 128, 160, 192)
TECH_NODES = (7, 10, 14)
SRAM_KBS = (256, 512, 768, 1024, 1536, 2048)
CHIPLET_COUNTS = (1, 2, 3, 4, 5, 6)

ORDER_DESCENDING = 0  # allocate tiles starting from the largest chiplet
ORDER_ASCENDING = 1   # allocate tiles starting from the smallest chiplet
ORDERS = (ORDER_DESCENDING, ORDER_ASCENDING)

DATAFLOWS = ("OS", "WS", "IS")

INTEGRATIONS = ("2D", "2.5D", "3D", "2.5D+3D")
# Pass/Acti: passive/active interposer, uB: microbump, HB: hybrid bond.
INTERCONNECTS = ("NA", "RDL", "EMIB", "Pass", "Acti", "uB", "HB")
MEMORIES = ("DDR4", "DDR5", "HBM2", "HBM3")
PROTOCOLS = ("NA", "UCS", "UCA", "UC3", "AIB", "BoW")
TOPOLOGIES = ("ring", "mesh", "star")

LINKS_25D = ("RDL", "EMIB", "Pass", "Acti")
LINKS_3D = ("uB", "HB")
PROTOCOLS_25D = ("UCS", "UCA", "AIB", "BoW")
PROTOCOLS_3D = ("UC3",)
# UCIe Advanced needs the wire density of a bridge or interposer; plain
# fan-out RDL cannot carry it.
_UCA_LINKS = ("EMIB", "Pass", "Acti")

_INTERCONNECT_ALIASES = {
    "µB": "uB",
    "Microbump": "uB",
    "HybridBond": "HB",
    "PassiveInterposer": "Pass",
    "ActiveInterposer": "Acti",
}

MAX_SAMPLE_DRAWS = 10_000_000


class ConfigParseError(ValueError):
    """Raised for malformed or out-of-range shorthand strings."""


class BlacklistError(ValueError):
    """Raised when a blacklist rules file cannot be used (fail closed)."""


class InfeasibleSpaceError(RuntimeError):
    """Raised when rejection sampling exhausts its draw budget."""


def min_sram_kb(array_dim: int) -> int:
    """Smallest allowed SRAM able to hold one AxA tile of 4-byte accumulators."""
    need = math.ceil(4 * array_dim * array_dim / 1024)
    for cap in SRAM_KBS:
        if cap >= need:
            return cap
    return SRAM_KBS[-1]


@dataclass(frozen=True)
class ChipletSpec:
    array_dim: int
    tech_node: int
    sram_kb: int

    def __post_init__(self) -> None:
        if self.array_dim not in ARRAY_DIMS:
            raise ConfigParseError(f"array dim {self.array_dim} not in {ARRAY_DIMS}")
        if self.tech_node not in TECH_NODES:
            raise ConfigParseError(f"tech node {self.tech_node} not in {TECH_NODES}")
        if self.sram_kb not in SRAM_KBS:
            raise ConfigParseError(f"sram {self.sram_kb} KB not in {SRAM_KBS}")


@dataclass(frozen=True)
class MappingSpec:
    order: int = ORDER_DESCENDING
    dataflow: str = "OS"
    split_k: bool = False
    data_sharing: bool = False

    def __post_init__(self) -> None:
        if self.order not in ORDERS:
            raise ConfigParseError(f"assignment order {self.order} not in {ORDERS}")
        if self.dataflow not in DATAFLOWS:
            raise ConfigParseError(f"dataflow {self.dataflow!r} not in {DATAFLOWS}")


@dataclass(frozen=True)
class PackageSpec:
    """Packaging choice.

    For 2.5D+3D hybrids ``interconnect``/``protocol`` describe the lateral
    (interposer level) link and ``interconnect_3d``/``protocol_3d`` the
    vertical bond inside the stacks.  For every other integration style the
    ``_3d`` fields stay ``None``.

    Cross-field legality (protocol/interconnect/integration pairing) is the
    job of :func:`check_feasible`, not of the constructor, so that illegal
    combinations can be represented, checked, and reported.
    """

    integration: str
    interconnect: str
    memory: str
    protocol: str
    topology: str = "ring"
    interconnect_3d: str | None = None
    protocol_3d: str | None = None

    def __post_init__(self) -> None:
        if self.integration not in INTEGRATIONS:
            raise ConfigParseError(f"integration {self.integration!r} not in {INTEGRATIONS}")
        if self.interconnect not in INTERCONNECTS:
            raise ConfigParseError(f"interconnect {self.interconnect!r} not in {INTERCONNECTS}")
        if self.memory not in MEMORIES:
            raise ConfigParseError(f"memory {self.memory!r} not in {MEMORIES}")
        if self.protocol not in PROTOCOLS:
            raise ConfigParseError(f"protocol {self.protocol!r} not in {PROTOCOLS}")
        if self.topology not in TOPOLOGIES:
            raise ConfigParseError(f"topology {self.topology!r} not in {TOPOLOGIES}")
        if self.interconnect_3d is not None and self.interconnect_3d not in INTERCONNECTS:
            raise ConfigParseError(f"3D interconnect {self.interconnect_3d!r} not in {INTERCONNECTS}")
        if self.protocol_3d is not None and self.protocol_3d not in PROTOCOLS:
            raise ConfigParseError(f"3D protocol {self.protocol_3d!r} not in {PROTOCOLS}")


@dataclass(frozen=True)
class SystemConfig:
    chiplets: tuple[ChipletSpec, ...]
    mapping: MappingSpec
    package: PackageSpec

    def __post_init__(self) -> None:
        object.__setattr__(self, "chiplets", tuple(self.chiplets))
        if not 1 <= len(self.chiplets) <= 6:
            raise ConfigParseError(f"chiplet count {len(self.chiplets)} outside 1..6")

    @property
    def count(self) -> int:
        return len(self.chiplets)


def stack_partition(count: int) -> tuple[range, range]:
    """Chiplet index ranges of the two vertical stacks of a 2.5D+3D hybrid.

    Convention: the first ceil(count/2) chiplets form stack one, the rest
    stack two.  Within a stack, list order is bottom to top.
    """
    first = math.ceil(count / 2)
    return range(0, first), range(first, count)


def legal_link_pairs(integration: str) -> tuple[tuple[str, str], ...]:
    """(interconnect, protocol) pairs compatible with an integration style.

    For 2.5D+3D this returns the lateral-link pairs; combine with the 3D
    pairs for the vertical bond.
    """
    if integration == "2D":
        return (("NA", "NA"),)
    if integration == "3D":
        return tuple((ic, "UC3") for ic in LINKS_3D)
    pairs = []
    for ic in LINKS_25D:
        for proto in PROTOCOLS_25D:
            if proto == "UCA" and ic not in _UCA_LINKS:
                continue
            pairs.append((ic, proto))
    return tuple(pairs)


# ---------------------------------------------------------------------------
# Shorthand parsing / formatting
# ---------------------------------------------------------------------------

def format_chiplet(chip: ChipletSpec) -> str:
    return f"{chip.array_dim}-{chip.tech_node}-{chip.sram_kb}"


def format_mapping(mapping: MappingSpec) -> str:
    return f"{mapping.order}-{mapping.dataflow}-{int(mapping.split_k)}"


def format_package(pkg: PackageSpec) -> str:
    if pkg.integration == "2.5D+3D":
        ic = f"{pkg.interconnect_3d}/{pkg.interconnect}"
    else:
        ic = pkg.interconnect
    return f"{pkg.integration}-{ic}-{pkg.memory}"


def format_protocol(pkg: PackageSpec) -> str:
    if pkg.integration == "2.5D+3D":
        return f"{pkg.protocol_3d}/{pkg.protocol}"
    return pkg.protocol


def format_config(cfg: SystemConfig) -> str:
    """Canonical long-form serialisation; inverted by :func:`parse_config`."""
    chips = ";".join(format_chiplet(c) for c in cfg.chiplets)
    return "|".join(
        [
            str(cfg.count),
            chips,
            format_mapping(cfg.mapping),
            str(int(cfg.mapping.data_sharing)),
            format_package(cfg.package),
            format_protocol(cfg.package),
            cfg.package.topology,
        ]
    )


def _int_token(token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ConfigParseError(f"{what} token {token!r} is not an integer") from None


def parse_chiplet(text: str) -> ChipletSpec:
    parts = text.strip().split("-")
    if len(parts) != 3:
        raise ConfigParseError(f"bad chiplet shorthand {text!r}, expected A-T-S")
    a = _int_token(parts[0], "array dim")
    t = _int_token(parts[1], "tech node")
    s = _int_token(parts[2], "sram")
    return ChipletSpec(a, t, s)


def parse_mapping(text: str) -> MappingSpec:
    parts = text.strip().split("-")
    if len(parts) != 3:
        raise ConfigParseError(f"bad mapping shorthand {text!r}, expected O-D-K")
    order = _int_token(parts[0], "order")
    if parts[2] not in ("0", "1"):
        raise ConfigParseError(f"split-K token {parts[2]!r} must be 0 or 1")
    return MappingSpec(order=order, dataflow=parts[1], split_k=parts[2] == "1")


def _normalize_interconnect(token: str) -> str:
    return _INTERCONNECT_ALIASES.get(token, token)


def _default_protocol(integration: str) -> str:
    if integration == "2D":
        return "NA"
    if integration == "3D":
        return "UC3"
    return "UCS"


def parse_package(text: str) -> PackageSpec:
    """Decode an I-P-M string.

    The shorthand carries no protocol or topology; the protocol defaults to
    the natural one for the integration style (NA for 2D, UC3 for 3D, UCS
    otherwise) and the topology to a ring.
    """
    parts = text.strip().split("-")
    if len(parts) != 3:
        raise ConfigParseError(f"bad package shorthand {text!r}, expected I-P-M")
    integration, ic_token, memory = parts
    if integration not in INTEGRATIONS:
        raise ConfigParseError(f"integration {integration!r} not in {INTEGRATIONS}")

    ic_3d: str | None = None
    proto_3d: str | None = None
    if "/" in ic_token:
        if integration != "2.5D+3D":
            raise ConfigParseError(f"dual interconnect {ic_token!r} only valid for 2.5D+3D")
        top, lateral = ic_token.split("/", 1)
        ic_3d = _normalize_interconnect(top)
        ic = _normalize_interconnect(lateral)
        proto_3d = "UC3"
    else:
        ic = _normalize_interconnect(ic_token)
        if integration == "2.5D+3D":
            raise ConfigParseError("2.5D+3D packages need a <3D>/<2.5D> interconnect pair")

    pkg = PackageSpec(
        integration=integration,
        interconnect=ic,
        memory=memory,
        protocol=_default_protocol(integration),
        interconnect_3d=ic_3d,
        protocol_3d=proto_3d,
    )
    _check_link_pairing(pkg)
    return pkg


def _check_link_pairing(pkg: PackageSpec) -> None:
    """Raise if the interconnect does not match the integration style."""
    if pkg.integration == "2D":
        if pkg.interconnect != "NA":
            raise ConfigParseError("2D systems have no die-to-die interconnect (use NA)")
        return
    if pkg.interconnect == "NA":
        raise ConfigParseError(f"{pkg.integration} systems need a die-to-die interconnect")
    if pkg.integration == "2.5D" and pkg.interconnect not in LINKS_25D:
        raise ConfigParseError(f"{pkg.interconnect} is not a 2.5D interconnect")
    if pkg.integration == "3D" and pkg.interconnect not in LINKS_3D:
        raise ConfigParseError(f"{pkg.interconnect} is not a 3D bond")
    if pkg.integration == "2.5D+3D":
        if pkg.interconnect not in LINKS_25D:
            raise ConfigParseError(f"{pkg.interconnect} is not a valid lateral link for 2.5D+3D")
        if pkg.interconnect_3d not in LINKS_3D:
            raise ConfigParseError(f"{pkg.interconnect_3d} is not a valid vertical bond for 2.5D+3D")


def _parse_protocol_token(token: str, pkg: PackageSpec) -> PackageSpec:
    if "/" in token:
        if pkg.integration != "2.5D+3D":
            raise ConfigParseError(f"dual protocol {token!r} only valid for 2.5D+3D")
        top, lateral = token.split("/", 1)
        if top == "UC3" and lateral == "S":  # table shorthand UC3/S
            lateral = "UCS"
        return replace(pkg, protocol=lateral, protocol_3d=top)
    return replace(pkg, protocol=token)


def parse_config(text: str) -> SystemConfig:
    parts = text.strip().split("|")
    if len(parts) != 7:
        raise ConfigParseError(f"bad config string {text!r}, expected 7 |-separated fields")
    count_s, chips_s, odk, share_s, ipm, proto_s, topo = parts
    count = _int_token(count_s, "chiplet count")
    chiplets = tuple(parse_chiplet(tok) for tok in chips_s.split(";"))
    if len(chiplets) != count:
        raise ConfigParseError(f"count field {count} does not match {len(chiplets)} chiplets")
    mapping = parse_mapping(odk)
    if share_s not in ("0", "1"):
        raise ConfigParseError(f"share flag {share_s!r} must be 0 or 1")
    mapping = replace(mapping, data_sharing=share_s == "1")
    pkg = parse_package(ipm)
    pkg = _parse_protocol_token(proto_s, pkg)
    if topo not in TOPOLOGIES:
        raise ConfigParseError(f"topology {topo!r} not in {TOPOLOGIES}")
    pkg = replace(pkg, topology=topo)
    return SystemConfig(chiplets=chiplets, mapping=mapping, package=pkg)


# ---------------------------------------------------------------------------
# Blacklist rules and feasibility
# ---------------------------------------------------------------------------

_RULE_PATHS: dict[str, Callable[[SystemConfig], object]] = {
    "chiplet_count": lambda c: c.count,
    "mapping.order": lambda c: c.mapping.order,
    "mapping.dataflow": lambda c: c.mapping.dataflow,
    "mapping.split_k": lambda c: c.mapping.split_k,
    "mapping.data_sharing": lambda c: c.mapping.data_sharing,
    "package.integration": lambda c: c.package.integration,
    "package.interconnect": lambda c: c.package.interconnect,
    "package.memory": lambda c: c.package.memory,
    "package.protocol": lambda c: c.package.protocol,
    "package.topology": lambda c: c.package.topology,
    "package.interconnect_3d": lambda c: c.package.interconnect_3d,
    "package.protocol_3d": lambda c: c.package.protocol_3d,
}


@dataclass(frozen=True)
class BlacklistRule:
    """Conjunction of field equality matchers naming an illegal combination."""

    rule_id: str
    when: tuple[tuple[str, object], ...]
    message: str = ""

    def __post_init__(self) -> None:
        if not self.when:
            raise BlacklistError(f"rule {self.rule_id!r} has no matchers")
        for path, _ in self.when:
            if path not in _RULE_PATHS:
                raise BlacklistError(f"rule {self.rule_id!r} uses unknown path {path!r}")

    def matches(self, cfg: SystemConfig) -> bool:
        return all(_RULE_PATHS[path](cfg) == value for path, value in self.when)


def load_blacklist(path: str | Path) -> tuple[BlacklistRule, ...]:
    """Load rules from a JSON file; any defect rejects the whole file."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BlacklistError(f"cannot load blacklist {path}: {exc}") from exc
    return parse_blacklist(raw, source=str(path))


def parse_blacklist(raw: object, source: str = "<memory>") -> tuple[BlacklistRule, ...]:
    if not isinstance(raw, list):
        raise BlacklistError(f"{source}: top level must be an array of rules")
    rules = []
    seen = set()
    for entry in raw:
        if not isinstance(entry, dict):
            raise BlacklistError(f"{source}: rule entries must be objects")
        try:
            rule_id = entry["rule_id"]
            when = entry["when"]
        except KeyError as exc:
            raise BlacklistError(f"{source}: rule missing {exc}") from None
        if not isinstance(rule_id, str) or not isinstance(when, dict):
            raise BlacklistError(f"{source}: rule {rule_id!r} malformed")
        if rule_id in seen:
            raise BlacklistError(f"{source}: duplicate rule_id {rule_id!r}")
        seen.add(rule_id)
        rules.append(
            BlacklistRule(
                rule_id=rule_id,
                when=tuple(sorted(when.items())),
                message=str(entry.get("message", "")),
            )
        )
    return tuple(rules)


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    violations: tuple[str, ...] = ()
    messages: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def _stack_order_ok(cfg: SystemConfig, areas: Sequence[float]) -> bool:
    """Bottom-to-top areas must be non-increasing inside every vertical stack."""
    if cfg.package.integration == "3D":
        stacks: Iterable[range] = (range(cfg.count),)
    elif cfg.package.integration == "2.5D+3D":
        stacks = stack_partition(cfg.count)
    else:
        return True
    for stack in stacks:
        for lower, upper in itertools.pairwise(stack):
            if areas[lower] < areas[upper] - 1e-12:
                return False
    return True


def check_feasible(
    cfg: SystemConfig,
    rules: Sequence[BlacklistRule] = (),
    areas: Sequence[float] | None = None,
) -> Feasibility:
    """Validate a configuration against structural rules plus a blacklist.

    Structural rules are always on.  ``areas`` (one entry per chiplet, from
    the area model) is required to enforce the 3D stack-order rule; when it
    is omitted that rule is skipped.
    """
    violations: list[str] = []
    messages: list[str] = []

    def fail(rule_id: str, message: str) -> None:
        violations.append(rule_id)
        messages.append(message)

    pkg = cfg.package
    if (cfg.count == 1) != (pkg.integration == "2D"):
        fail("single-die-2d", "exactly the single-chiplet systems are monolithic 2D")
    if pkg.integration == "2.5D+3D" and cfg.count < 3:
        fail("hybrid-min-chiplets", "2.5D+3D integration needs at least 3 chiplets")
    if pkg.protocol == "UC3" and pkg.integration in ("2D", "2.5D"):
        fail("uc3-requires-3d", "UC3 is a vertical-bond protocol; no 3D interface present")

    link_ok = True
    if pkg.integration == "2D":
        if pkg.interconnect != "NA" or pkg.protocol != "NA" or pkg.interconnect_3d is not None:
            link_ok = False
    elif pkg.integration == "2.5D+3D":
        if (pkg.interconnect, pkg.protocol) not in legal_link_pairs("2.5D"):
            link_ok = False
        if (pkg.interconnect_3d, pkg.protocol_3d) not in legal_link_pairs("3D"):
            link_ok = False
    else:
        if (pkg.interconnect, pkg.protocol) not in legal_link_pairs(pkg.integration):
            link_ok = False
        if pkg.interconnect_3d is not None or pkg.protocol_3d is not None:
            link_ok = False
    if not link_ok:
        fail("link-compat", f"interconnect/protocol not valid for {pkg.integration}")

    for chip in cfg.chiplets:
        if chip.sram_kb < min_sram_kb(chip.array_dim):
            fail("min-sram", f"{format_chiplet(chip)} buffer below the minimum for its array")
            break

    if areas is not None and not _stack_order_ok(cfg, areas):
        fail("stack-order", "a larger die sits above a smaller one in a vertical stack")

    for rule in rules:
        if rule.matches(cfg):
            fail(rule.rule_id, rule.message)

    return Feasibility(ok=not violations, violations=tuple(violations), messages=tuple(messages))


# ---------------------------------------------------------------------------
# The searchable space: enumeration, sampling, mutation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignSpace:
    """Per-dimension allowed values plus the feasibility machinery.

    ``restrict`` narrows dimensions for subspace studies; ``homogeneous``
    restricts chiplet lists to identical replicas.  ``area_fn`` maps a
    ChipletSpec to its die area (mm^2) and is needed for the stack-order
    rule; build one from the area model via ``ppac.default_space``.
    """

    counts: tuple[int, ...] = CHIPLET_COUNTS
    array_dims: tuple[int, ...] = ARRAY_DIMS
    tech_nodes: tuple[int, ...] = TECH_NODES
    sram_kbs: tuple[int, ...] = SRAM_KBS
    orders: tuple[int, ...] = ORDERS
    dataflows: tuple[str, ...] = DATAFLOWS
    split_ks: tuple[bool, ...] = (False, True)
    data_sharings: tuple[bool, ...] = (False, True)
    integrations: tuple[str, ...] = INTEGRATIONS
    interconnects: tuple[str, ...] = INTERCONNECTS
    memories: tuple[str, ...] = MEMORIES
    protocols: tuple[str, ...] = PROTOCOLS
    topologies: tuple[str, ...] = TOPOLOGIES
    homogeneous: bool = False
    rules: tuple[BlacklistRule, ...] = ()
    area_fn: Callable[[ChipletSpec], float] | None = field(
        default=None, compare=False, repr=False
    )

    _DIM_FIELDS = (
        "counts", "array_dims", "tech_nodes", "sram_kbs", "orders", "dataflows",
        "split_ks", "data_sharings", "integrations", "interconnects", "memories",
        "protocols", "topologies",
    )

    def restrict(self, **subsets) -> "DesignSpace":
        """Return a copy with some dimensions narrowed.

        Keyword names match the field names above plus ``homogeneous``.
        Subsets must be drawn from the current allowed values.
        """
        changes = {}
        for name, values in subsets.items():
            if name == "homogeneous":
                changes[name] = bool(values)
                continue
            if name not in self._DIM_FIELDS:
                raise ValueError(f"unknown design-space dimension {name!r}")
            allowed = set(getattr(self, name))
            picked = tuple(values)
            bad = [v for v in picked if v not in allowed]
            if bad:
                raise ValueError(f"{name} restriction {bad} outside allowed values")
            changes[name] = picked
        return replace(self, **changes)

    @classmethod
    def from_json(cls, data: dict, base: "DesignSpace | None" = None) -> "DesignSpace":
        base = base if base is not None else cls()
        return base.restrict(**data)

    def areas_of(self, cfg: SystemConfig) -> tuple[float, ...] | None:
        if self.area_fn is None:
            return None
        return tuple(self.area_fn(c) for c in cfg.chiplets)

    def contains(self, cfg: SystemConfig) -> bool:
        pkg = cfg.package
        if cfg.count not in self.counts:
            return False
        if self.homogeneous and len(set(cfg.chiplets)) > 1:
            return False
        for chip in cfg.chiplets:
            if (
                chip.array_dim not in self.array_dims
                or chip.tech_node not in self.tech_nodes
                or chip.sram_kb not in self.sram_kbs
            ):
                return False
        if cfg.mapping.order not in self.orders or cfg.mapping.dataflow not in self.dataflows:
            return False
        if cfg.mapping.split_k not in self.split_ks:
            return False
        if cfg.mapping.data_sharing not in self.data_sharings:
            return False
        if pkg.integration not in self.integrations:
            return False
        if pkg.interconnect not in self.interconnects or pkg.protocol not in self.protocols:
            return False
        if pkg.interconnect_3d is not None and pkg.interconnect_3d not in self.interconnects:
            return False
        if pkg.protocol_3d is not None and pkg.protocol_3d not in self.protocols:
            return False
        if pkg.memory not in self.memories or pkg.topology not in self.topologies:
            return False
        return True

    def is_feasible(self, cfg: SystemConfig) -> bool:
        if not self.contains(cfg):
            return False
        return check_feasible(cfg, self.rules, self.areas_of(cfg)).ok

    # -- enumeration helpers ------------------------------------------------

    def _chiplet_specs(self) -> list[ChipletSpec]:
        return [
            ChipletSpec(a, t, s)
            for a in self.array_dims
            for t in self.tech_nodes
            for s in self.sram_kbs
        ]

    def _link_pairs(self, integration: str) -> list[tuple[str, str]]:
        return [
            (ic, proto)
            for ic, proto in legal_link_pairs(integration)
            if ic in self.interconnects and proto in self.protocols
        ]

    def _packages(self, count: int) -> Iterator[PackageSpec]:
        for integration in self.integrations:
            if (count == 1) != (integration == "2D"):
                continue
            if integration == "2.5D+3D" and count < 3:
                continue
            if integration == "2.5D+3D":
                combos = [
                    dict(interconnect=ic, protocol=p, interconnect_3d=ic3, protocol_3d=p3)
                    for ic, p in self._link_pairs("2.5D")
                    for ic3, p3 in self._link_pairs("3D")
                ]
            else:
                combos = [
                    dict(interconnect=ic, protocol=p)
                    for ic, p in self._link_pairs(integration)
                ]
            for combo in combos:
                for memory in self.memories:
                    for topo in self.topologies:
                        yield PackageSpec(
                            integration=integration, memory=memory, topology=topo, **combo
                        )


def enumerate_configs(space: DesignSpace) -> Iterator[SystemConfig]:
    """Yield every feasible configuration exactly once, in a fixed order.

    Loop nesting (outer to inner): chiplet count, chiplet tuple, order,
    dataflow, split-K, data sharing, integration, link pair(s), memory,
    topology.
    """
    specs = space._chiplet_specs()
    for count in sorted(space.counts):
        if space.homogeneous:
            chiplet_tuples: Iterable[tuple[ChipletSpec, ...]] = ((s,) * count for s in specs)
        else:
            chiplet_tuples = itertools.product(specs, repeat=count)
        for chiplets in chiplet_tuples:
            for order in space.orders:
                for dataflow in space.dataflows:
                    for split_k in space.split_ks:
                        for sharing in space.data_sharings:
                            mapping = MappingSpec(order, dataflow, split_k, sharing)
                            for pkg in space._packages(count):
                                cfg = SystemConfig(chiplets, mapping, pkg)
                                if space.is_feasible(cfg):
                                    yield cfg


def draw_config(space: DesignSpace, rng: random.Random) -> SystemConfig:
    """One unvalidated uniform draw (each dimension independently uniform)."""
    count = rng.choice(space.counts)
    if space.homogeneous:
        chip = ChipletSpec(
            rng.choice(space.array_dims), rng.choice(space.tech_nodes), rng.choice(space.sram_kbs)
        )
        chiplets = (chip,) * count
    else:
        chiplets = tuple(
            ChipletSpec(
                rng.choice(space.array_dims),
                rng.choice(space.tech_nodes),
                rng.choice(space.sram_kbs),
            )
            for _ in range(count)
        )
    mapping = MappingSpec(
        order=rng.choice(space.orders),
        dataflow=rng.choice(space.dataflows),
        split_k=rng.choice(space.split_ks),
        data_sharing=rng.choice(space.data_sharings),
    )
    integration = rng.choice(space.integrations)
    kwargs: dict = {}
    if integration == "2.5D+3D":
        lateral = space._link_pairs("2.5D")
        vertical = space._link_pairs("3D")
        if not lateral or not vertical:
            # leave an illegal placeholder; the feasibility check rejects it
            kwargs = dict(interconnect="NA", protocol="NA")
        else:
            ic, proto = rng.choice(lateral)
            ic3, p3 = rng.choice(vertical)
            kwargs = dict(interconnect=ic, protocol=proto, interconnect_3d=ic3, protocol_3d=p3)
    else:
        pairs = space._link_pairs(integration)
        if not pairs:
            kwargs = dict(interconnect="NA", protocol="NA")
        else:
            ic, proto = rng.choice(pairs)
            kwargs = dict(interconnect=ic, protocol=proto)
    pkg = PackageSpec(
        integration=integration,
        memory=rng.choice(space.memories),
        topology=rng.choice(space.topologies),
        **kwargs,
    )
    return SystemConfig(chiplets, mapping, pkg)


def sample_feasible(space: DesignSpace, rng: random.Random, budget: int = MAX_SAMPLE_DRAWS) -> SystemConfig:
    """Rejection-sample one feasible configuration."""
    for _ in range(budget):
        cfg = draw_config(space, rng)
        if space.is_feasible(cfg):
            return cfg
    raise InfeasibleSpaceError(
        f"no feasible configuration found in {budget} draws; the space looks over-constrained"
    )


def sample_uniform(space: DesignSpace, n: int, seed: int) -> list[SystemConfig]:
    """Draw ``n`` feasible configurations by seeded rejection sampling."""
    if n < 1:
        raise ValueError("sample size must be >= 1")
    rng = random.Random(seed)
    out: list[SystemConfig] = []
    draws = 0
    while len(out) < n:
        if draws >= MAX_SAMPLE_DRAWS:
            raise InfeasibleSpaceError(
                f"draw budget {MAX_SAMPLE_DRAWS} exhausted after {len(out)} accepted samples"
            )
        cfg = draw_config(space, rng)
        draws += 1
        if space.is_feasible(cfg):
            out.append(cfg)
    return out


# ---------------------------------------------------------------------------
# Single-field mutation (shared by the annealer and the heuristic planner)
# ---------------------------------------------------------------------------

MUTABLE_DIMENSIONS = (
    "count", "array_dim", "tech_node", "sram_kb", "order", "dataflow", "split_k",
    "data_sharing", "integration", "interconnect", "memory", "protocol", "topology",
)

_CHIP_FIELD_SETS = {"array_dim": "array_dims", "tech_node": "tech_nodes", "sram_kb": "sram_kbs"}


def _choice_excluding(rng: random.Random, values: Sequence, current) -> object | None:
    options = [v for v in values if v != current]
    if not options:
        return None
    return rng.choice(options)


def _legal_integrations(space: DesignSpace, count: int) -> list[str]:
    out = []
    for integ in space.integrations:
        if (count == 1) != (integ == "2D"):
            continue
        if integ == "2.5D+3D" and count < 3:
            continue
        out.append(integ)
    return out


def _with_integration(pkg: PackageSpec, integration: str, space: DesignSpace, rng: random.Random) -> PackageSpec | None:
    if integration == "2D":
        return replace(
            pkg, integration="2D", interconnect="NA", protocol="NA",
            interconnect_3d=None, protocol_3d=None,
        )
    if integration == "2.5D+3D":
        lateral = space._link_pairs("2.5D")
        vertical = space._link_pairs("3D")
        if not lateral or not vertical:
            return None
        ic, proto = rng.choice(lateral)
        ic3, p3 = rng.choice(vertical)
        return replace(
            pkg, integration=integration, interconnect=ic, protocol=proto,
            interconnect_3d=ic3, protocol_3d=p3,
        )
    pairs = space._link_pairs(integration)
    if not pairs:
        return None
    ic, proto = rng.choice(pairs)
    return replace(
        pkg, integration=integration, interconnect=ic, protocol=proto,
        interconnect_3d=None, protocol_3d=None,
    )


def _repair(cfg: SystemConfig, space: DesignSpace, rng: random.Random) -> SystemConfig | None:
    """Fix fields made inconsistent by a mutation (integration vs count,
    dangling link pairing, violated stack order)."""
    pkg = cfg.package
    legal = _legal_integrations(space, cfg.count)
    if pkg.integration not in legal:
        if not legal:
            return None
        pkg = _with_integration(pkg, rng.choice(legal), space, rng)
        if pkg is None:
            return None
    cfg = replace(cfg, package=pkg)

    if pkg.integration in ("3D", "2.5D+3D") and space.area_fn is not None:
        areas = space.areas_of(cfg)
        assert areas is not None
        if not _stack_order_ok(cfg, areas):
            order = sorted(range(cfg.count), key=lambda i: (-areas[i], i))
            cfg = replace(cfg, chiplets=tuple(cfg.chiplets[i] for i in order))
    return cfg


def _mutate_once(cfg: SystemConfig, space: DesignSpace, dim: str, rng: random.Random) -> SystemConfig | None:
    pkg = cfg.package
    mapping = cfg.mapping

    if dim == "count":
        new_count = _choice_excluding(rng, space.counts, cfg.count)
        if new_count is None:
            return None
        if new_count > cfg.count:
            chiplets = cfg.chiplets + (cfg.chiplets[-1],) * (new_count - cfg.count)
        else:
            chiplets = cfg.chiplets[:new_count]
        return _repair(replace(cfg, chiplets=chiplets), space, rng)

    if dim in _CHIP_FIELD_SETS:
        values = getattr(space, _CHIP_FIELD_SETS[dim])
        idx = 0 if space.homogeneous else rng.randrange(cfg.count)
        new_v = _choice_excluding(rng, values, getattr(cfg.chiplets[idx], dim))
        if new_v is None:
            return None
        if space.homogeneous:
            chiplets = tuple(replace(c, **{dim: new_v}) for c in cfg.chiplets)
        else:
            chiplets = tuple(
                replace(c, **{dim: new_v}) if i == idx else c for i, c in enumerate(cfg.chiplets)
            )
        return _repair(replace(cfg, chiplets=chiplets), space, rng)

    if dim == "order":
        new_v = _choice_excluding(rng, space.orders, mapping.order)
        return None if new_v is None else replace(cfg, mapping=replace(mapping, order=new_v))
    if dim == "dataflow":
        new_v = _choice_excluding(rng, space.dataflows, mapping.dataflow)
        return None if new_v is None else replace(cfg, mapping=replace(mapping, dataflow=new_v))
    if dim == "split_k":
        new_v = _choice_excluding(rng, space.split_ks, mapping.split_k)
        return None if new_v is None else replace(cfg, mapping=replace(mapping, split_k=new_v))
    if dim == "data_sharing":
        new_v = _choice_excluding(rng, space.data_sharings, mapping.data_sharing)
        return None if new_v is None else replace(cfg, mapping=replace(mapping, data_sharing=new_v))
    if dim == "memory":
        new_v = _choice_excluding(rng, space.memories, pkg.memory)
        return None if new_v is None else replace(cfg, package=replace(pkg, memory=new_v))
    if dim == "topology":
        new_v = _choice_excluding(rng, space.topologies, pkg.topology)
        return None if new_v is None else replace(cfg, package=replace(pkg, topology=new_v))

    if dim == "integration":
        choices = [i for i in _legal_integrations(space, cfg.count) if i != pkg.integration]
        if not choices:
            return None
        new_pkg = _with_integration(pkg, rng.choice(choices), space, rng)
        return None if new_pkg is None else _repair(replace(cfg, package=new_pkg), space, rng)

    if dim == "interconnect":
        if pkg.integration == "2D":
            return None
        side_3d = pkg.integration == "3D" or (
            pkg.integration == "2.5D+3D" and rng.random() < 0.5
        )
        if side_3d:
            pairs = space._link_pairs("3D")
            current = pkg.interconnect_3d if pkg.integration == "2.5D+3D" else pkg.interconnect
            options = [p for p in pairs if p[0] != current]
            if not options:
                return None
            ic, proto = rng.choice(options)
            if pkg.integration == "2.5D+3D":
                new_pkg = replace(pkg, interconnect_3d=ic, protocol_3d=proto)
            else:
                new_pkg = replace(pkg, interconnect=ic, protocol=proto)
        else:
            pairs = space._link_pairs("2.5D")
            options = [p for p in pairs if p[0] != pkg.interconnect]
            if not options:
                return None
            # keep the current protocol when the new link supports it
            keep = [p for p in options if p[1] == pkg.protocol]
            ic, proto = rng.choice(keep if keep else options)
            new_pkg = replace(pkg, interconnect=ic, protocol=proto)
        return replace(cfg, package=new_pkg)

    if dim == "protocol":
        if pkg.integration == "2D":
            return None
        if pkg.integration == "3D":
            pairs = space._link_pairs("3D")
            options = [p for p in pairs if p[1] != pkg.protocol and p[0] == pkg.interconnect]
        else:
            pairs = space._link_pairs("2.5D")
            options = [p for p in pairs if p[1] != pkg.protocol and p[0] == pkg.interconnect]
        if not options:
            return None
        ic, proto = rng.choice(options)
        return replace(cfg, package=replace(pkg, interconnect=ic, protocol=proto))

    raise ValueError(f"unknown mutation dimension {dim!r}")


def random_mutation(
    cfg: SystemConfig, space: DesignSpace, rng: random.Random, retries: int = 50
) -> SystemConfig:
    """Resample one uniformly chosen dimension to a different legal value.

    Dependent fields are repaired (integration changes resample the link
    pair, count changes clone or drop the last chiplet, violated stacks are
    re-sorted largest-first).  After ``retries`` failed attempts the input
    is returned unchanged, a null move.
    """
    for _ in range(retries):
        dim = rng.choice(MUTABLE_DIMENSIONS)
        cand = _mutate_once(cfg, space, dim, rng)
        if cand is not None and cand != cfg and space.is_feasible(cand):
            return cand
    return cfg
