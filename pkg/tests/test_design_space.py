import random

import pytest
from hypothesis import given, settings, strategies as st

from chipdse.design_space import (
    ARRAY_DIMS,
    DATAFLOWS,
    INTEGRATIONS,
    MEMORIES,
    SRAM_KBS,
    TECH_NODES,
    TOPOLOGIES,
    BlacklistError,
    BlacklistRule,
    ChipletSpec,
    ConfigParseError,
    MappingSpec,
    PackageSpec,
    SystemConfig,
    check_feasible,
    enumerate_configs,
    format_chiplet,
    format_config,
    format_mapping,
    format_package,
    legal_link_pairs,
    load_blacklist,
    min_sram_kb,
    parse_blacklist,
    parse_chiplet,
    parse_config,
    parse_mapping,
    parse_package,
    random_mutation,
    sample_uniform,
)

import encoding_fixtures
import oracles


# -- shorthand parsing -------------------------------------------------------

def test_parse_chiplet_basic():
    assert parse_chiplet("64-7-512") == ChipletSpec(64, 7, 512)
    assert parse_chiplet("96-7-1024") == ChipletSpec(96, 7, 1024)


def test_parse_chiplet_rejects_bad_node():
    with pytest.raises(ConfigParseError, match="9"):
        parse_chiplet("64-9-512")


@pytest.mark.parametrize("text", ["64-7", "64/7/512", "banana", "64-7-512-1"])
def test_parse_chiplet_rejects_malformed(text):
    with pytest.raises(ConfigParseError):
        parse_chiplet(text)


def test_parse_mapping_basic():
    m = parse_mapping("1-OS-0")
    assert (m.order, m.dataflow, m.split_k) == (1, "OS", False)
    assert m.data_sharing is False  # absent from the shorthand
    m = parse_mapping("0-IS-1")
    assert (m.order, m.dataflow, m.split_k) == (0, "IS", True)


def test_parse_mapping_rejects_unknown_dataflow():
    with pytest.raises(ConfigParseError, match="XX"):
        parse_mapping("0-XX-1")


def test_parse_package_basic():
    p = parse_package("2.5D-RDL-DDR5")
    assert (p.integration, p.interconnect, p.memory) == ("2.5D", "RDL", "DDR5")
    assert p.topology == "ring"
    p = parse_package("3D-HB-HBM3")
    assert (p.integration, p.interconnect, p.protocol) == ("3D", "HB", "UC3")
    p = parse_package("2D-NA-DDR5")
    assert (p.integration, p.interconnect, p.protocol) == ("2D", "NA", "NA")


def test_parse_package_hybrid_and_aliases():
    p = parse_package("2.5D+3D-HB/RDL-HBM3")
    assert p.interconnect == "RDL" and p.interconnect_3d == "HB"
    assert p.protocol_3d == "UC3"
    p = parse_package("3D-µB-HBM3")
    assert p.interconnect == "uB"


def test_parse_package_rejects_mismatch():
    with pytest.raises(ConfigParseError):
        parse_package("2D-RDL-DDR5")
    with pytest.raises(ConfigParseError):
        parse_package("3D-RDL-HBM3")
    with pytest.raises(ConfigParseError):
        parse_package("2.5D-HB-DDR4")


def test_fixture_corpus_parses_and_roundtrips():
    chiplets, mappings, packages = encoding_fixtures.all_fixture_strings()
    assert len(chiplets) + len(mappings) + len(packages) >= 40
    for text in chiplets:
        assert format_chiplet(parse_chiplet(text)) == text
    for text in mappings:
        assert format_mapping(parse_mapping(text)) == text
    for text in packages:
        pkg = parse_package(text)
        # formatting canonicalizes aliases such as the micro sign
        assert parse_package(format_package(pkg)) == pkg


def test_fixture_rows_build_full_configs():
    for chips, odk, ipm, proto in encoding_fixtures.CONFIG_ROWS:
        chiplets = tuple(parse_chiplet(c) for c in chips)
        canonical = "|".join(
            [str(len(chiplets)), ";".join(chips), odk, "0", ipm, proto or "NA", "ring"]
        )
        cfg = parse_config(canonical)
        assert parse_config(format_config(cfg)) == cfg


def test_format_config_example():
    cfg = SystemConfig(
        chiplets=(ChipletSpec(64, 7, 512),),
        mapping=MappingSpec(order=1, dataflow="IS", split_k=True),
        package=PackageSpec("2D", "NA", "DDR5", "NA"),
    )
    assert format_config(cfg) == "1|64-7-512|1-IS-1|0|2D-NA-DDR5|NA|ring"


def test_format_preserves_chiplet_order():
    cfg = parse_config("2|96-7-1024;64-10-768|0-OS-1|0|3D-HB-HBM3|UC3|ring")
    assert format_config(cfg).split("|")[1] == "96-7-1024;64-10-768"


def test_parse_config_count_mismatch():
    with pytest.raises(ConfigParseError, match="count"):
        parse_config("2|64-7-512|1-OS-0|0|2D-NA-DDR5|NA|ring")


def test_protocol_table_shorthand():
    cfg = parse_config("3|64-7-256;64-7-256;64-7-256|1-OS-0|0|2.5D+3D-HB/RDL-HBM3|UC3/S|ring")
    assert cfg.package.protocol == "UCS"
    assert cfg.package.protocol_3d == "UC3"
    assert format_config(cfg).split("|")[5] == "UC3/UCS"


# -- hypothesis round-trip ----------------------------------------------------

def _package_strategy():
    def build(integration, mem, topo, data):
        if integration == "2.5D+3D":
            ic, proto = data.draw(st.sampled_from(legal_link_pairs("2.5D")))
            ic3, p3 = data.draw(st.sampled_from(legal_link_pairs("3D")))
            return PackageSpec(integration, ic, mem, proto, topo, ic3, p3)
        ic, proto = data.draw(st.sampled_from(legal_link_pairs(integration)))
        return PackageSpec(integration, ic, mem, proto, topo)

    return st.builds(
        lambda integ, mem, topo, data: build(integ, mem, topo, data),
        st.sampled_from(INTEGRATIONS),
        st.sampled_from(MEMORIES),
        st.sampled_from(TOPOLOGIES),
        st.data(),
    )


config_strategy = st.builds(
    SystemConfig,
    chiplets=st.lists(
        st.builds(
            ChipletSpec,
            array_dim=st.sampled_from(ARRAY_DIMS),
            tech_node=st.sampled_from(TECH_NODES),
            sram_kb=st.sampled_from(SRAM_KBS),
        ),
        min_size=1,
        max_size=6,
    ).map(tuple),
    mapping=st.builds(
        MappingSpec,
        order=st.sampled_from((0, 1)),
        dataflow=st.sampled_from(DATAFLOWS),
        split_k=st.booleans(),
        data_sharing=st.booleans(),
    ),
    package=_package_strategy(),
)


@given(config_strategy)
@settings(max_examples=200)
def test_roundtrip_any_structurally_valid_config(cfg):
    assert parse_config(format_config(cfg)) == cfg


# -- feasibility ---------------------------------------------------------------

def _cfg(chips, integration="2D", count=None, **pkg_kwargs):
    chiplets = tuple(parse_chiplet(c) for c in chips)
    defaults = dict(interconnect="NA", memory="DDR5", protocol="NA")
    defaults.update(pkg_kwargs)
    return SystemConfig(
        chiplets=chiplets,
        mapping=MappingSpec(),
        package=PackageSpec(integration=integration, **defaults),
    )


def test_uc3_in_25d_rejected():
    cfg = _cfg(["64-7-256", "64-7-256"], "2.5D", interconnect="RDL", protocol="UC3")
    verdict = check_feasible(cfg)
    assert not verdict.ok and "uc3-requires-3d" in verdict.violations


def test_two_chiplet_hybrid_rejected():
    cfg = _cfg(
        ["64-7-256", "64-7-256"], "2.5D+3D",
        interconnect="RDL", protocol="UCS", interconnect_3d="HB", protocol_3d="UC3",
    )
    verdict = check_feasible(cfg)
    assert not verdict.ok and "hybrid-min-chiplets" in verdict.violations


def test_larger_on_smaller_stack_rejected(space):
    cfg = _cfg(["64-7-256", "128-7-1024"], "3D", interconnect="HB", protocol="UC3")
    verdict = check_feasible(cfg, areas=space.areas_of(cfg))
    assert not verdict.ok and "stack-order" in verdict.violations
    # same dies, big one on the bottom: fine
    ok = _cfg(["128-7-1024", "64-7-256"], "3D", interconnect="HB", protocol="UC3")
    assert check_feasible(ok, areas=space.areas_of(ok)).ok


def test_single_chiplet_must_be_2d():
    cfg = _cfg(["64-7-256"], "3D", interconnect="HB", protocol="UC3")
    assert "single-die-2d" in check_feasible(cfg).violations
    cfg = _cfg(["64-7-256", "64-7-256"], "2D")
    assert "single-die-2d" in check_feasible(cfg).violations


def test_min_sram_rule():
    assert min_sram_kb(64) == 256
    assert min_sram_kb(192) == 256  # 4*192^2 bytes = 144 KB, first allowed is 256


def test_json_rules_match(bundled_rules):
    cfg = _cfg(["64-7-256", "64-7-256"], "2.5D", interconnect="RDL", protocol="UC3")
    verdict = check_feasible(cfg, bundled_rules)
    assert "uc3-in-2.5d" in verdict.violations


def test_blacklist_rejects_unknown_path():
    with pytest.raises(BlacklistError, match="unknown path"):
        parse_blacklist([{"rule_id": "x", "when": {"package.nonsense": 1}, "message": ""}])


def test_blacklist_rejects_empty_matchers():
    with pytest.raises(BlacklistError):
        BlacklistRule(rule_id="x", when=())


def test_blacklist_rejects_duplicates_and_malformed(tmp_path):
    bad = tmp_path / "rules.json"
    bad.write_text('[{"rule_id": "a", "when": {"chiplet_count": 1}}, {"rule_id": "a", "when": {"chiplet_count": 2}}]')
    with pytest.raises(BlacklistError, match="duplicate"):
        load_blacklist(bad)
    bad.write_text("{not json")
    with pytest.raises(BlacklistError):
        load_blacklist(bad)


# -- enumeration ----------------------------------------------------------------

def test_enumerate_singleton(space):
    singleton = space.restrict(
        counts=(1,), array_dims=(64,), tech_nodes=(7,), sram_kbs=(512,),
        memories=("DDR5",), dataflows=("OS",), orders=(0,), split_ks=(False,),
        data_sharings=(False,), integrations=("2D",), topologies=("ring",),
    )
    configs = list(enumerate_configs(singleton))
    assert len(configs) == 1
    assert format_config(configs[0]) == "1|64-7-512|0-OS-0|0|2D-NA-DDR5|NA|ring"


def test_enumerate_matches_independent_recount(space):
    sub = space.restrict(
        homogeneous=True, counts=(1, 2), array_dims=(64,), tech_nodes=(7,),
        sram_kbs=(256, 512), memories=("DDR5",), topologies=("ring",),
    )
    configs = list(enumerate_configs(sub))
    assert len(configs) == oracles.recount_small_space(sub, space.area_fn)
    canon = [format_config(c) for c in configs]
    assert len(set(canon)) == len(canon)  # exactly once each


def test_enumerate_small_space_count(small_space):
    configs = list(enumerate_configs(small_space))
    assert len(configs) == oracles.recount_small_space(small_space, small_space.area_fn)
    assert all(small_space.is_feasible(c) for c in configs)


def test_enumerate_is_deterministic(small_space):
    first = [format_config(c) for c in enumerate_configs(small_space)]
    second = [format_config(c) for c in enumerate_configs(small_space)]
    assert first == second


def test_enumerate_empty_restriction_is_empty_stream(space):
    sub = space.restrict(counts=(2,), integrations=("2D",))
    assert list(enumerate_configs(sub)) == []


# -- sampling ---------------------------------------------------------------------

def test_sample_uniform_deterministic(space):
    a = sample_uniform(space, 200, seed=7)
    b = sample_uniform(space, 200, seed=7)
    assert [format_config(c) for c in a] == [format_config(c) for c in b]
    assert sample_uniform(space, 50, seed=8) != a[:50]


def test_sample_uniform_all_feasible(space):
    for cfg in sample_uniform(space, 500, seed=3):
        assert space.is_feasible(cfg)


def test_sample_uniform_single_chip_is_2d(space):
    for cfg in sample_uniform(space, 500, seed=5):
        if cfg.count == 1:
            assert cfg.package.integration == "2D"
        else:
            assert cfg.package.integration != "2D"


# -- mutation -----------------------------------------------------------------------

def test_mutation_outputs_feasible_and_differs(space):
    rng = random.Random(0)
    cfg = sample_uniform(space, 1, seed=1)[0]
    for _ in range(300):
        new = random_mutation(cfg, space, rng)
        assert space.is_feasible(new)
        cfg = new


def test_mutation_touches_every_dimension(space):
    rng = random.Random(42)
    base = parse_config("2|96-7-512;64-7-256|0-OS-0|0|2.5D-RDL-DDR5|UCS|ring")
    seen = set()
    for _ in range(10_000):
        new = random_mutation(base, space, rng)
        if new.count != base.count:
            seen.add("count")
        else:
            for a, b in zip(new.chiplets, base.chiplets):
                if a.array_dim != b.array_dim:
                    seen.add("array_dim")
                if a.tech_node != b.tech_node:
                    seen.add("tech_node")
                if a.sram_kb != b.sram_kb:
                    seen.add("sram_kb")
        if new.mapping.order != base.mapping.order:
            seen.add("order")
        if new.mapping.dataflow != base.mapping.dataflow:
            seen.add("dataflow")
        if new.mapping.split_k != base.mapping.split_k:
            seen.add("split_k")
        if new.mapping.data_sharing != base.mapping.data_sharing:
            seen.add("data_sharing")
        if new.package.integration != base.package.integration:
            seen.add("integration")
        elif new.package.interconnect != base.package.interconnect:
            seen.add("interconnect")
        elif new.package.protocol != base.package.protocol:
            seen.add("protocol")
        if new.package.memory != base.package.memory:
            seen.add("memory")
        if new.package.topology != base.package.topology:
            seen.add("topology")
    assert {
        "count", "array_dim", "tech_node", "sram_kb", "order", "dataflow",
        "split_k", "data_sharing", "integration", "interconnect", "memory",
        "protocol", "topology",
    } <= seen


def test_mutation_null_move_when_stuck(consts):
    from chipdse import ppac

    frozen = ppac.default_space(consts).restrict(
        counts=(1,), array_dims=(64,), tech_nodes=(7,), sram_kbs=(256,),
        orders=(0,), dataflows=("OS",), split_ks=(False,), data_sharings=(False,),
        integrations=("2D",), interconnects=("NA",), memories=("DDR5",),
        protocols=("NA",), topologies=("ring",),
    )
    cfg = parse_config("1|64-7-256|0-OS-0|0|2D-NA-DDR5|NA|ring")
    assert random_mutation(cfg, frozen, random.Random(0)) == cfg
