"""Acceptance gate: one test per release criterion, each printing a verdict
line.  Run with `pytest tests/test_acceptance.py -v -s` to see the lines."""
import json
import math
import random
import statistics
import subprocess
import sys
import time
from dataclasses import replace
from importlib import resources

from chipdse import ppac
from chipdse.analysis import ParetoPoint, brute_force, pareto_frontier
from chipdse.cost import (
    PROFILES,
    Profile,
    argmin_over,
    compute_basis,
    normalized_metrics,
    weighted_cost,
)
from chipdse.design_space import (
    check_feasible,
    format_chiplet,
    format_config,
    format_mapping,
    format_package,
    parse_chiplet,
    parse_config,
    parse_mapping,
    parse_package,
    sample_uniform,
)
from chipdse.mapping import ChipletWork, dram_traffic, map_workload
from chipdse.orchestrator import AgentRunSettings, run as agent_run
from chipdse.sa import SaSettings, anneal, grid_settings, metropolis_accept

import encoding_fixtures
import oracles


def verdict(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {name}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


# -- 1. structural reproduction -------------------------------------------------

def test_structural_reproduction():
    grid = grid_settings()
    t0s = sorted({s.t0 for s in grid})
    rates = sorted({s.rate for s in grid})
    workloads = json.loads(
        resources.files("chipdse.data").joinpath("workloads.json").read_text()
    )
    expected_workloads = [
        {"name": "WL-1", "m": 512, "k": 768, "n": 3072},
        {"name": "WL-2", "m": 6304, "k": 768, "n": 3072},
        {"name": "WL-3", "m": 197, "k": 768, "n": 3072},
        {"name": "WL-4", "m": 128, "k": 2048, "n": 1000},
        {"name": "WL-5", "m": 64, "k": 4096, "n": 4096},
        {"name": "WL-6", "m": 1316, "k": 24, "n": 144},
    ]
    expected_profiles = {
        "balance": (1.0, 1.0, 1.0, 1.0),
        "mobile": (0.8, 0.2, 0.1, 0.1),
        "automotive": (0.1, 0.1, 0.7, 0.7),
        "wearables": (0.6, 0.6, 0.1, 0.1),
    }
    ok = (
        len(grid) == 390
        and len(t0s) == 13
        and len(rates) == 30
        and t0s == [4000.0 + 500 * i for i in range(13)]
        and rates == [round(0.70 + 0.01 * i, 2) for i in range(30)]
        and workloads == expected_workloads
        and {k: p.as_tuple() for k, p in PROFILES.items()} == expected_profiles
    )
    verdict("structural-reproduction", ok,
            f"grid={len(grid)}, t0s={len(t0s)}, rates={len(rates)}")


# -- 2. parsing fixtures ------------------------------------------------------------

def test_parsing_fixtures():
    start = time.perf_counter()
    chiplets, mappings, packages = encoding_fixtures.all_fixture_strings()
    n = 0
    for text in chiplets:
        assert format_chiplet(parse_chiplet(text)) == text
        n += 1
    for text in mappings:
        assert format_mapping(parse_mapping(text)) == text
        n += 1
    for text in packages:
        pkg = parse_package(text)
        assert parse_package(format_package(pkg)) == pkg
        n += 1
    for chips, odk, ipm, proto in encoding_fixtures.CONFIG_ROWS:
        canonical = "|".join(
            [str(len(chips)), ";".join(chips), odk, "0", ipm, proto or "NA", "ring"]
        )
        cfg = parse_config(canonical)
        assert parse_config(format_config(cfg)) == cfg
        n += 1
    elapsed = time.perf_counter() - start
    verdict("parsing-fixtures", n >= 40 and elapsed < 1.0,
            f"{n} fixtures in {elapsed:.3f}s")


# -- 3. blacklist suite ----------------------------------------------------------------

def test_blacklist_suite(space, bundled_rules):
    start = time.perf_counter()
    uc3_25d = parse_config("2|64-7-256;64-7-256|0-OS-0|0|2.5D-RDL-DDR5|UC3|ring")
    hybrid_2 = parse_config(
        "2|64-7-256;64-7-256|0-OS-0|0|2.5D+3D-HB/RDL-HBM3|UC3/UCS|ring"
    )
    big_on_small = parse_config("2|64-7-256;128-7-1024|0-OS-0|0|3D-HB-HBM3|UC3|ring")
    rejected = (
        not check_feasible(uc3_25d, bundled_rules, space.areas_of(uc3_25d)).ok
        and not check_feasible(hybrid_2, bundled_rules, space.areas_of(hybrid_2)).ok
        and not check_feasible(big_on_small, bundled_rules, space.areas_of(big_on_small)).ok
    )
    samples = sample_uniform(space, 1000, seed=2026)
    all_ok = all(space.is_feasible(cfg) for cfg in samples)
    elapsed = time.perf_counter() - start
    verdict("blacklist-suite", rejected and all_ok and elapsed < 5.0,
            f"3 violations rejected, 1000 samples feasible, {elapsed:.2f}s")


# -- 4. oracle equivalence ---------------------------------------------------------------

def test_oracle_equivalence(small_space, consts, wl6, basis_wl6, balance):
    start = time.perf_counter()
    oracle = brute_force(wl6, balance, basis_wl6, small_space, consts, cap=20_000)
    oracle_time = time.perf_counter() - start
    assert oracle.total_configs <= 20_000

    sa_hits = 0
    sa_worst_time = 0.0
    for seed in range(1, 6):
        t0 = time.perf_counter()
        trace = anneal(wl6, balance, basis_wl6, small_space, consts, SaSettings(seed=seed))
        sa_worst_time = max(sa_worst_time, time.perf_counter() - t0)
        assert trace.best_cost >= oracle.best_cost - 1e-12
        if trace.best_cost <= 1.02 * oracle.best_cost:
            sa_hits += 1

    t0 = time.perf_counter()
    settings = AgentRunSettings(
        n_agents=100, max_iterations=10, seed=5, backend="heuristic", no_timestamps=True
    )
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        _, agent_best, _ = agent_run(
            wl6, balance, basis_wl6, small_space, consts, settings, tmp
        )
    agent_time = time.perf_counter() - t0
    assert agent_best >= oracle.best_cost - 1e-12

    ok = (
        oracle_time < 60.0
        and sa_hits >= 4
        and sa_worst_time < 120.0
        and agent_best <= 1.05 * oracle.best_cost
        and agent_time < 120.0
    )
    verdict(
        "oracle-equivalence", ok,
        f"{oracle.total_configs} configs in {oracle_time:.1f}s, "
        f"sa {sa_hits}/5 within 2% (max {sa_worst_time:.1f}s), "
        f"agent ratio {agent_best / oracle.best_cost:.4f} in {agent_time:.1f}s",
    )


# -- 5. cost-engine properties ----------------------------------------------------------

def test_cost_engine_properties(space, consts, wl6):
    basis = compute_basis(wl6, space, consts, n=10_000, seed=424)
    reports = [
        ppac.evaluate(wl6, cfg, consts)
        for cfg in sample_uniform(space, basis.n, seed=basis.seed)
    ]
    medians_ok = True
    for axis in range(4):
        med = statistics.median(normalized_metrics(r, basis)[axis] for r in reports)
        medians_ok &= 0.99 <= med <= 1.01

    report = reports[0]
    zero_ok = weighted_cost(report, basis, Profile(0, 0, 0, 0)) == 0.0
    linear_ok = weighted_cost(report, basis, Profile(1.7, 0, 0, 0)) == 1.7 * (
        report.energy_j / basis.median_energy_j
    )

    sample = sample_uniform(space, 100, seed=77)
    p = Profile(0.3, 0.4, 0.2, 0.1)
    scaled = Profile(0.9, 1.2, 0.6, 0.3)
    best_a, _ = argmin_over(sample, wl6, p, basis, consts)
    best_b, _ = argmin_over(sample, wl6, scaled, basis, consts)
    argmin_ok = best_a == best_b

    verdict(
        "cost-engine-properties",
        medians_ok and zero_ok and linear_ok and argmin_ok,
        f"medians_ok={medians_ok}, zero={zero_ok}, linear={linear_ok}, argmin={argmin_ok}",
    )


# -- 6. model properties -----------------------------------------------------------------

def test_model_properties(space, consts, wl6):
    samples = sample_uniform(space, 1000, seed=88)
    rng = random.Random(88)
    sram_steps = {256: None, 512: 256, 768: 512, 1024: 512, 1536: 768, 2048: 1024}

    sram_ok = sharing_ok = zero_d2d_ok = perm_ok = macs_ok = True
    for cfg in samples:
        result = map_workload(wl6, cfg)
        macs_ok &= sum(w.macs for w in result.works) == wl6.macs

        chip = cfg.chiplets[rng.randrange(cfg.count)]
        halved = sram_steps[chip.sram_kb]
        if halved is not None:
            work = ChipletWork(wl6.m, wl6.k, wl6.n, wl6.macs)
            big, _ = dram_traffic(work, chip, cfg.mapping)
            small, _ = dram_traffic(work, replace(chip, sram_kb=halved), cfg.mapping)
            sram_ok &= small >= big

        if cfg.count == 1:
            report = ppac.evaluate(wl6, cfg, consts)
            zero_d2d_ok &= report.latency_d2d_s == 0.0 and report.energy_d2d_j == 0.0
        else:
            on = replace(cfg, mapping=replace(cfg.mapping, data_sharing=True))
            off = replace(cfg, mapping=replace(cfg.mapping, data_sharing=False))
            r_on = map_workload(wl6, on)
            r_off = map_workload(wl6, off)
            sharing_ok &= sum(w.dram_read_bytes for w in r_on.works) <= sum(
                w.dram_read_bytes for w in r_off.works
            )
            perm = list(range(cfg.count))
            rng.shuffle(perm)
            shuffled = replace(cfg, chiplets=tuple(cfg.chiplets[i] for i in perm))
            l1 = ppac.system_latency(cfg, result, consts, space.areas_of(cfg))[1]
            l2 = ppac.system_latency(
                shuffled, map_workload(wl6, shuffled), consts, space.areas_of(shuffled)
            )[1]
            perm_ok &= math.isclose(l1, l2, rel_tol=1e-12)

    yield_ok = True
    prev = 1.1
    for area in [0.5 * i for i in range(1, 1001)]:
        y = ppac.die_yield(area, 0.0015)
        yield_ok &= 0 < y <= 1 and y < prev
        prev = y

    verdict(
        "model-properties",
        sram_ok and sharing_ok and zero_d2d_ok and perm_ok and macs_ok and yield_ok,
        f"sram={sram_ok}, sharing={sharing_ok}, zero_d2d={zero_d2d_ok}, "
        f"perm={perm_ok}, macs={macs_ok}, yield={yield_ok}",
    )


# -- 7. metropolis check --------------------------------------------------------------------

def test_metropolis_check():
    rng = random.Random(20_26)
    trials = 100_000
    hits = sum(metropolis_accept(500.0, 1000.0, rng) for _ in range(trials))
    p = math.exp(-0.5)
    sigma = math.sqrt(p * (1 - p) / trials)
    deviation = abs(hits / trials - p)
    verdict("metropolis-check", deviation < 3 * sigma,
            f"rate={hits / trials:.5f}, target={p:.5f}, 3sigma={3 * sigma:.5f}")


# -- 8. CLI determinism ------------------------------------------------------------------------

RESTRICT = json.dumps({
    "homogeneous": True, "counts": [1, 2], "array_dims": [64, 96],
    "tech_nodes": [7], "sram_kbs": [256], "integrations": ["2D", "3D"],
    "interconnects": ["NA", "HB"], "protocols": ["NA", "UC3"],
    "memories": ["DDR5"], "topologies": ["ring"],
})


def _cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "chipdse.cli", *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def test_cli_determinism(tmp_path, space, consts, wl6):
    from chipdse.cost import save_basis

    basis = compute_basis(wl6, space, consts, n=100, seed=3)
    basis_file = tmp_path / "basis.json"
    save_basis(basis, basis_file)

    common = ["--workload", "WL-6", "--basis", str(basis_file),
              "--restrict", RESTRICT, "--seed", "7", "--no-timestamps"]
    pairs = []
    for tag, extra, files in (
        ("agent", ["--backend", "heuristic", "--agents", "5", "--iterations", "2",
                   "--plan-size", "2"], ("RESULTS.csv", "BEST.csv")),
        ("sa", ["--t0", "100", "--rate", "0.8", "--moves", "10", "--budget", "150"],
         ("trace.csv", "summary.csv")),
        ("bruteforce", [], ("oracle.json",)),
    ):
        d1, d2 = tmp_path / f"{tag}1", tmp_path / f"{tag}2"
        _cli(tag, *common, *extra, "--out-dir", str(d1))
        _cli(tag, *common, *extra, "--out-dir", str(d2))
        same = all((d1 / f).read_bytes() == (d2 / f).read_bytes() for f in files)
        pairs.append((tag, same))
    verdict("cli-determinism", all(ok for _, ok in pairs),
            ", ".join(f"{tag}={'ok' if ok else 'DIFF'}" for tag, ok in pairs))


# -- 9. file-format goldens ----------------------------------------------------------------------

def test_file_format_goldens(tmp_path, small_space, consts, wl6, basis_wl6, balance):
    import re

    settings = AgentRunSettings(
        n_agents=3, max_iterations=2, seed=1, backend="heuristic",
        configs_per_plan=2, no_timestamps=True,
    )
    _, _, run_dir = agent_run(
        wl6, balance, basis_wl6, small_space, consts, settings, tmp_path / "run"
    )
    results_header = (run_dir / "RESULTS.csv").read_text().splitlines()[0]
    best_header = (run_dir / "BEST.csv").read_text().splitlines()[0]
    headers_ok = (
        results_header
        == "iteration,plan_id,config,energy_j,area_mm2,latency_s,mfg_cost_usd,"
           "norm_e,norm_a,norm_l,norm_c,weighted_cost,backend,timestamp_iso8601"
        and best_header == "rank,weighted_cost,config,iteration_found"
    )
    entry_re = re.compile(
        r"## Iter \d+ / Plan \S+\n"
        r"- configs: \d+\n"
        r"- batch best: \S+ @ \S+\n"
        r"- delta vs global best: [+-]\S+\n"
        r"- insight: .+\n"
    )
    text = (run_dir / "KNOWHOW.md").read_text()
    entries = entry_re.findall(text)
    stripped = "".join(entries)
    notes = [l for l in text.splitlines() if l.startswith("> note:")]
    template_ok = len(entries) == 6 and len(stripped) + sum(
        len(n) + 1 for n in notes
    ) == len(text)
    verdict("file-format-goldens", headers_ok and template_ok,
            f"headers_ok={headers_ok}, entries={len(entries)}")


# -- 10. pareto ---------------------------------------------------------------------------------

def test_pareto_against_quadratic_checker():
    rng = random.Random(1234)
    ok = True
    for _ in range(5):
        points = [
            ParetoPoint(rng.uniform(0.5, 500.0), rng.uniform(1.0, 100.0), f"p{i}")
            for i in range(200)
        ]
        fast = pareto_frontier(points)
        slow = oracles.quadratic_frontier(points)
        ok &= [(p.runtime_s, p.cost, p.label) for p in fast] == [
            (p.runtime_s, p.cost, p.label) for p in slow
        ]
        ok &= pareto_frontier(fast) == fast
    verdict("pareto-frontier", ok, "5 x 200 random points vs quadratic checker")
