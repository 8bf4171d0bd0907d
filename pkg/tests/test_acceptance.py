"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Runs are on the desk site (2 clusters x 4 racks x 4 cluster switches x
2 spine routers x 4 servers per rack) for 10 ms of simulated time. Results
are cached for the session so criteria that share a scenario share its run.
"""

import json
import random
import time

import numpy as np
import pytest

from acceptance_log import record
from lcdcsim import power
from lcdcsim.cli import main as cli_main
from lcdcsim.config import scaled
from lcdcsim.frames import ETHERTYPE_LCDC, FRAME_SIZE, ControlFrame, decode_control, encode_control
from lcdcsim.metrics import savings_report
from lcdcsim.network import Network, run_simulation, workload_flows
from lcdcsim.traffic import PROFILES, fidelity, sample_cdf, shipped_cdf
from lcdcsim.units import MS
from test_frames import GOLDEN_FRAMES, golden_vectors
from test_switch import model_triggers, reference_triggers

DURATION = 10 * MS
SEEDS = (1, 2, 3, 4, 5)
TREND_SEEDS = (1, 2, 3)


def scenario(profile, load=0.3, seed=1):
    return (scaled("desk").replace("run", duration=DURATION, seed=seed)
            .replace("workload", profile=profile, load=load))


class RunCache:
    def __init__(self):
        self.runs = {}

    def get(self, profile, load=0.3, seed=1):
        key = (profile, load, seed)
        if key not in self.runs:
            cfg = scenario(profile, load, seed)
            flows = workload_flows(cfg, Network(cfg, gated=False, trace=False).topo)
            t0 = time.perf_counter()
            gated = run_simulation(cfg, True, flows)
            elapsed = time.perf_counter() - t0
            base = run_simulation(cfg, False, flows)
            self.runs[key] = (gated, base, savings_report(gated, base), elapsed)
        return self.runs[key]


@pytest.fixture(scope="session")
def runs():
    return RunCache()


def test_criterion_01_never_sever(runs):
    details, ok = [], True
    for p in PROFILES:
        gated, _, _, elapsed = runs.get(p)
        good = gated.probe_checks > 0 and not gated.probe_failures and elapsed < 120
        ok &= good
        details.append(f"{p} {gated.probe_checks} probes/{len(gated.probe_failures)} failures/{elapsed:.0f}s")
    assert record(1, "never-sever connectivity", ok, "; ".join(details))


def test_criterion_02_no_gating_loss(runs):
    # every network run the suite uses: the 30% seed sweep and the load trend
    for p in PROFILES:
        for s in SEEDS:
            runs.get(p, 0.3, s)
        for load in (0.1, 0.5):
            for s in TREND_SEEDS:
                runs.get(p, load, s)
    gating = sum(g.drops.get("gating", 0) + b.drops.get("gating", 0) for g, b, _, _ in runs.runs.values())
    buffer_g = sum(g.drops.get("buffer", 0) for g, _, _, _ in runs.runs.values())
    buffer_b = sum(b.drops.get("buffer", 0) for _, b, _, _ in runs.runs.values())
    injected = sum(g.injected for g, _, _, _ in runs.runs.values())
    ok = gating == 0
    assert record(2, "zero loss to gating", ok,
                  f"{len(runs.runs)} scenarios, gating drops {gating}; finite-buffer drops "
                  f"gated {buffer_g} vs always-on {buffer_b} of {injected} packets")


def test_criterion_03_node_zero_penalty():
    details, ok = [], True
    for p in PROFILES:
        cfg = scenario(p)
        assert cfg.transceiver.turn_on_delay == 1_000_000 and cfg.server.pipeline_latency == 3_200_000
        flows = workload_flows(cfg, Network(cfg, gated=False, trace=False).topo)
        lit = run_simulation(cfg, False, flows, gate_nics=False, trace=False)
        dark = run_simulation(cfg, False, flows, gate_nics=True, trace=False)
        same = lit.flow_latency == dark.flow_latency and len(lit.flow_latency) > 0
        ok &= same
        details.append(f"{p} {len(lit.flow_latency)} flows {'identical' if same else 'DIFFER'}")
    assert record(3, "node gating adds zero latency", ok, "; ".join(details))


def test_criterion_04_codec():
    rng = random.Random(4)
    bad = 0
    for _ in range(100_000):
        f = ControlFrame(rng.getrandbits(48), rng.getrandbits(48), rng.getrandbits(32),
                         rng.randrange(16), rng.getrandbits(12), rng.getrandbits(16))
        data = encode_control(f)
        if (len(data) != FRAME_SIZE or int.from_bytes(data[12:14], "big") != ETHERTYPE_LCDC
                or decode_control(data) != f):
            bad += 1
    golden_ok = all(encode_control(GOLDEN_FRAMES[n]) == v for n, v in golden_vectors())
    ok = bad == 0 and golden_ok
    assert record(4, "control-frame codec", ok,
                  f"100000 random frames, {bad} mismatches; golden vectors {'match' if golden_ok else 'DIFFER'}")


def test_criterion_05_watermark_oracle():
    rng = np.random.default_rng(5)
    mismatches = triggers = 0
    cases = 400
    for _ in range(cases):
        capacity = int(rng.integers(1, 257))
        max_stage = int(rng.integers(1, 5))
        holddown = int(rng.integers(0, 60))
        n = int(rng.integers(0, 1001))
        steps = rng.integers(-capacity // 4 - 1, capacity // 4 + 2, size=(n, 4))
        depths = np.clip(np.cumsum(steps, axis=0), 0, capacity)
        times = np.cumsum(rng.integers(0, 20, size=n))
        trace = [(int(t), [int(x) for x in d]) for t, d in zip(times, depths)]
        expected = reference_triggers(capacity, max_stage, holddown, trace)
        triggers += len(expected)
        mismatches += model_triggers(capacity, max_stage, holddown, trace) != expected
    ok = mismatches == 0
    assert record(5, "watermark state machine", ok,
                  f"{cases} traces (<=1000 steps), {triggers} reference triggers, {mismatches} mismatching traces")


def test_criterion_06_headline_trend(runs):
    per_profile = {}
    savings, overheads = [], []
    for p in PROFILES:
        s = [runs.get(p, 0.3, seed)[2].savings for seed in SEEDS]
        o = [runs.get(p, 0.3, seed)[2].latency_overhead for seed in SEEDS]
        per_profile[p] = (np.mean(s), np.mean(o))
        savings += s
        overheads += o
    mean_s, mean_o = float(np.mean(savings)), float(np.mean(overheads))
    trend = {}
    for load in (0.1, 0.3, 0.5):
        trend[load] = float(np.mean([runs.get(p, load, seed)[2].savings for p in PROFILES for seed in TREND_SEEDS]))
    monotone = trend[0.1] > trend[0.3] > trend[0.5]
    ok = mean_s >= 0.45 and mean_o <= 0.12 and monotone
    prof = ", ".join(f"{p} {s:.1%}/{o:+.1%}" for p, (s, o) in per_profile.items())
    assert record(6, "savings and latency at 30% load", ok,
                  f"mean savings {mean_s:.1%} (>=45%), mean latency overhead {mean_o:+.1%} (<=12%) over "
                  f"{len(PROFILES)} profiles x {len(SEEDS)} seeds [{prof}]; savings at 10/30/50% load "
                  f"{trend[0.1]:.1%} > {trend[0.3]:.1%} > {trend[0.5]:.1%}: {monotone}")


def test_criterion_07_activation_time(runs):
    start = time.perf_counter()
    shares = {}
    cost = 0.0
    for p in PROFILES:
        gated, _, _, elapsed = runs.get(p)
        shares[p] = gated.off_link_share
        cost += elapsed
    passing = [p for p, v in shares.items() if v >= 0.5]
    cost += time.perf_counter() - start
    ok = len(passing) >= 3 and cost < 300
    detail = ", ".join(f"{p} {v:.0%}" for p, v in shares.items())
    assert record(7, "gated uplinks mostly off", ok,
                  f"share of gated links off >=50% of the time: {detail}; {len(passing)}/4 workloads meet 50%; "
                  f"gated runtime {cost:.0f}s")


def test_criterion_08_generator_fidelity():
    rng = np.random.default_rng(8)
    worst = 1.0
    detail = []
    for p in PROFILES:
        for quantity in ("size", "interval"):
            cdf = shipped_cdf(p, quantity)
            r = fidelity(cdf, sample_cdf(cdf, rng.uniform(size=100_000)))
            worst = min(worst, r)
            detail.append(f"{p}/{quantity} {r:.4f}")
    ok = worst >= 0.99
    assert record(8, "generator self-fidelity", ok, f"min r {worst:.4f}: " + ", ".join(detail))


def test_criterion_09_power_anchors():
    inventories = power.shipped_inventories()
    rows = {r.utilization: r for r in power.savings_table(0.60, (0.3, 0.5, 0.7), inventories)}
    clos_servers = power.breakdown(inventories[0], "peak", 1.0)["servers"]
    anchors = [
        ("switch optics a third", power.switch_transceiver_fraction(), 1 / 3, 1 / 3),
        ("all-peak Clos servers 92-95%", clos_servers, 0.92, 0.95),
        ("transceivers 20% at 30%", rows[0.3].transceiver_share, 0.20, 0.20),
        ("optics+PHY+NIC 46% at 30%", rows[0.3].transceiver_share + rows[0.3].phy_nic_share, 0.46, 0.46),
        ("DC savings 12% at 30%", rows[0.3].savings_transceivers, 0.12, 0.12),
        ("DC savings up to 27% with PHY+NIC", rows[0.3].savings_with_phy_nic, 0.27, 0.27),
        ("DC savings 23% at 50% with PHY+NIC", rows[0.5].savings_with_phy_nic, 0.23, 0.23),
        ("DC savings 21% at 70% with PHY+NIC", rows[0.7].savings_with_phy_nic, 0.21, 0.21),
    ]
    parts, ok = [], True
    for name, value, lo, hi in anchors:
        good = lo - 0.01 - 1e-12 <= value <= hi + 0.01 + 1e-12
        ok &= good
        parts.append(f"{name}: {value:.2%} {'ok' if good else 'OUT'}")
    assert record(9, "power-model anchors (+-1 pp)", ok, "; ".join(parts))


def test_criterion_10_replay(runs, tmp_path):
    details, ok = [], True
    for p in PROFILES:
        out = tmp_path / p
        code = cli_main(["run", "--scale", "desk", "--profile", p, "--load", "0.3", "--seed", "1",
                         "--duration", "10ms", "--mode", "both", "--verify-replay", "--output-dir", str(out)])
        summary = json.loads((out / "summary.json").read_text()) if code == 0 else {}
        gated, base, _, _ = runs.get(p)
        same = (code == 0 and summary.get("replay_verified") is True
                and summary["runs"]["gated"]["trace_hash"] == gated.trace_hash
                and summary["runs"]["always-on"]["trace_hash"] == base.trace_hash)
        ok &= same
        details.append(f"{p} exit {code} {'hash stable' if same else 'MISMATCH'}")
    assert record(10, "deterministic replay", ok, "; ".join(details))
