"""Gated versus always-on network on the desk site, for each workload.

For every workload profile the same flow list is replayed twice: once with
all uplinks lit and once with stage gating. The script prints the share of
transceiver energy saved, the change in mean packet latency, and how much of
the time the network spends with each eighth of its gated links on.

Run:  python3 demos/02_desk_savings.py [duration_ms]
"""

import sys

from lcdcsim.config import scaled
from lcdcsim.network import run_scenario
from lcdcsim.traffic import PROFILES
from lcdcsim.units import MS

duration = float(sys.argv[1]) if len(sys.argv) > 1 else 5.0

for name in PROFILES:
    cfg = (scaled("desk").replace("run", duration=int(duration * MS))
           .replace("workload", profile=name, load=0.3))
    result = run_scenario(cfg)
    rep = result.report
    gated = result.runs["gated"]
    hist = " ".join(f"{x:4.0%}" for x in rep.activation_histogram)
    print(f"{name:10s} savings {rep.savings:6.1%}  latency {rep.latency_overhead:+6.1%}  "
          f"links off half the run {gated.off_link_share:4.0%}")
    print(f"{'':10s} time at 1/8 .. 8/8 of links on: {hist}")
