"""Watch one rack switch bring a second uplink up and take it down again.

A burst of traffic from one rack toward another cluster fills the rack
switch's first uplink queue. Once it crosses the high watermark the switch
lights the next stage, waits for the laser and the peer's acknowledgement,
and starts spreading packets over both uplinks. When the burst is over and
the queues fall below the low watermark, the hold-down timer expires and the
stage is drained and switched off.

Run:  python3 demos/01_stage_handshake.py
"""

from lcdcsim.config import scaled
from lcdcsim.engine import EventKind
from lcdcsim.network import Network
from lcdcsim.server import FlowSpec
from lcdcsim.topology import NodeKind
from lcdcsim.units import MS, US, to_us

cfg = scaled("desk").replace("run", duration=1 * MS)
net = Network(cfg, gated=True)
topo = net.topo
rsw = next(sw for sw in net.switches if sw.kind is NodeKind.RSW and sw.node.rack == 0)

# four servers in rack 0 each push 300 kB to the far cluster
rack0 = topo.servers[:4]
far = topo.servers[-4:]
flows = [FlowSpec(src, dst, 300_000, 0) for src, dst in zip(rack0, far)]
net.schedule_flows(flows)

last = None


def sample():
    global last
    state = tuple(s.name if s else "-" for s in rsw.status[1:])
    if state != last:
        depths = [rsw.uplinks[k].depth(net.sim.now) for k in range(1, rsw.max_stage + 1)]
        print(f"{to_us(net.sim.now):8.2f} us  stages {state}  uplink queues {depths}")
        last = state
    net.sim.schedule_in(1 * US, EventKind.TIMER, sample)


net.sim.schedule(0, EventKind.TIMER, sample)
net.sim.run_until(cfg.run.duration)

print()
print(f"stage ups {rsw.stats.stage_ups}, downs {rsw.stats.stage_downs}, "
      f"control frames sent {rsw.stats.control_tx}")
print(f"delivered {net.delivered} of {net.injected} packets, drops {net.drops or 'none'}")
print(f"connectivity probes {net.probe.checks}, failures {len(net.probe.failures)}")
