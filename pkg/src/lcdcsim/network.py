"""Assembles a site (switches, servers, CAM tables), runs a workload, reports.

:func:`run_simulation` executes one mode; :func:`run_scenario` executes the
modes a scenario asks for and attaches the savings comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import ConfigError, ScenarioConfig
from .datapath import Packet
from .engine import EventKind, SimulationSummary, Simulator
from .frames import FRAME_SIZE
from .metrics import (
    LatencyStats,
    LinkTimeline,
    activation_histogram,
    link_off_fraction,
    merge_on_intervals,
    savings_report,
)
from .server import FlowSpec, ServerNode
from .switch import LcdcSwitch, StageStatus
from .topology import LinkTier, NodeKind, Topology, build_site, servers_connected
from .traffic import generate, load_trace, profile
from .transceiver import Mode


class ConnectivityError(AssertionError):
    pass


@dataclass
class ProbeLog:
    checks: int = 0
    failures: list = field(default_factory=list)


def _ring_next(index: int, n: int) -> int | None:
    """Neighbour one step closer to index 0 on a ring of ``n``; ties go down."""
    if index == 0 or n < 2:
        return None
    if n == 2:
        return 0
    down = index
    up = n - index
    return index - 1 if down <= up else (index + 1) % n


class Network:
    def __init__(self, config: ScenarioConfig, gated: bool, gate_nics: bool | None = None,
                 trace: bool = True, probe: bool | None = None) -> None:
        config.validate()
        self.config = config
        self.gated = gated
        run = config.run
        # the always-on baseline keeps NIC lasers lit unless asked otherwise
        self.gate_nics = (gated and run.gate_nics) if gate_nics is None else gate_nics
        self.sim = Simulator(trace=trace)
        self.topo: Topology = build_site(config.site)
        topo = self.topo
        if gated and config.site.csw_per_cluster > 1 and config.site.csw_ring_links == 0:
            raise ConfigError("[site] gated mode needs csw_ring_links > 0 to reach racks through idle stages")
        if gated and config.site.fc_count > 1 and config.site.fc_ring_links == 0:
            raise ConfigError("[site] gated mode needs fc_ring_links > 0 to reach clusters through idle stages")

        self.injected = 0
        self.delivered = 0
        self.drops: dict[str, int] = {}  # data packets only
        self.control_drops: dict[str, int] = {}
        self.control_created = 0
        self.control_consumed = 0
        self._pid = 0
        self.latency = LatencyStats(keep_samples=run.keep_samples)
        self.flow_remaining: dict[int, int] = {}
        self.flow_arrival: dict[int, int] = {}
        self.flow_latency: dict[int, int] = {}
        self.transitions = 0
        self.probe_enabled = run.probe if probe is None else probe
        self.probe = ProbeLog()

        xcvr_by_tier = {}
        for tier, bw in ((LinkTier.SERVER_RSW, config.site.server_bw), (LinkTier.RSW_CSW, config.site.rsw_uplink_bw),
                         (LinkTier.CSW_FC, config.site.csw_uplink_bw), (LinkTier.CSW_RING, config.site.ring_bw),
                         (LinkTier.FC_RING, config.site.ring_bw)):
            xcvr_by_tier[tier] = config.transceiver.params(bw)
        sw_params = config.switch.params()
        srv_params = config.server.params()

        self.devices: dict[int, object] = {}
        self.switches: list[LcdcSwitch] = []
        self.servers: list[ServerNode] = []
        for node in topo.nodes:
            if node.kind is NodeKind.SERVER:
                dev = ServerNode(self, node, srv_params, xcvr_by_tier[LinkTier.SERVER_RSW], self.gate_nics)
                self.servers.append(dev)
            else:
                dev = LcdcSwitch(self, node, sw_params, gated, xcvr_by_tier,
                                 gate_rings=gated and run.gate_rings, idle_timeout=config.server.nic_idle_timeout)
                self.switches.append(dev)
            self.devices[node.id] = dev
        for dev in self.devices.values():
            for port in self._ports(dev):
                port.deliver = self.devices[port.peer].receive
        self._program_cams()

    @staticmethod
    def _ports(dev):
        return dev.ports if isinstance(dev, LcdcSwitch) else [dev.nic]

    # ------------------------------------------------------------ CAM programming

    def _program_cams(self) -> None:
        topo = self.topo
        cfg = topo.config
        nodes = topo.nodes
        rack_cluster = {topo.logical_ports[r]: nodes[r].cluster for r in topo.rsws}
        for sw in self.switches:
            node = sw.node
            cam = sw.cam
            ups = [0] + [1 << p.index for p in sw.uplinks[1:]]
            cam.uplink_mask = sum(ups)
            for rsw in topo.rsws:
                for s in range(cfg.servers_per_rack):
                    server = topo.servers[nodes[rsw].rack * cfg.servers_per_rack + s]
                    cam.program_destination(nodes[server].mac, topo.logical_ports[rsw])
            down = {}
            for port in sw.ports:
                peer = nodes[port.peer]
                if node.kind is NodeKind.RSW and peer.kind is NodeKind.SERVER:
                    cam.program_host(peer.mac, port.index)
                elif node.kind is NodeKind.CSW and peer.kind is NodeKind.RSW:
                    down[topo.logical_ports[peer.id]] = 1 << port.index
                elif node.kind is NodeKind.FC and peer.kind is NodeKind.CSW:
                    down[peer.cluster] = down.get(peer.cluster, 0) | (1 << port.index)
            for k in range(1, len(cam.stage_maps) + 1):
                upmask = sum(ups[1:k + 1])
                for logical, cluster in rack_cluster.items():
                    if node.kind is NodeKind.RSW:
                        mask = 0 if logical == sw.logical else upmask
                    elif node.kind is NodeKind.CSW:
                        mask = down[logical] if cluster == node.cluster else upmask
                    else:
                        mask = down.get(cluster, 0)
                    cam.set_map(k, logical, mask)
            # detour toward index 0 of the same tier, whose stage-1 links always exist
            tier = LinkTier.CSW_RING if node.kind is NodeKind.CSW else LinkTier.FC_RING
            n = cfg.csw_per_cluster if node.kind is NodeKind.CSW else cfg.fc_count
            nxt = _ring_next(node.index, n) if node.kind is not NodeKind.RSW else None
            if nxt is not None:
                for port in sw.ports:
                    if port.link.tier is tier and nodes[port.peer].index == nxt:
                        sw.fallback_mask |= 1 << port.index
        for logical, members in topo.multicast_groups.items():
            self._program_multicast(logical, members)

    def add_multicast_group(self, members: Sequence[int]) -> int:
        """Register a multicast group over stage-1 links; returns its MAC."""
        logical = self.topo.add_multicast_group(tuple(members))
        self._program_multicast(logical, tuple(members))
        return self.topo.multicast_mac(logical)

    def _program_multicast(self, logical: int, members: tuple[int, ...]) -> None:
        topo = self.topo
        nodes = topo.nodes
        mac = topo.multicast_mac(logical)
        racks = {nodes[m].rack for m in members}
        clusters = {nodes[m].cluster for m in members}
        for sw in self.switches:
            node = sw.node
            sw.cam.program_destination(mac, logical, multicast=True)
            mask = 0
            for port in sw.ports:
                peer = nodes[port.peer]
                if node.kind is NodeKind.RSW:
                    if peer.kind is NodeKind.SERVER and peer.id in members:
                        mask |= 1 << port.index
                    elif port.stage == 1 and racks - {node.rack}:
                        mask |= 1 << port.index
                elif node.kind is NodeKind.CSW and node.index == 0:
                    if peer.kind is NodeKind.RSW and peer.rack in racks:
                        mask |= 1 << port.index
                    elif port.stage == 1 and clusters - {node.cluster}:
                        mask |= 1 << port.index
                elif node.kind is NodeKind.FC and node.index == 0:
                    if peer.kind is NodeKind.CSW and peer.index == 0 and peer.cluster in clusters:
                        mask |= 1 << port.index
            sw.cam.set_map(1, logical, mask)

    # ------------------------------------------------------------ bookkeeping used by devices

    def next_pid(self) -> int:
        self._pid += 1
        return self._pid

    def clone(self, packet: Packet) -> Packet:
        twin = packet.copy(self.next_pid())
        if packet.control is not None:
            self.control_created += 1
        else:
            self.injected += 1
        return twin

    def control_packet(self, data: bytes, src: int, dst_mac: int) -> Packet:
        self.control_created += 1
        return Packet(self.next_pid(), -1, src, -1, dst_mac, FRAME_SIZE, self.sim.now, data)

    def consume_control(self, packet: Packet) -> None:
        self.control_consumed += 1

    def consume_copy(self, packet: Packet) -> None:
        self.drop(packet, "multicast-prune")

    def drop(self, packet: Packet, cause: str) -> None:
        if packet.control is not None:
            self.control_consumed += 1
            self.control_drops[cause] = self.control_drops.get(cause, 0) + 1
        else:
            self.drops[cause] = self.drops.get(cause, 0) + 1

    def open_flow(self, flow_id: int, flow: FlowSpec, packets: int) -> None:
        self.flow_remaining[flow_id] = packets
        self.flow_arrival[flow_id] = flow.arrival

    def deliver(self, packet: Packet, server: ServerNode) -> None:
        now = self.sim.now
        self.delivered += 1
        self.latency.record(now - packet.injected_at)
        fid = packet.flow_id
        left = self.flow_remaining.get(fid)
        if left is not None:
            if left == 1:
                del self.flow_remaining[fid]
                self.flow_latency[fid] = now - self.flow_arrival.pop(fid)
            else:
                self.flow_remaining[fid] = left - 1

    def data_in_flight(self) -> int:
        """Data packets on a wire, in an egress queue or waiting at an ingress.

        Egress queues need no separate count: enqueuing schedules the
        arrival at the far end, so those packets show up as pending events.
        """
        pending = sum(1 for ev in self.sim.queue._heap
                      if ev.kind == EventKind.PACKET_ARRIVAL and ev.args[0].control is None)
        queued = sum(1 for sw in self.switches for q in sw.inputs for p in q if p.control is None)
        return pending + queued

    def conservation_holds(self) -> bool:
        return self.injected == self.delivered + sum(self.drops.values()) + self.data_in_flight()

    # ------------------------------------------------------------ stage transitions

    def link_is_active(self, link) -> bool:
        if not link.stage_index:
            return True
        owner = self.devices[link.owner]
        return owner.status[link.stage_index] is StageStatus.ACTIVE

    def on_link_state(self, switch: LcdcSwitch, port, up: bool) -> None:
        self.transitions += 1
        self._probe()

    def on_transition(self, switch: LcdcSwitch) -> None:
        self.transitions += 1
        self._probe()

    def _probe(self) -> None:
        if not self.probe_enabled:
            return
        self.probe.checks += 1
        if not servers_connected(self.topo, self.link_is_active):
            self.probe.failures.append(self.sim.now)

    # ------------------------------------------------------------ workload

    def schedule_flows(self, flows: Sequence[FlowSpec]) -> None:
        self._flows = flows
        self._next_flow = 0
        if flows:
            self.sim.schedule(flows[0].arrival, EventKind.FLOW_INJECTION, self._inject)

    def _inject(self) -> None:
        flows = self._flows
        i = self._next_flow
        now = self.sim.now
        while i < len(flows) and flows[i].arrival == now:
            flow = flows[i]
            self.devices[flow.src].submit_flow(flow, i)
            i += 1
        self._next_flow = i
        if i < len(flows):
            self.sim.schedule(flows[i].arrival, EventKind.FLOW_INJECTION, self._inject)

    # ------------------------------------------------------------ energy and timelines

    def transceivers(self):
        """``(link, owner_node, laser, managed)`` for every transmitter in the site."""
        out = []
        for dev in self.devices.values():
            for port in self._ports(dev):
                link = port.link
                managed = bool(link.stage_index) or (isinstance(dev, ServerNode))
                if self.config.run.gate_rings and link.tier in (LinkTier.CSW_RING, LinkTier.FC_RING):
                    managed = True
                out.append((link, dev.id, port.laser, managed))
        return out

    def timelines(self, t_end: int) -> list[LinkTimeline]:
        lasers: dict[int, list] = {}
        for link, _, laser, _ in self.transceivers():
            if link.stage_index:
                lasers.setdefault(link.id, []).append(laser)
        out = []
        for lid in sorted(lasers):
            spans = []
            for laser in lasers[lid]:
                spans += [(s, e) for s, e, mode in laser.history(t_end) if mode != Mode.OFF]
            link = self.topo.links[lid]
            name = f"{self.topo.nodes[link.owner].name}:s{link.stage_index}"
            out.append(LinkTimeline(lid, name, merge_on_intervals(spans, t_end)))
        return out


@dataclass
class RunResult:
    mode: str
    workload_key: tuple
    duration: int
    flows: int
    injected: int
    delivered: int
    drops: dict
    in_flight: int
    latency: LatencyStats
    flow_latency: dict
    energy_managed: float
    energy_all: float
    energy_by_link: dict
    timelines: list
    activation_histogram: list
    off_link_share: float
    probe_checks: int
    probe_failures: list
    stage_ups: int
    stage_downs: int
    control_frames: int
    blind_sends: int
    summary: SimulationSummary
    trace_hash: str | None

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "flows": self.flows,
            "packets_injected": self.injected,
            "packets_delivered": self.delivered,
            "packets_in_flight": self.in_flight,
            "drops": dict(self.drops),
            "latency": self.latency.summary(),
            "energy_managed_j": self.energy_managed,
            "energy_all_j": self.energy_all,
            "activation_histogram": self.activation_histogram,
            "gated_links_off_half_the_time": self.off_link_share,
            "probe_checks": self.probe_checks,
            "probe_failures": len(self.probe_failures),
            "stage_ups": self.stage_ups,
            "stage_downs": self.stage_downs,
            "control_frames": self.control_frames,
            "blind_sends": self.blind_sends,
            "events": self.summary.events_processed,
            "trace_hash": self.trace_hash,
        }


def workload_flows(config: ScenarioConfig, topo: Topology) -> list[FlowSpec]:
    w = config.workload
    duration = config.run.duration
    if w.trace:
        flows = [f for f in load_trace(w.trace, topo) if f.arrival < duration]
        return flows
    prof = profile(w.profile, tuple(w.locality) if w.locality else None)
    rng = np.random.Generator(np.random.PCG64(config.run.seed))
    return generate(prof, topo, duration, rng, load=w.load)


def workload_key(config: ScenarioConfig) -> tuple:
    w = config.workload
    return (w.profile, w.load, w.trace, tuple(w.locality), config.run.seed, config.run.duration,
            config.site, config.server)


def run_simulation(config: ScenarioConfig, gated: bool, flows: Sequence[FlowSpec] | None = None,
                   gate_nics: bool | None = None, trace: bool = True,
                   observer: Callable[[Network], None] | None = None) -> RunResult:
    """Run one mode to ``config.run.duration`` and collect its metrics."""
    net = Network(config, gated, gate_nics=gate_nics, trace=trace)
    if flows is None:
        flows = workload_flows(config, net.topo)
    net.schedule_flows(flows)
    if observer is not None:
        observer(net)
    t_end = config.run.duration
    summary = net.sim.run_until(t_end)
    return collect(net, summary, len(flows))


def collect(net: Network, summary: SimulationSummary, n_flows: int) -> RunResult:
    t_end = net.sim.now
    energy_by_link: dict[int, float] = {}
    managed = 0.0
    total = 0.0
    for link, _, laser, is_managed in net.transceivers():
        e = laser.energy_in(0, t_end)
        energy_by_link[link.id] = energy_by_link.get(link.id, 0.0) + e
        total += e
        if is_managed:
            managed += e
    timelines = net.timelines(t_end)
    in_flight = net.data_in_flight()
    blind = sum(sw.stats.blind_sends for sw in net.switches)
    return RunResult(
        mode="gated" if net.gated else "always-on",
        workload_key=workload_key(net.config),
        duration=t_end,
        flows=n_flows,
        injected=net.injected,
        delivered=net.delivered,
        drops=dict(net.drops),
        in_flight=in_flight,
        latency=net.latency,
        flow_latency=dict(net.flow_latency),
        energy_managed=managed,
        energy_all=total,
        energy_by_link=energy_by_link,
        timelines=timelines,
        activation_histogram=activation_histogram(timelines, t_end),
        off_link_share=link_off_fraction(timelines, t_end),
        probe_checks=net.probe.checks,
        probe_failures=list(net.probe.failures),
        stage_ups=sum(sw.stats.stage_ups for sw in net.switches),
        stage_downs=sum(sw.stats.stage_downs for sw in net.switches),
        control_frames=net.control_created,
        blind_sends=blind,
        summary=summary,
        trace_hash=summary.trace_hash,
    )


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    runs: dict
    report: object | None

    def as_dict(self) -> dict:
        out = {"runs": {m: r.as_dict() for m, r in self.runs.items()}}
        if self.report is not None:
            rep = self.report.as_dict()
            gated = self.runs["gated"]
            base = self.runs["always-on"]
            rep["transceiver_savings_all"] = 1 - gated.energy_all / base.energy_all if base.energy_all else None
            out["savings"] = rep
        return out


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    modes = {"gated": ["gated"], "always-on": ["always-on"], "both": ["gated", "always-on"]}[config.run.mode]
    topo = build_site(config.site)
    flows = workload_flows(config, topo)
    runs = {}
    for mode in modes:
        runs[mode] = run_simulation(config, mode == "gated", flows)
    report = savings_report(runs["gated"], runs["always-on"]) if len(runs) == 2 and config.run.duration > 0 else None
    return ScenarioResult(config, runs, report)
