"""Server node: flow submission with NIC laser early warning, line-rate emission."""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

from .datapath import OutputPort, Packet
from .transceiver import Mode, Transceiver, TransceiverParams
from .units import US, ns

MEASURED_PIPELINE = ns(3200)
STACK_BREAKDOWN_PIPELINE = ns(3750)
PIPELINE_PRESETS = {"measured": MEASURED_PIPELINE, "breakdown": STACK_BREAKDOWN_PIPELINE}


@dataclass(frozen=True)
class NodePipelineParams:
    pipeline_latency: int = MEASURED_PIPELINE
    nic_idle_timeout: int = 100 * US
    mtu: int = 1500

    def __post_init__(self) -> None:
        if self.pipeline_latency <= 0:
            raise ValueError("pipeline_latency must be positive")
        if self.nic_idle_timeout < 0:
            raise ValueError("nic_idle_timeout must be >= 0")
        if self.mtu < 1:
            raise ValueError("mtu must be >= 1")


@dataclass(frozen=True)
class FlowSpec:
    src: int
    dst: int
    size: int
    arrival: int

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError("flow source and destination must differ")
        if self.size < 1:
            raise ValueError("flow size must be >= 1 byte")


def flow_to_packets(size: int, mtu: int = 1500) -> list[int]:
    """Packet sizes for a flow of ``size`` bytes: full MTUs then the remainder."""
    if size < 1:
        raise ValueError("zero-size flow")
    full, rest = divmod(size, mtu)
    return [mtu] * full + ([rest] if rest else [])


def first_bit_time(t: int, pipeline: int, laser_ready: int, busy_until: int = 0) -> int:
    return max(t + pipeline, laser_ready, busy_until)


def nic_idle_check(laser: Transceiver, t: int, last_tx: int, timeout: int, pending: int) -> bool:
    """Turn the NIC laser off after ``timeout`` without traffic. True if it did."""
    if pending or t - last_tx < timeout:
        return False
    if laser.advance(t) != Mode.ON:
        return False
    laser.request_off(t)
    return True


class ServerNode:
    def __init__(self, net, node, params: NodePipelineParams, xcvr: TransceiverParams,
                 gate_nic: bool) -> None:
        self.net = net
        self.sim = net.sim
        self.node = node
        self.id = node.id
        self.params = params
        link = net.topo.links[node.ports[0]]
        rsw = link.other(self.id)
        laser = Transceiver(xcvr, Mode.OFF if gate_nic else Mode.ON, name=f"{node.name}:nic")
        self.nic = OutputPort(self.id, 0, link, rsw, link.port_of(rsw), laser, None, True)
        if gate_nic:
            self.nic.on_demand = True
            self.nic.idle_timeout = params.nic_idle_timeout
        self.flows_sent = 0
        self.rx_packets = 0

    def submit_flow(self, flow: FlowSpec, flow_id: int) -> int:
        """Inject ``flow`` now; returns the time of its first bit on the wire."""
        sim = self.sim
        net = self.net
        now = sim.now
        if self.nic.on_demand:
            # early warning: the laser starts turning on while the stack runs
            self.nic.laser.request_on(now)
        eligible = now + self.params.pipeline_latency
        dst_mac = net.topo.nodes[flow.dst].mac
        sizes = flow_to_packets(flow.size, self.params.mtu)
        net.open_flow(flow_id, flow, len(sizes))
        first = None
        for size in sizes:
            packet = Packet(net.next_pid(), flow_id, self.id, flow.dst, dst_mac, size, flow.arrival)
            net.injected += 1
            end = self.nic.transmit(sim, packet, eligible)
            if first is None:
                first = end - self.nic.serialization(size)
        self.flows_sent += 1
        return first

    def receive(self, packet: Packet, in_port: int) -> None:
        self.rx_packets += 1
        self.net.deliver(packet, self)
