"""LCDC switch: CIOQ datapath, CAM forwarding, backlog monitor and stage control.

The pure pieces (:class:`BacklogMonitor`, :class:`CamTables`,
:func:`ingress_arbitrate`, :func:`schedule_output`, :func:`process_control`)
carry no simulator state and are exercised directly by the tests. The
:class:`LcdcSwitch` runtime wires them to the event kernel.

Stage ownership: the lower-tier switch of a gated link owns its stage
machine (RSW for RSW-CSW links, CSW for CSW-FC links). The upper-tier end is
the *peer*: it lights its own transmitter on an enable frame, acknowledges,
and on a disable frame drains its side of the link before acknowledging.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import ceil, floor
from typing import NamedTuple, Sequence

from .datapath import OutputPort, Packet
from .engine import EventKind
from .frames import ControlFrame, FRAME_SIZE, Opcode, decode_control, encode_control
from .topology import LinkTier, NodeKind
from .transceiver import Mode, Transceiver, TransceiverParams
from .units import US, cycles, serialization

VIRTUAL_PORT = -1


class StageStatus(Enum):
    IDLE = "idle"
    ACTIVATING = "activating"
    ACTIVE = "active"
    DRAINING = "draining"
    DEACTIVATING = "deactivating"


class Trigger(Enum):
    NONE = "none"
    STAGE_UP = "stage-up"
    STAGE_DOWN = "stage-down"


class CamMiss(KeyError):
    pass


@dataclass(frozen=True)
class SwitchParams:
    queue_capacity: int = 128
    high_watermark: float = 0.75
    low_watermark: float = 0.22
    holddown: int = 50 * US
    control_ttl: int = 3
    pipeline_latency: int = cycles(7)
    arbiter_cycle: int = cycles(1)
    downlink_assist: bool = True
    assist_repeat: int = 50 * US
    ring_balance: bool = True


def switch_transit_delay(size_bytes: int = 0, bandwidth: float | None = None,
                         params: SwitchParams | None = None) -> int:
    """Pipeline latency plus the egress serialization of one frame."""
    params = params or SwitchParams()
    delay = params.pipeline_latency
    if size_bytes:
        delay += serialization(size_bytes, bandwidth)
    return delay


# ---------------------------------------------------------------- monitor


@dataclass(frozen=True)
class BacklogMonitor:
    capacity: int = 128
    high_watermark: float = 0.75
    low_watermark: float = 0.22

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        if not 0 <= self.low_watermark < self.high_watermark <= 1:
            raise ValueError("need 0 <= low < high <= 1")

    @property
    def high_limit(self) -> Fraction:
        return Fraction(repr(self.high_watermark)) * self.capacity

    @property
    def low_limit(self) -> Fraction:
        return Fraction(repr(self.low_watermark)) * self.capacity

    @property
    def up_depth(self) -> int:
        """Smallest integer depth that counts as above the high watermark."""
        return floor(self.high_limit) + 1

    @property
    def down_depth(self) -> int:
        """Depths strictly below this count as below the low watermark."""
        return ceil(self.low_limit)

    def evaluate(self, depths: Sequence[int], active_stage: int, max_stage: int,
                 holddown_expired: bool = True) -> Trigger:
        if active_stage < max_stage and any(d > self.high_limit for d in depths):
            return Trigger.STAGE_UP
        if active_stage > 1 and holddown_expired and all(d < self.low_limit for d in depths):
            return Trigger.STAGE_DOWN
        return Trigger.NONE


class WatermarkController:
    """Monitor plus instantaneous stage bookkeeping, for scripted depth traces.

    Each :meth:`step` feeds the depths of the uplinks of the active stages
    at time ``t``; a trigger moves the stage by one and restarts the
    hold-down timer. Only the first ``active_stage`` depths are considered.
    """

    def __init__(self, monitor: BacklogMonitor, max_stage: int, holddown: int,
                 active_stage: int = 1) -> None:
        self.monitor = monitor
        self.max_stage = max_stage
        self.holddown = holddown
        self.active_stage = active_stage
        self.last_transition: int | None = None

    def step(self, t: int, depths: Sequence[int]) -> Trigger:
        expired = self.last_transition is None or t - self.last_transition >= self.holddown
        trigger = self.monitor.evaluate(depths[: self.active_stage], self.active_stage,
                                        self.max_stage, expired)
        if trigger is Trigger.STAGE_UP:
            self.active_stage += 1
            self.last_transition = t
        elif trigger is Trigger.STAGE_DOWN:
            self.active_stage -= 1
            self.last_transition = t
        return trigger

    def run(self, trace: Sequence[tuple[int, Sequence[int]]]) -> list[tuple[int, Trigger, int]]:
        out = []
        for t, depths in trace:
            trigger = self.step(t, depths)
            if trigger is not Trigger.NONE:
                out.append((t, trigger, self.active_stage))
        return out


# ---------------------------------------------------------------- CAM


class CamTables:
    """Destination lookup plus per-stage one-hot output maps."""

    def __init__(self, max_stage: int = 1) -> None:
        self.logical_lookup: dict[int, tuple[int, bool]] = {}
        self.stage_maps: list[dict[int, int]] = [dict() for _ in range(max(1, max_stage))]
        self.host_ports: dict[int, int] = {}
        self.uplink_mask = 0

    def program_destination(self, mac: int, logical: int, multicast: bool = False) -> None:
        self.logical_lookup[mac] = (logical, multicast)

    def program_host(self, mac: int, port: int) -> None:
        self.host_ports[mac] = port

    def set_map(self, stage: int, logical: int, mask: int) -> None:
        self.stage_maps[stage - 1][logical] = mask

    def lookup_logical(self, mac: int) -> tuple[int, bool]:
        try:
            return self.logical_lookup[mac]
        except KeyError:
            raise CamMiss(f"no CAM entry for MAC {mac:012x}") from None

    def permitted(self, stage: int, logical: int) -> int:
        return self.stage_maps[stage - 1].get(logical, 0)

    def is_monotone(self) -> bool:
        """Map k restricted to uplinks is a subset of map k+1 for every logical port."""
        up = self.uplink_mask
        for lower, upper in zip(self.stage_maps, self.stage_maps[1:]):
            for logical, mask in lower.items():
                if mask & up & ~upper.get(logical, 0):
                    return False
        return True


def mask_ports(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


# ---------------------------------------------------------------- datapath pieces


def ingress_arbitrate(inputs: Sequence, virtual, last_served: int) -> int | None:
    """Pick the next input to serve.

    The virtual port (locally generated control frames) always wins.
    Otherwise round robin over physical inputs starting after
    ``last_served``. Returns :data:`VIRTUAL_PORT`, a port index, or None.
    """
    if virtual:
        return VIRTUAL_PORT
    n = len(inputs)
    for offset in range(1, n + 1):
        i = (last_served + offset) % n
        if inputs[i]:
            return i
    return None


def schedule_output(mask: int, backlogs: Sequence[int], multicast: bool = False) -> list[int]:
    """Output queue(s) for a packet whose permitted map is ``mask``.

    Unicast picks the minimum backlog, lowest index on ties; multicast gets
    one copy per port in the map.
    """
    ports = mask_ports(mask)
    if multicast or not ports:
        return ports
    best = ports[0]
    for p in ports[1:]:
        if backlogs[p] < backlogs[best]:
            best = p
    return [best]


class ControlAction(NamedTuple):
    notify: bool
    forward: ControlFrame | None
    drop_reason: str | None


def process_control(frame: ControlFrame, local_sender_id: int) -> ControlAction:
    if frame.opcode not in Opcode._value2member_map_:
        return ControlAction(False, None, "unknown-opcode")
    if frame.sender_id == local_sender_id:
        return ControlAction(False, frame, None)
    if frame.ttl <= 1:
        return ControlAction(True, None, "ttl")
    return ControlAction(True, frame.with_ttl(frame.ttl - 1), None)


# ---------------------------------------------------------------- runtime switch


@dataclass
class SwitchStats:
    forwarded: int = 0
    control_rx: int = 0
    control_tx: int = 0
    control_dropped: dict = field(default_factory=dict)
    stage_ups: int = 0
    stage_downs: int = 0
    cancellations: int = 0
    blind_sends: int = 0
    assist_requests: int = 0


class LcdcSwitch:
    def __init__(self, net, node, params: SwitchParams, gated: bool,
                 xcvr_params: dict, gate_rings: bool = False, idle_timeout: int = 0) -> None:
        self.net = net
        self.sim = net.sim
        self.node = node
        self.id = node.id
        self.mac = node.mac
        self.kind = node.kind
        self.params = params
        self.gated = gated
        self.monitor = BacklogMonitor(params.queue_capacity, params.high_watermark, params.low_watermark)
        self._up_depth = self.monitor.up_depth
        self._down_depth = self.monitor.down_depth
        self.stats = SwitchStats()

        topo = net.topo
        self.ports: list[OutputPort] = []
        self.uplinks: list[OutputPort | None] = [None]  # 1-based by stage
        self.peer_ports: dict[tuple[int, int], int] = {}  # (owner id, stage) -> port index
        self.peer_enabled: list[bool] = []
        self.peer_tokens: list[int] = []
        self.peer_of: list[tuple[int, int] | None] = []  # (owner, stage) of gated links we do not own
        usable = 0
        for idx, lid in enumerate(node.ports):
            link = topo.links[lid]
            peer = link.other(self.id)
            lit = (not gated) or link.stage_index <= 1
            on_demand = gated and gate_rings and link.tier in (LinkTier.CSW_RING, LinkTier.FC_RING)
            mode = Mode.ON if lit and not on_demand else Mode.OFF
            laser = Transceiver(xcvr_params[link.tier], mode, name=f"{node.name}:{idx}")
            port = OutputPort(self.id, idx, link, peer, link.port_of(peer), laser,
                              params.queue_capacity, topo.nodes[peer].kind is not NodeKind.SERVER)
            if on_demand:
                port.on_demand = True
                port.idle_timeout = idle_timeout
            if link.owner == self.id:
                port.stage = link.stage_index
                self.uplinks.append(port)
            elif link.stage_index:
                self.peer_ports[(link.owner, link.stage_index)] = idx
            self.peer_of.append((link.owner, link.stage_index) if link.stage_index and link.owner != self.id else None)
            self.ports.append(port)
            self.peer_enabled.append(lit)
            self.peer_tokens.append(0)
            if lit or on_demand:
                usable |= 1 << idx
        self.uplinks.sort(key=lambda p: 0 if p is None else p.stage)
        self.max_stage = len(self.uplinks) - 1
        self.usable = usable
        self.switch_port_mask = sum(1 << p.index for p in self.ports if p.switch_facing)

        if gated:
            self.status = [None] + [StageStatus.ACTIVE] + [StageStatus.IDLE] * (self.max_stage - 1)
            self.top = min(1, self.max_stage)
        else:
            self.status = [None] + [StageStatus.ACTIVE] * self.max_stage
            self.top = self.max_stage
        if self.max_stage == 0:
            self.status = [None]
        self.sched_stage = max(self.top, 1)
        self.acked = [False] * (self.max_stage + 1)
        self.stage_tokens = [0] * (self.max_stage + 1)
        self.holddown_until = 0
        self.assist = gated and params.downlink_assist
        # ring balancing: logical port -> ring ports toward neighbours known to
        # have an enabled link to that rack (learned from flooded frames)
        self.spill: dict[int, int] = {}
        self.ring_balance = gated and params.ring_balance
        self.ring_mask = 0
        self.ring_ports_to: dict[int, int] = {}
        for p in self.ports:
            if p.link.tier in (LinkTier.CSW_RING, LinkTier.FC_RING):
                self.ring_mask |= 1 << p.index
                self.ring_ports_to[p.peer] = self.ring_ports_to.get(p.peer, 0) | (1 << p.index)
        self.assist_armed = [True] * len(self.ports)
        self.assist_next = [0] * len(self.ports)
        self._down_version = 0
        self._down_at: int | None = None

        self.cam = CamTables(max(self.max_stage, 1))
        self.fallback_mask = 0
        self.logical = topo.logical_ports.get(self.id, -1)

        n = len(self.ports)
        self.inputs = [deque() for _ in range(n)]
        self.virtual: deque = deque()
        self.last_served = n - 1
        self.pending_inputs = 0
        self.arb_free_at = 0
        self.arb_scheduled = False

    # ------------------------------------------------------------ ingress

    def receive(self, packet: Packet, in_port: int) -> None:
        self.inputs[in_port].append(packet)
        self._kick()

    def _kick(self) -> None:
        self.pending_inputs += 1
        if self.arb_scheduled:
            return
        now = self.sim.now
        if now >= self.arb_free_at:
            self._arbitrate()
        else:
            self.arb_scheduled = True
            self.sim.schedule(self.arb_free_at, EventKind.ARBITRATE, self._arbitrate_event)

    def _arbitrate_event(self) -> None:
        self.arb_scheduled = False
        self._arbitrate()

    def _arbitrate(self) -> None:
        if self.virtual:
            packet = self.virtual.popleft()
            in_port = VIRTUAL_PORT
        else:
            inputs = self.inputs
            n = len(inputs)
            in_port = None
            for offset in range(1, n + 1):
                i = (self.last_served + offset) % n
                if inputs[i]:
                    in_port = i
                    break
            self.last_served = in_port
            packet = inputs[in_port].popleft()
        self.pending_inputs -= 1
        self.arb_free_at = self.sim.now + self.params.arbiter_cycle
        if packet.control is None:
            self._forward_data(packet, in_port)
        else:
            self._process_control(packet, in_port)
        if self.pending_inputs and not self.arb_scheduled:
            self.arb_scheduled = True
            self.sim.schedule(self.arb_free_at, EventKind.ARBITRATE, self._arbitrate_event)

    # ------------------------------------------------------------ data path

    def _forward_data(self, packet: Packet, in_port: int) -> None:
        net = self.net
        now = self.sim.now
        entry = self.cam.logical_lookup.get(packet.dst_mac)
        if entry is None:
            net.drop(packet, "cam-miss")
            return
        logical, multicast = entry
        packet.logical = logical
        packet.multicast = multicast
        packet.hops += 1
        if packet.hops > 16:
            net.drop(packet, "loop")
            return
        if multicast:
            self._forward_multicast(packet, in_port)
            return
        if logical == self.logical:
            idx = self.cam.host_ports.get(packet.dst_mac)
            if idx is None:
                net.drop(packet, "cam-miss")
                return
        else:
            usable = self.usable
            mask = self.cam.stage_maps[self.sched_stage - 1].get(logical, 0) & usable
            spill = self.spill.get(logical, 0) if in_port < 0 or not (self.ring_mask >> in_port) & 1 else 0
            if not mask:
                mask = (self.fallback_mask | spill) & usable
                if not mask:
                    net.drop(packet, "gating")
                    return
            elif spill:
                mask |= spill & usable
            if mask & (mask - 1):
                ports = self.ports
                idx = -1
                best = 1 << 62
                m = mask
                while m:
                    low = m & -m
                    i = low.bit_length() - 1
                    m ^= low
                    d = ports[i].depth(now)
                    if d < best:
                        best = d
                        idx = i
            else:
                idx = mask.bit_length() - 1
        port = self.ports[idx]
        depth = port.depth(now)
        if depth >= port.capacity:
            net.drop(packet, "buffer")
            return
        if port.stage and self.status[port.stage] is not StageStatus.ACTIVE:
            self.stats.blind_sends += 1
        port.transmit(self.sim, packet, now + self.params.pipeline_latency)
        self.stats.forwarded += 1
        if port.stage and self.gated and depth + 1 >= self._up_depth:
            self._evaluate_up()
        elif self.assist and self.peer_of[idx] is not None:
            self._check_assist(idx, depth + 1, now)

    def _forward_multicast(self, packet: Packet, in_port: int) -> None:
        now = self.sim.now
        mask = self.cam.stage_maps[0].get(packet.logical, 0) & self.usable
        if in_port >= 0:
            mask &= ~(1 << in_port)
        targets = schedule_output(mask, (), multicast=True)
        if not targets:
            self.net.consume_copy(packet)
            return
        for n, idx in enumerate(targets):
            copy = packet if n == 0 else self.net.clone(packet)
            port = self.ports[idx]
            if port.depth(now) >= port.capacity:
                self.net.drop(copy, "buffer")
                continue
            port.transmit(self.sim, copy, now + self.params.pipeline_latency)

    # ------------------------------------------------------------ control path

    def _emit_control(self, opcode: Opcode, stage: int, dst_mac: int) -> None:
        frame = ControlFrame(dst_mac, self.mac, self.id, opcode, stage, self.params.control_ttl)
        packet = self.net.control_packet(encode_control(frame), self.id, dst_mac)
        self.virtual.append(packet)
        self.stats.control_tx += 1
        self._kick()

    def _process_control(self, packet: Packet, in_port: int) -> None:
        frame = decode_control(packet.control)
        action = process_control(frame, self.id)
        if in_port != VIRTUAL_PORT:
            self.stats.control_rx += 1
        if action.notify:
            self._notify(frame)
        if action.forward is None:
            reason = action.drop_reason
            self.stats.control_dropped[reason] = self.stats.control_dropped.get(reason, 0) + 1
            self.net.consume_control(packet)
            return
        self._flood(packet, action.forward, in_port)

    def _flood(self, packet: Packet, frame: ControlFrame, in_port: int) -> None:
        now = self.sim.now
        mask = self.usable & self.switch_port_mask
        if in_port >= 0:
            mask &= ~(1 << in_port)
        targets = mask_ports(mask)
        if not targets:
            self.net.consume_control(packet)
            return
        data = packet.control if frame.ttl == self.params.control_ttl and in_port < 0 else encode_control(frame)
        eligible = now + self.params.pipeline_latency
        for n, idx in enumerate(targets):
            copy = packet if n == 0 else self.net.clone(packet)
            copy.control = data
            # control frames bypass the buffer-capacity check
            self.ports[idx].transmit(self.sim, copy, eligible)

    def _notify(self, frame: ControlFrame) -> None:
        if not self.gated:
            return
        opcode = frame.opcode
        if self.ring_balance and self.ring_ports_to:
            self._snoop(frame)
        if opcode == Opcode.ENABLE or opcode == Opcode.DISABLE:
            idx = self.peer_ports.get((frame.sender_id, frame.stage))
            if idx is None:
                return
            if opcode == Opcode.ENABLE:
                self._peer_enable(idx, frame)
            else:
                self._peer_disable(idx, frame)
        elif frame.dst_mac == self.mac and 1 <= frame.stage <= self.max_stage:
            port = self.uplinks[frame.stage]
            if port.peer != frame.sender_id:
                return
            if opcode == Opcode.ACK_ENABLE:
                self._on_ack_enable(frame.stage)
            elif opcode == Opcode.ACK_DISABLE:
                self._on_ack_disable(frame.stage)
            else:
                self._on_stage_request()

    def _snoop(self, frame: ControlFrame) -> None:
        """Track which ring neighbours have an enabled link to each local rack."""
        topo = self.net.topo
        opcode = frame.opcode
        if opcode == Opcode.ACK_ENABLE:
            neighbour = frame.sender_id
            rack = topo.mac_to_node.get(frame.dst_mac)
        elif opcode == Opcode.DISABLE:
            rack = frame.sender_id
            node = topo.nodes[rack] if rack < len(topo.nodes) else None
            if node is None or node.kind is not NodeKind.RSW or node.cluster != self.node.cluster:
                return
            if not 1 <= frame.stage <= topo.config.csw_per_cluster:
                return
            neighbour = topo.csw(node.cluster, frame.stage - 1)
        else:
            return
        ports = self.ring_ports_to.get(neighbour)
        if not ports or rack is None:
            return
        logical = topo.logical_ports.get(rack)
        if logical is None or topo.nodes[rack].cluster != self.node.cluster:
            return
        if opcode == Opcode.ACK_ENABLE:
            self.spill[logical] = self.spill.get(logical, 0) | ports
        else:
            self.spill[logical] = self.spill.get(logical, 0) & ~ports

    # peer side of a gated link

    def _check_assist(self, idx: int, depth: int, now: int) -> None:
        """Ask the owner of a congested gated link for more of its stages.

        The owner's monitor only sees its own uplink queues, so traffic
        converging on it from above would otherwise never raise its stage.
        One request per upward crossing of the high watermark, repeated
        every ``assist_repeat`` while the queue stays high.
        """
        if depth < self._down_depth:
            self.assist_armed[idx] = True
            return
        if depth < self._up_depth:
            return
        if self.assist_armed[idx] or now >= self.assist_next[idx]:
            self.assist_armed[idx] = False
            self.assist_next[idx] = now + self.params.assist_repeat
            owner, stage = self.peer_of[idx]
            self.stats.assist_requests += 1
            self._emit_control(Opcode.STAGE_REQUEST, stage, self.net.topo.nodes[owner].mac)

    def _peer_enable(self, idx: int, frame: ControlFrame) -> None:
        if self.peer_enabled[idx]:
            return  # flooded duplicate
        now = self.sim.now
        port = self.ports[idx]
        self.peer_enabled[idx] = True
        self.peer_tokens[idx] += 1
        ready = port.laser.request_on(now)
        if ready <= now:
            self.usable |= 1 << idx
        else:
            self.sim.schedule(ready, EventKind.LASER_READY, self._peer_ready, idx, self.peer_tokens[idx])
        self._emit_control(Opcode.ACK_ENABLE, frame.stage, frame.src_mac)

    def _peer_ready(self, idx: int, token: int) -> None:
        if token == self.peer_tokens[idx] and self.peer_enabled[idx]:
            if self.ports[idx].laser.is_on(self.sim.now):
                self.usable |= 1 << idx

    def _peer_disable(self, idx: int, frame: ControlFrame) -> None:
        if not self.peer_enabled[idx]:
            return  # flooded duplicate
        port = self.ports[idx]
        self.peer_enabled[idx] = False
        self.usable &= ~(1 << idx)
        self.peer_tokens[idx] += 1
        at = max(self.sim.now, port.busy_until)
        self.sim.schedule(at, EventKind.DRAIN_COMPLETE, self._peer_drained, idx,
                          self.peer_tokens[idx], frame.stage, frame.src_mac)

    def _peer_drained(self, idx: int, token: int, stage: int, owner_mac: int) -> None:
        if token != self.peer_tokens[idx]:
            return
        self._emit_control(Opcode.ACK_DISABLE, stage, owner_mac)
        self._peer_laser_off(idx, token)

    def _peer_laser_off(self, idx: int, token: int) -> None:
        if token != self.peer_tokens[idx]:
            return
        laser = self.ports[idx].laser
        mode = laser.advance(self.sim.now)
        if mode == Mode.ON:
            laser.request_off(self.sim.now)
        elif mode == Mode.TURNING_ON:
            self.sim.schedule(laser.pending_at, EventKind.LASER_READY, self._peer_laser_off, idx, token)

    # owner side

    def _on_stage_request(self) -> None:
        now = self.sim.now
        if now + self.params.holddown > self.holddown_until:
            self.holddown_until = now + self.params.holddown
        top = self.top
        status = self.status[top] if top else None
        if status is StageStatus.DRAINING:
            self._cancel_drain(top)
        elif status is StageStatus.ACTIVE and top < self.max_stage:
            self.activate_stage(top + 1)

    def _evaluate_up(self) -> None:
        top = self.top
        status = self.status[top]
        if top >= self.max_stage and status is StageStatus.ACTIVE:
            return
        now = self.sim.now
        depths = [self.uplinks[k].depth(now) for k in range(1, self.sched_stage + 1)]
        if self.monitor.evaluate(depths, top, self.max_stage) is not Trigger.STAGE_UP:
            if status is StageStatus.DRAINING and any(d >= self._up_depth for d in depths):
                self._cancel_drain(top)
            return
        if status is StageStatus.ACTIVE:
            self.activate_stage(top + 1)
        elif status is StageStatus.DRAINING:
            self._cancel_drain(top)

    def activate_stage(self, k: int) -> None:
        if self.status[k] is StageStatus.ACTIVATING:
            return
        if k != self.top + 1 or self.status[k] is not StageStatus.IDLE:
            raise RuntimeError(f"{self.node.name}: cannot activate stage {k} (top={self.top})")
        now = self.sim.now
        self.status[k] = StageStatus.ACTIVATING
        self.top = k
        self.acked[k] = False
        self.stage_tokens[k] += 1
        port = self.uplinks[k]
        ready = port.laser.request_on(now)
        self.sim.schedule(ready, EventKind.LASER_READY, self._owner_check, k, self.stage_tokens[k])
        self._emit_control(Opcode.ENABLE, k, self.net.topo.nodes[port.peer].mac)
        self.stats.stage_ups += 1

    def _on_ack_enable(self, k: int) -> None:
        if self.status[k] is StageStatus.ACTIVATING:
            self.acked[k] = True
            self._owner_check(k, self.stage_tokens[k])

    def _owner_check(self, k: int, token: int) -> None:
        if token != self.stage_tokens[k] or self.status[k] is not StageStatus.ACTIVATING:
            return
        now = self.sim.now
        if not (self.acked[k] and self.uplinks[k].laser.is_on(now)):
            return
        self.status[k] = StageStatus.ACTIVE
        self.sched_stage = k
        self.usable |= 1 << self.uplinks[k].index
        self.holddown_until = now + self.params.holddown
        self.net.on_link_state(self, self.uplinks[k], True)
        self._evaluate_up()
        self._ensure_down_check()

    def deactivate_stage(self, k: int) -> None:
        if k <= 1:
            return
        if k != self.top or self.status[k] is not StageStatus.ACTIVE:
            raise RuntimeError(f"{self.node.name}: cannot deactivate stage {k} (top={self.top})")
        port = self.uplinks[k]
        self.status[k] = StageStatus.DRAINING
        self.sched_stage = k - 1
        self.usable &= ~(1 << port.index)
        self.stage_tokens[k] += 1
        at = max(self.sim.now, port.busy_until)
        self.sim.schedule(at, EventKind.DRAIN_COMPLETE, self._owner_drained, k, self.stage_tokens[k])
        self.stats.stage_downs += 1

    def _cancel_drain(self, k: int) -> None:
        self.status[k] = StageStatus.ACTIVE
        self.sched_stage = k
        self.usable |= 1 << self.uplinks[k].index
        self.stage_tokens[k] += 1
        self.holddown_until = self.sim.now + self.params.holddown
        self.stats.cancellations += 1
        self.net.on_link_state(self, self.uplinks[k], True)
        self._ensure_down_check()

    def _owner_drained(self, k: int, token: int) -> None:
        if token != self.stage_tokens[k] or self.status[k] is not StageStatus.DRAINING:
            return
        port = self.uplinks[k]
        self.status[k] = StageStatus.DEACTIVATING
        self.net.on_link_state(self, port, False)
        self._emit_control(Opcode.DISABLE, k, self.net.topo.nodes[port.peer].mac)

    def _on_ack_disable(self, k: int) -> None:
        if self.status[k] is not StageStatus.DEACTIVATING:
            return
        now = self.sim.now
        self.uplinks[k].laser.request_off(now)
        self.status[k] = StageStatus.IDLE
        self.top = k - 1
        self.holddown_until = now + self.params.holddown
        self.net.on_transition(self)
        self._evaluate_up()
        self._ensure_down_check()

    def _ensure_down_check(self) -> None:
        top = self.top
        if top <= 1 or self.status[top] is not StageStatus.ACTIVE:
            return
        now = self.sim.now
        limit = self._down_depth
        at = max(now, self.holddown_until)
        for k in range(1, top + 1):
            t = self.uplinks[k].time_depth_below(limit, now)
            if t > at:
                at = t
        if self._down_at is not None and self._down_at <= at:
            return
        self._down_version += 1
        self._down_at = at
        self.sim.schedule(at, EventKind.STAGE_TRIGGER, self._down_check, self._down_version)

    def _down_check(self, version: int) -> None:
        if version != self._down_version:
            return
        self._down_at = None
        top = self.top
        if top <= 1 or self.status[top] is not StageStatus.ACTIVE:
            return
        now = self.sim.now
        depths = [self.uplinks[k].depth(now) for k in range(1, top + 1)]
        trigger = self.monitor.evaluate(depths, top, self.max_stage, now >= self.holddown_until)
        if trigger is Trigger.STAGE_DOWN:
            self.deactivate_stage(top)
        elif trigger is Trigger.STAGE_UP:
            self._evaluate_up()
        else:
            self._ensure_down_check()

    # ------------------------------------------------------------ introspection

    def link_active(self, stage: int) -> bool:
        return self.status[stage] is StageStatus.ACTIVE

    def backlogs(self) -> list[int]:
        now = self.sim.now
        return [p.depth(now) for p in self.ports]


def control_frame_delay(bandwidth: float, params: SwitchParams | None = None) -> int:
    return switch_transit_delay(FRAME_SIZE, bandwidth, params)
