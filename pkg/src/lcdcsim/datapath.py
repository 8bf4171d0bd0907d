"""Packets and FIFO output ports shared by switches and server NICs.

Output ports do not need per-departure events: when a packet is enqueued its
transmission window is fixed immediately (FIFO behind ``busy_until``), so the
only event a hop produces is the arrival at the far end. Queue depth at time
``t`` is the number of queued packets whose last bit has not left by ``t``.

Control frames get strict, non-preemptive egress priority: a frame goes out
right after the data packet currently on the wire. Windows already fixed for
queued data packets are not moved, so a frame may overlap them by its own
64-byte serialization; the time is added to ``busy_until`` so later data pays
for it.
"""

from __future__ import annotations

from collections import deque

from .engine import EventKind
from .transceiver import Mode, Transceiver
from .units import S


class Packet:
    __slots__ = (
        "pid", "flow_id", "src", "dst", "dst_mac", "size", "injected_at",
        "control", "logical", "multicast", "hops",
    )

    def __init__(self, pid, flow_id, src, dst, dst_mac, size, injected_at, control=None):
        self.pid = pid
        self.flow_id = flow_id
        self.src = src
        self.dst = dst
        self.dst_mac = dst_mac
        self.size = size
        self.injected_at = injected_at
        self.control = control  # encoded control frame bytes, or None for data
        self.logical = -1  # annotation flit: logical port
        self.multicast = False  # annotation flit: multicast bit
        self.hops = 0

    def copy(self, pid: int) -> "Packet":
        twin = Packet(pid, self.flow_id, self.src, self.dst, self.dst_mac, self.size,
                      self.injected_at, self.control)
        twin.logical = self.logical
        twin.multicast = self.multicast
        twin.hops = self.hops
        return twin

    def __repr__(self) -> str:
        kind = "ctl" if self.control is not None else "data"
        return f"Packet({kind} #{self.pid} flow={self.flow_id} {self.src}->{self.dst} {self.size}B)"


class OutputPort:
    """One egress queue plus the transmitter (laser) that drains it."""

    __slots__ = (
        "node", "index", "link", "peer", "peer_port", "bandwidth", "latency", "ps_per_byte",
        "laser", "capacity", "busy_until", "tx_ends", "stage", "on_demand", "idle_timeout",
        "idle_check_pending", "switch_facing", "tx_packets", "tx_bytes", "deliver", "ctl_busy_until",
    )

    def __init__(self, node: int, index: int, link, peer: int, peer_port: int,
                 laser: Transceiver, capacity: int | None, switch_facing: bool) -> None:
        self.node = node
        self.index = index
        self.link = link
        self.peer = peer
        self.peer_port = peer_port
        self.bandwidth = link.bandwidth
        self.latency = link.latency
        self.ps_per_byte = 8 * S / link.bandwidth
        self.laser = laser
        self.capacity = capacity
        self.busy_until = 0
        self.ctl_busy_until = 0
        self.tx_ends: deque[int] = deque()
        self.stage = 0
        self.on_demand = False
        self.idle_timeout = 0
        self.idle_check_pending = False
        self.switch_facing = switch_facing
        self.tx_packets = 0
        self.tx_bytes = 0
        self.deliver = None  # receive callback of the peer node

    def serialization(self, size: int) -> int:
        return round(size * self.ps_per_byte)

    def depth(self, now: int) -> int:
        tx_ends = self.tx_ends
        while tx_ends and tx_ends[0] <= now:
            tx_ends.popleft()
        return len(tx_ends)

    def is_full(self, now: int) -> bool:
        return self.capacity is not None and self.depth(now) >= self.capacity

    def time_depth_below(self, limit: int, now: int) -> int:
        """Earliest time ``>= now`` at which depth drops below ``limit`` absent new arrivals."""
        n = self.depth(now)
        if n < limit:
            return now
        return self.tx_ends[n - limit]

    def transmit(self, sim, packet: Packet, eligible_at: int) -> int:
        """Queue ``packet``; schedule its arrival at the peer. Returns last-bit time."""
        if packet.control is not None:
            return self._transmit_control(sim, packet, eligible_at)
        start = eligible_at if eligible_at > self.busy_until else self.busy_until
        if self.on_demand:
            ready = self.laser.request_on(sim.now)
            if ready > start:
                start = ready
            if not self.idle_check_pending:
                self.idle_check_pending = True
                # first check can only pass once the queue has emptied
                sim.schedule(max(sim.now, start) + self.idle_timeout, EventKind.TIMER, self._idle_check, sim)
        end = start + round(packet.size * self.ps_per_byte)
        self.busy_until = end
        self.tx_ends.append(end)
        self.tx_packets += 1
        self.tx_bytes += packet.size
        sim.schedule(end + self.latency, EventKind.PACKET_ARRIVAL, self.deliver, packet, self.peer_port)
        return end

    def _transmit_control(self, sim, packet: Packet, eligible_at: int) -> int:
        # behind the data packet on the wire (if any) and earlier control frames
        self.depth(sim.now)
        on_wire = self.tx_ends[0] if self.tx_ends else 0
        start = max(eligible_at, on_wire, self.ctl_busy_until)
        if self.on_demand:
            start = max(start, self.laser.request_on(sim.now))
            if not self.idle_check_pending:
                self.idle_check_pending = True
                sim.schedule(max(sim.now, start) + self.idle_timeout, EventKind.TIMER, self._idle_check, sim)
        size = round(packet.size * self.ps_per_byte)
        end = start + size
        self.ctl_busy_until = end
        self.busy_until = self.busy_until + size if self.busy_until > start else end
        self.tx_packets += 1
        self.tx_bytes += packet.size
        sim.schedule(end + self.latency, EventKind.PACKET_ARRIVAL, self.deliver, packet, self.peer_port)
        return end

    def idle_check(self, now: int) -> bool:
        """Switch the laser off if nothing was sent for ``idle_timeout``.

        Returns True when a turn-off was issued.
        """
        if now - self.busy_until >= self.idle_timeout and self.laser.advance(now) == Mode.ON:
            self.laser.request_off(now)
            return True
        return False

    def _idle_check(self, sim) -> None:
        now = sim.now
        if now - self.busy_until >= self.idle_timeout:
            self.idle_check_pending = False
            self.idle_check(now)
        else:
            sim.schedule(self.busy_until + self.idle_timeout, EventKind.TIMER, self._idle_check, sim)
