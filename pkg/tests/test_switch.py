"""Switch model: pure decision functions first, then a small live fixture."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcdcsim.engine import EventKind
from lcdcsim.frames import ControlFrame, Opcode
from lcdcsim.network import Network
from lcdcsim.switch import (
    VIRTUAL_PORT, BacklogMonitor, CamMiss, CamTables, StageStatus, SwitchParams, Trigger,
    WatermarkController, ingress_arbitrate, process_control, schedule_output, switch_transit_delay,
)
from lcdcsim.datapath import Packet
from lcdcsim.topology import NodeKind
from lcdcsim.units import NS, US


# ---------------------------------------------------------------- watermark monitor


def test_monitor_examples():
    m = BacklogMonitor(capacity=100)
    assert m.evaluate([76], 1, 4) is Trigger.STAGE_UP
    assert m.evaluate([21, 20], 2, 4) is Trigger.STAGE_DOWN
    assert m.evaluate([50], 2, 4) is Trigger.NONE


def test_monitor_boundaries_are_strict():
    m = BacklogMonitor(capacity=100)
    assert m.evaluate([75], 1, 4) is Trigger.NONE
    assert m.evaluate([22, 0], 2, 4) is Trigger.NONE
    assert m.evaluate([21, 0], 2, 4, holddown_expired=False) is Trigger.NONE
    assert m.evaluate([99], 4, 4) is Trigger.NONE
    assert m.evaluate([0], 1, 4) is Trigger.NONE


def test_integer_thresholds_for_default_queue():
    m = BacklogMonitor()
    assert (m.up_depth, m.down_depth) == (97, 29)


class ReferenceStageMachine:
    """Independent oracle: integer percent arithmetic, no shared code."""

    def __init__(self, capacity, max_stage, holddown):
        self.capacity, self.max_stage, self.holddown = capacity, max_stage, holddown
        self.stage = 1
        self.last = None

    def feed(self, t, depths):
        seen = depths[: self.stage]
        quiet = self.last is None or t - self.last >= self.holddown
        if self.stage < self.max_stage and any(100 * d > 75 * self.capacity for d in seen):
            self.stage += 1
            self.last = t
            return ("up", self.stage)
        if self.stage > 1 and quiet and all(100 * d < 22 * self.capacity for d in seen):
            self.stage -= 1
            self.last = t
            return ("down", self.stage)
        return None


def reference_triggers(capacity, max_stage, holddown, trace):
    ref = ReferenceStageMachine(capacity, max_stage, holddown)
    out = []
    for t, depths in trace:
        r = ref.feed(t, depths)
        if r:
            out.append((t, r[0], r[1]))
    return out


def model_triggers(capacity, max_stage, holddown, trace):
    ctl = WatermarkController(BacklogMonitor(capacity), max_stage, holddown)
    names = {Trigger.STAGE_UP: "up", Trigger.STAGE_DOWN: "down"}
    return [(t, names[trig], stage) for t, trig, stage in ctl.run(trace)]


@st.composite
def depth_traces(draw):
    """Random-walk queue depths so both watermarks get crossed often."""
    capacity = draw(st.integers(1, 200))
    max_stage = draw(st.integers(1, 4))
    holddown = draw(st.integers(0, 50))
    n = draw(st.integers(0, 1000))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    steps = rng.integers(-capacity // 4 - 1, capacity // 4 + 2, size=(n, 4))
    depths = np.clip(np.cumsum(steps, axis=0), 0, capacity)
    times = np.cumsum(rng.integers(0, 20, size=n))
    trace = [(int(t), [int(x) for x in d]) for t, d in zip(times, depths)]
    return capacity, max_stage, holddown, trace


@settings(max_examples=200, deadline=None)
@given(depth_traces())
def test_trigger_sequence_matches_reference(case):
    assert model_triggers(*case) == reference_triggers(*case)


def test_exhaustive_single_queue_thresholds():
    for capacity in range(1, 257):
        m = BacklogMonitor(capacity)
        for d in range(capacity + 1):
            up = m.evaluate([d], 1, 2) is Trigger.STAGE_UP
            down = m.evaluate([d, d], 2, 2) is Trigger.STAGE_DOWN
            assert up == (100 * d > 75 * capacity)
            assert down == (100 * d < 22 * capacity)
            assert up == (d >= m.up_depth)
            assert down == (d < m.down_depth)


# ---------------------------------------------------------------- control processing


def frame(ttl=3, sender=7, opcode=Opcode.ENABLE):
    return ControlFrame(0xFFFFFFFFFFFF, 0x020000000007, sender, opcode, 2, ttl)


def test_remote_frame_notifies_and_decrements():
    action = process_control(frame(ttl=3), local_sender_id=1)
    assert action.notify and action.forward.ttl == 2


def test_last_hop_frame_is_dropped_after_notifying():
    action = process_control(frame(ttl=1), local_sender_id=1)
    assert action.notify and action.forward is None and action.drop_reason == "ttl"


def test_own_frame_forwarded_unchanged():
    f = frame(sender=1)
    action = process_control(f, local_sender_id=1)
    assert not action.notify and action.forward == f


def test_unknown_opcode_dropped():
    action = process_control(ControlFrame(0, 0, 9, 11, 1, 3), local_sender_id=1)
    assert action.drop_reason == "unknown-opcode"


@given(st.integers(1, 6))
def test_flood_hop_budget(ttl):
    """A frame is notified at most ``ttl`` times along any path."""
    f = frame(ttl=ttl)
    hops = 0
    while f is not None:
        action = process_control(f, local_sender_id=1000 + hops)
        hops += action.notify
        f = action.forward
    assert hops == ttl


# ---------------------------------------------------------------- CAM, arbiter, scheduler


def test_cam_lookup_and_miss():
    cam = CamTables(max_stage=2)
    cam.program_destination(0xAA, logical=3)
    cam.program_destination(0xBB, logical=0x800, multicast=True)
    assert cam.lookup_logical(0xAA) == (3, False)
    assert cam.lookup_logical(0xBB) == (0x800, True)
    with pytest.raises(CamMiss):
        cam.lookup_logical(0xCC)


def test_cam_monotonicity_check():
    cam = CamTables(max_stage=2)
    cam.uplink_mask = 0b1100
    cam.set_map(1, 3, 0b0100)
    cam.set_map(2, 3, 0b1100)
    assert cam.is_monotone()
    cam.set_map(2, 3, 0b1000)
    assert not cam.is_monotone()


def test_arbiter_serves_virtual_port_first():
    assert ingress_arbitrate([[1], [1], [1]], virtual=[object()], last_served=0) == VIRTUAL_PORT


def test_arbiter_round_robin():
    assert ingress_arbitrate([[1], [1]], [], last_served=0) == 1
    assert ingress_arbitrate([[], [], [], [1]], [], last_served=3) == 3
    assert ingress_arbitrate([[], []], [], last_served=0) is None


def test_scheduler_min_backlog_and_ties():
    assert schedule_output(0b1100, [0, 0, 10, 4]) == [3]
    assert schedule_output(0b1100, [0, 0, 4, 4]) == [2]
    assert schedule_output(0b10110, [0] * 5, multicast=True) == [1, 2, 4]


def test_transit_delays():
    assert switch_transit_delay() == 41342
    assert switch_transit_delay(64, 10e9) == 41342 + 51_200
    assert switch_transit_delay(1500, 40e9) == 41342 + 300 * NS


# ---------------------------------------------------------------- live fixture


def rack_switch(net, rack=0):
    return next(sw for sw in net.switches if sw.kind is NodeKind.RSW and sw.node.rack == rack)


@pytest.fixture
def gated_net(desk):
    return Network(desk, gated=True)


def test_stage_becomes_usable_when_laser_ready(gated_net):
    net = gated_net
    sw = rack_switch(net)
    net.sim.schedule(10 * US, EventKind.TIMER, sw.activate_stage, 2)
    net.sim.run_until(11 * US - 1)
    assert sw.status[2] is StageStatus.ACTIVATING
    assert sw.acked[2]  # ack came back well before the laser
    net.sim.run_until(11 * US)
    assert sw.status[2] is StageStatus.ACTIVE
    assert sw.usable >> sw.uplinks[2].index & 1


def test_repeated_trigger_sends_one_enable(gated_net):
    net = gated_net
    sw = rack_switch(net)
    net.sim.schedule(0, EventKind.TIMER, sw.activate_stage, 2)
    net.sim.schedule(100 * NS, EventKind.TIMER, sw.activate_stage, 2)
    net.sim.run_until(200 * NS)
    assert sw.stats.control_tx == 1
    assert sw.stats.stage_ups == 1


def test_stage_one_never_deactivates(gated_net):
    sw = rack_switch(gated_net)
    sw.deactivate_stage(1)
    assert sw.status[1] is StageStatus.ACTIVE


def _fill(net, port, n):
    for _ in range(n):
        p = Packet(net.next_pid(), -1, -1, -1, 0, 1500, net.sim.now)
        net.injected += 1
        port.transmit(net.sim, p, net.sim.now)


def test_drain_precedes_disable(gated_net):
    net = gated_net
    sw = rack_switch(net)
    net.sim.schedule(0, EventKind.TIMER, sw.activate_stage, 2)
    net.sim.run_until(20 * US)
    assert sw.status[2] is StageStatus.ACTIVE
    t0 = net.sim.now
    port = sw.uplinks[2]
    _fill(net, port, 3)  # 3 x 1.2 us at 10G
    sw.deactivate_stage(2)
    sent = sw.stats.control_tx
    net.sim.run_until(t0 + 3600 * NS - 1)
    assert sw.status[2] is StageStatus.DRAINING and sw.stats.control_tx == sent
    net.sim.run_until(t0 + 3600 * NS)
    assert sw.status[2] is StageStatus.DEACTIVATING and sw.stats.control_tx == sent + 1
    net.sim.run_until(t0 + 10 * US)
    assert sw.status[2] is StageStatus.IDLE
    assert port.laser.mode.name in ("TURNING_OFF", "OFF")


def test_trigger_during_drain_cancels_without_cycling_laser(gated_net):
    net = gated_net
    sw = rack_switch(net)
    net.sim.schedule(0, EventKind.TIMER, sw.activate_stage, 2)
    net.sim.run_until(20 * US)
    port = sw.uplinks[2]
    _fill(net, port, 3)
    sw.deactivate_stage(2)
    net.sim.run_until(net.sim.now + 1 * US)
    sw._on_stage_request()
    assert sw.status[2] is StageStatus.ACTIVE
    net.sim.run_until(net.sim.now + 20 * US)
    assert port.laser.is_on(net.sim.now)
    assert sw.stats.cancellations == 1


def test_stage_maps_are_monotone(gated_net):
    for sw in gated_net.switches:
        assert sw.cam.is_monotone()


def test_switch_params_validation():
    with pytest.raises(ValueError):
        BacklogMonitor(capacity=0)
    with pytest.raises(ValueError):
        BacklogMonitor(high_watermark=0.2, low_watermark=0.3)
    SwitchParams()
