from lcdcsim.datapath import OutputPort, Packet
from lcdcsim.engine import Simulator
from lcdcsim.topology import LinkTier, Link
from lcdcsim.transceiver import Mode, Transceiver, TransceiverParams
from lcdcsim.units import NS


def make_port(capacity=4):
    link = Link(0, 0, 0, 1, 0, 10e9, 20.0, 100 * NS, LinkTier.RSW_CSW)
    port = OutputPort(0, 0, link, 1, 0, Transceiver(TransceiverParams(), Mode.ON), capacity, True)
    arrivals = []
    port.deliver = lambda packet, in_port: arrivals.append((sim.now, packet.pid))
    sim = Simulator()
    return sim, port, arrivals


def data(pid, size=1500):
    return Packet(pid, 0, 0, 1, 0, size, 0)


def test_fifo_windows_and_depth():
    sim, port, arrivals = make_port()
    ends = [port.transmit(sim, data(i), 0) for i in range(3)]
    assert ends == [1200 * NS, 2400 * NS, 3600 * NS]
    assert port.depth(0) == 3 and port.depth(1200 * NS) == 2
    assert port.time_depth_below(2, 0) == 2400 * NS
    sim.run_until(10_000 * NS)
    assert arrivals == [(1300 * NS, 0), (2500 * NS, 1), (3700 * NS, 2)]


def test_control_frame_jumps_queued_data():
    sim, port, arrivals = make_port()
    for i in range(3):
        port.transmit(sim, data(i), 0)
    ctl = Packet(99, -1, 0, -1, 0, 64, 0, control=b"\x00" * 64)
    end = port.transmit(sim, ctl, 0)
    # goes right after the packet on the wire, not after the whole queue
    assert end == 1200 * NS + 51_200
    assert port.depth(0) == 3
    # later data pays for the frame's wire time
    assert port.transmit(sim, data(4), 0) == 4800 * NS + 51_200


def test_on_demand_port_waits_for_laser():
    sim, port, _ = make_port()
    port.laser = Transceiver(TransceiverParams())
    port.on_demand = True
    port.idle_timeout = 100 * NS * 1000
    assert port.transmit(sim, data(0), 0) == 1000 * NS + 1200 * NS
