"""Clos site construction: servers, rack switches, cluster switches and FCs.

Every RSW has one uplink per CSW of its cluster and every CSW one uplink per
FC. Uplinks are stage-indexed by the switch that owns them (the lower tier):
RSW uplink ``j`` goes to CSW ``j`` and is stage ``j + 1``, so stage 1 of every
RSW in a cluster lands on CSW 0 and stage 1 of every CSW lands on FC 0. That
is what keeps the network connected when only stage 1 is lit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, fields
from enum import Enum

from .units import FIBER_PS_PER_M

MULTICAST_BASE = 0x800
MAC_PREFIX = 0x02_00_00_00_00_00


class NodeKind(Enum):
    SERVER = "server"
    RSW = "rsw"
    CSW = "csw"
    FC = "fc"


class LinkTier(Enum):
    SERVER_RSW = "server-rsw"
    RSW_CSW = "rsw-csw"
    CSW_FC = "csw-fc"
    CSW_RING = "csw-ring"
    FC_RING = "fc-ring"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class SiteConfig:
    clusters: int = 4
    rsw_per_cluster: int = 32
    csw_per_cluster: int = 4
    fc_count: int = 4
    servers_per_rack: int = 48
    server_bw: float = 10e9
    rsw_uplink_bw: float = 10e9
    csw_uplink_bw: float = 40e9
    ring_bw: float = 10e9
    server_fiber_m: float = 2.0
    rsw_csw_fiber_m: float = 20.0
    csw_fc_fiber_m: float = 100.0
    ring_fiber_m: float = 10.0
    csw_ring_links: int = 8
    fc_ring_links: int = 16

    def validate(self) -> None:
        for name in ("clusters", "rsw_per_cluster", "csw_per_cluster", "fc_count", "servers_per_rack"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise TopologyError(f"{name} must be an integer >= 1, got {value!r}")
        for name in ("csw_ring_links", "fc_ring_links"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise TopologyError(f"{name} must be an integer >= 0, got {value!r}")
        for name in ("server_bw", "rsw_uplink_bw", "csw_uplink_bw", "ring_bw"):
            if getattr(self, name) <= 0:
                raise TopologyError(f"{name} must be positive")
        for name in ("server_fiber_m", "rsw_csw_fiber_m", "csw_fc_fiber_m", "ring_fiber_m"):
            if getattr(self, name) < 0:
                raise TopologyError(f"{name} must be >= 0")

    @property
    def server_count(self) -> int:
        return self.clusters * self.rsw_per_cluster * self.servers_per_rack

    def rsw_oversubscription(self) -> float:
        down = self.servers_per_rack * self.server_bw
        return down / (self.csw_per_cluster * self.rsw_uplink_bw)

    def csw_oversubscription(self) -> float:
        down = self.rsw_per_cluster * self.rsw_uplink_bw
        return down / (self.fc_count * self.csw_uplink_bw)


def desk_site() -> SiteConfig:
    """2 clusters x 4 RSWs x 4 CSWs x 2 FCs x 4 servers/rack (32 servers)."""
    return SiteConfig(
        clusters=2,
        rsw_per_cluster=4,
        csw_per_cluster=4,
        fc_count=2,
        servers_per_rack=4,
        csw_ring_links=8,
        fc_ring_links=4,
    )


SCALES = {"full": SiteConfig, "desk": desk_site}


def site_field_names() -> list[str]:
    return [f.name for f in fields(SiteConfig)]


@dataclass
class Node:
    id: int
    kind: NodeKind
    name: str
    cluster: int
    index: int  # position within its tier (RSW/server: global; CSW: within cluster)
    rack: int = -1  # global RSW index for servers and RSWs
    ports: list[int] = field(default_factory=list)  # link ids, in port order

    @property
    def mac(self) -> int:
        return MAC_PREFIX | self.id


@dataclass
class Link:
    id: int
    a: int  # node id
    a_port: int
    b: int
    b_port: int
    bandwidth: float
    length: float
    latency: int
    tier: LinkTier
    stage_index: int = 0  # 1-based stage for gated uplinks, 0 otherwise
    owner: int = -1  # node whose stage machine gates this link

    def other(self, node_id: int) -> int:
        return self.b if node_id == self.a else self.a

    def port_of(self, node_id: int) -> int:
        return self.a_port if node_id == self.a else self.b_port


def link_latency(length_m: float) -> int:
    if length_m < 0:
        raise TopologyError("fiber length must be >= 0")
    return round(length_m * FIBER_PS_PER_M)


class Topology:
    def __init__(self, config: SiteConfig) -> None:
        self.config = config
        self.nodes: list[Node] = []
        self.links: list[Link] = []
        self.servers: list[int] = []
        self.rsws: list[int] = []
        self.csws: list[int] = []  # cluster-major
        self.fcs: list[int] = []
        self.mac_to_node: dict[int, int] = {}
        self.logical_ports: dict[int, int] = {}  # rsw node id -> logical port
        self.multicast_groups: dict[int, tuple[int, ...]] = {}  # logical port -> member servers

    # construction helpers
    def _add_node(self, kind: NodeKind, name: str, cluster: int, index: int, rack: int = -1) -> Node:
        node = Node(len(self.nodes), kind, name, cluster, index, rack)
        self.nodes.append(node)
        self.mac_to_node[node.mac] = node.id
        return node

    def _connect(self, a: Node, b: Node, bw: float, length: float, tier: LinkTier,
                 stage_index: int = 0, owner: int = -1) -> Link:
        link = Link(
            id=len(self.links), a=a.id, a_port=len(a.ports), b=b.id, b_port=len(b.ports),
            bandwidth=bw, length=length, latency=link_latency(length), tier=tier,
            stage_index=stage_index, owner=owner,
        )
        a.ports.append(link.id)
        b.ports.append(link.id)
        self.links.append(link)
        return link

    # queries
    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def csw(self, cluster: int, j: int) -> int:
        return self.csws[cluster * self.config.csw_per_cluster + j]

    def rsw_of_server(self, server: int) -> int:
        return self.rsws[self.nodes[server].rack]

    def max_stage(self, switch: int) -> int:
        return sum(1 for lid in self.nodes[switch].ports if self.links[lid].owner == switch)

    def uplinks(self, switch: int) -> list[Link]:
        """Gated uplinks of ``switch`` sorted by stage index."""
        ups = [self.links[lid] for lid in self.nodes[switch].ports if self.links[lid].owner == switch]
        return sorted(ups, key=lambda link: link.stage_index)

    def gated_links(self) -> list[Link]:
        return [link for link in self.links if link.stage_index > 0]

    def add_multicast_group(self, members: tuple[int, ...]) -> int:
        logical = MULTICAST_BASE + len(self.multicast_groups)
        self.multicast_groups[logical] = tuple(members)
        return logical

    def multicast_mac(self, logical: int) -> int:
        # group bit set in the first octet
        return 0x01_00_5E_00_00_00 | logical


def _ring_pairs(n: int) -> list[tuple[int, int]]:
    if n < 2:
        return []
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def build_site(config: SiteConfig) -> Topology:
    config.validate()
    topo = Topology(config)
    cfg = config

    for c in range(cfg.clusters):
        for r in range(cfg.rsw_per_cluster):
            rack = c * cfg.rsw_per_cluster + r
            for s in range(cfg.servers_per_rack):
                node = topo._add_node(NodeKind.SERVER, f"srv{rack}.{s}", c, len(topo.servers), rack)
                topo.servers.append(node.id)
    for c in range(cfg.clusters):
        for r in range(cfg.rsw_per_cluster):
            rack = c * cfg.rsw_per_cluster + r
            node = topo._add_node(NodeKind.RSW, f"rsw{rack}", c, rack, rack)
            topo.rsws.append(node.id)
            topo.logical_ports[node.id] = rack
    for c in range(cfg.clusters):
        for j in range(cfg.csw_per_cluster):
            node = topo._add_node(NodeKind.CSW, f"csw{c}.{j}", c, j)
            topo.csws.append(node.id)
    for f in range(cfg.fc_count):
        node = topo._add_node(NodeKind.FC, f"fc{f}", -1, f)
        topo.fcs.append(node.id)

    nodes = topo.nodes
    # server downlinks first so that RSW port i is server i of the rack
    for rack, rsw in enumerate(topo.rsws):
        for s in range(cfg.servers_per_rack):
            server = topo.servers[rack * cfg.servers_per_rack + s]
            topo._connect(nodes[rsw], nodes[server], cfg.server_bw, cfg.server_fiber_m, LinkTier.SERVER_RSW)
    for rack, rsw in enumerate(topo.rsws):
        c = nodes[rsw].cluster
        for j in range(cfg.csw_per_cluster):
            topo._connect(nodes[rsw], nodes[topo.csw(c, j)], cfg.rsw_uplink_bw, cfg.rsw_csw_fiber_m,
                          LinkTier.RSW_CSW, stage_index=j + 1, owner=rsw)
    for c in range(cfg.clusters):
        for j in range(cfg.csw_per_cluster):
            csw = topo.csw(c, j)
            for f, fc in enumerate(topo.fcs):
                topo._connect(nodes[csw], nodes[fc], cfg.csw_uplink_bw, cfg.csw_fc_fiber_m,
                              LinkTier.CSW_FC, stage_index=f + 1, owner=csw)
    for c in range(cfg.clusters):
        pairs = _ring_pairs(cfg.csw_per_cluster)
        if pairs and cfg.csw_ring_links:
            per_pair = max(1, cfg.csw_ring_links // len(pairs))
            for i, k in pairs:
                for _ in range(per_pair):
                    topo._connect(nodes[topo.csw(c, i)], nodes[topo.csw(c, k)], cfg.ring_bw,
                                  cfg.ring_fiber_m, LinkTier.CSW_RING)
    pairs = _ring_pairs(cfg.fc_count)
    if pairs and cfg.fc_ring_links:
        per_pair = max(1, cfg.fc_ring_links // len(pairs))
        for i, k in pairs:
            for _ in range(per_pair):
                topo._connect(nodes[topo.fcs[i]], nodes[topo.fcs[k]], cfg.ring_bw,
                              cfg.ring_fiber_m, LinkTier.FC_RING)
    return topo


def stage_links(topo: Topology, switch: int, k: int) -> set[int]:
    """Link ids of the uplinks of ``switch`` that are lit when stage ``k`` is active."""
    max_stage = topo.max_stage(switch)
    if not 1 <= k <= max_stage:
        raise TopologyError(f"stage {k} out of range 1..{max_stage} for {topo.node(switch).name}")
    return {link.id for link in topo.uplinks(switch) if link.stage_index <= k}


def servers_connected(topo: Topology, usable_links) -> bool:
    """True when every server reaches every other over ``usable_links``.

    ``usable_links`` is a predicate on a :class:`Link` or a collection of ids.
    """
    if callable(usable_links):
        usable = usable_links
    else:
        ids = set(usable_links)
        usable = lambda link: link.id in ids  # noqa: E731
    if not topo.servers:
        return True
    start = topo.servers[0]
    seen = {start}
    frontier = deque([start])
    while frontier:
        node = frontier.popleft()
        for lid in topo.nodes[node].ports:
            link = topo.links[lid]
            if not usable(link):
                continue
            peer = link.other(node)
            if peer not in seen:
                seen.add(peer)
                frontier.append(peer)
    return all(s in seen for s in topo.servers)


def minimum_stage_links(topo: Topology) -> set[int]:
    """Links that are lit when every switch sits at stage 1."""
    return {link.id for link in topo.links if link.stage_index <= 1}
