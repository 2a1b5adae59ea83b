"""Routing layer over Wi-Fi Direct groups.

Components: a discovery manager (periodic request/reply exchange), the
routing table, a routing manager (route selection per traffic class), a
data transfer manager (hop-by-hop frame forwarding), an application data
manager (:meth:`Network.send`) and a connection manager.

Table maintenance follows destination-sequenced distance vector rules. Each
node owns an even sequence number that it bumps whenever its set of live
neighbours changes; a newer number wins, and an equal number with fewer hops
wins. A lost route is re-advertised with the next odd number and infinite
hops. Because the number doubles as the version of the node's neighbour
list, replies also carry neighbour lists, which gives every node a
topology view for energy-aware path selection.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .engine import MESSAGE, TRANSFER_COMPLETE, Engine
from .model import KB_TO_MEGABITS, LinkSpec, NodeSpec, SimParams

BROADCAST = "*"
INF_HOPS = math.inf
REAL_TIME = "real_time"
BULK = "bulk"
TRAFFIC_CLASSES = (REAL_TIME, BULK)


class RoutingError(Exception):
    kind = "routing"


class NoRoute(RoutingError):
    kind = "no-route"


class TTLExceeded(RoutingError):
    kind = "ttl-exceeded"


class NodeExhausted(RoutingError):
    kind = "node-exhausted"


class NodeDown(RoutingError):
    kind = "node-down"


class ConnectionClosed(RoutingError):
    kind = "connection-closed"


@dataclass
class RoutingTableEntry:
    destination: str
    next_node: str
    sequence_no: int
    hops: int
    available_bandwidth: float
    last_updated: float


@dataclass(frozen=True)
class DiscoveryRequest:
    source: str
    sequence_no: int
    destination: str = BROADCAST


@dataclass(frozen=True)
class RouteAdvert:
    destination: str
    hops: float
    available_bandwidth: float
    sequence_no: int
    neighbors: tuple[tuple[str, float], ...] | None = None


@dataclass(frozen=True)
class DiscoveryReply:
    source: str
    destination: str
    sequence_no: int
    entries: tuple[RouteAdvert, ...] = ()


@dataclass
class DataFrame:
    source: str
    final_destination: str
    payload_size: float
    ttl: int
    traffic_class: str
    path_so_far: list[str] = field(default_factory=list)


class RoutingAgent:
    """Per-node routing state: discovery manager, table and routing manager."""

    def __init__(self, node_id: str, link_bandwidth: Mapping[str, float], params: SimParams | None = None):
        self.node_id = node_id
        self.link_bandwidth = dict(link_bandwidth)
        self.params = params or SimParams()
        self.own_seq = 0
        self.request_seq = 0
        self.table: dict[str, RoutingTableEntry] = {}
        self.alive: dict[str, float] = {}  # neighbour -> last heard
        self.seen_requests: set[tuple[str, int]] = set()
        self.sent: dict[str, dict[str, tuple]] = {}
        self.adjacency: dict[str, tuple[int, tuple[tuple[str, float], ...]]] = {}
        self.broken: dict[str, tuple[int, float]] = {}

    # discovery manager

    def emit_discovery(self, now: float) -> DiscoveryRequest:
        self.expire(now)
        self.request_seq += 1
        return DiscoveryRequest(self.node_id, self.request_seq)

    def handle_discovery_request(self, req: DiscoveryRequest, now: float) -> DiscoveryReply | None:
        key = (req.source, req.sequence_no)
        if key in self.seen_requests or req.source == self.node_id:
            return None
        self.seen_requests.add(key)
        self._heard(req.source, now)
        return DiscoveryReply(self.node_id, req.source, req.sequence_no, self.digest_for(req.source))

    def merge_reply(self, reply: DiscoveryReply, now: float) -> list[str]:
        """Fold a neighbour's digest into the table; returns the destinations that changed."""
        n = reply.source
        if n not in self.link_bandwidth:
            return []
        self._heard(n, now)
        changed = []
        for adv in reply.entries:
            d = adv.destination
            if d == self.node_id:
                continue
            if adv.neighbors is not None:
                known = self.adjacency.get(d)
                if known is None or adv.sequence_no >= known[0]:
                    self.adjacency[d] = (adv.sequence_no, adv.neighbors)
            cur = self.table.get(d)
            if adv.hops == INF_HOPS:
                if cur is not None and cur.next_node == n and adv.sequence_no > cur.sequence_no:
                    self._break(d, adv.sequence_no, now)
                    changed.append(d)
                continue
            hops = int(adv.hops) + 1
            if hops > self.params.ttl:
                continue
            seq = adv.sequence_no
            if d in self.broken and seq <= self.broken[d][0]:
                continue
            bw = min(adv.available_bandwidth, self.link_bandwidth[n])
            if cur is None or seq > cur.sequence_no or (seq == cur.sequence_no and hops < cur.hops):
                adopt = True
            elif cur.next_node == n and seq == cur.sequence_no:
                adopt = (hops, bw) != (cur.hops, cur.available_bandwidth)
            else:
                adopt = False
            if adopt:
                self.table[d] = RoutingTableEntry(d, n, seq, hops, bw, now)
                self.broken.pop(d, None)
                changed.append(d)
        return changed

    def digest_for(self, peer: str) -> tuple[RouteAdvert, ...]:
        """Rows that are new or changed since the last reply sent to ``peer``."""
        rows = {self.node_id: (0, math.inf, self.own_seq, self.neighbor_list())}
        for d in sorted(self.table):
            e = self.table[d]
            adj = self.adjacency.get(d)
            nbrs = adj[1] if adj is not None and adj[0] == e.sequence_no else None
            rows[d] = (e.hops, e.available_bandwidth, e.sequence_no, nbrs)
        prev = self.sent.setdefault(peer, {})
        out = []
        for d, row in rows.items():
            if prev.get(d) != row:
                out.append(RouteAdvert(d, *row))
                prev[d] = row
        for d in sorted(set(prev) - set(rows)):
            if prev[d][0] != INF_HOPS:
                seq = self.broken[d][0] if d in self.broken else prev[d][2] + 1
                row = (INF_HOPS, 0.0, seq, None)
                out.append(RouteAdvert(d, *row))
                prev[d] = row
        return tuple(out)

    def neighbor_list(self) -> tuple[tuple[str, float], ...]:
        return tuple((n, self.link_bandwidth[n]) for n in sorted(self.alive))

    def _heard(self, n: str, now: float) -> None:
        if n not in self.link_bandwidth:
            return
        if n not in self.alive:
            self.own_seq += 2
        self.alive[n] = now
        for e in self.table.values():
            if e.next_node == n:
                e.last_updated = now
        cur = self.table.get(n)
        if cur is None or cur.next_node != n or cur.hops != 1:
            seq = cur.sequence_no if cur is not None else 0
            self.table[n] = RoutingTableEntry(n, n, seq, 1, self.link_bandwidth[n], now)
            self.broken.pop(n, None)

    def _break(self, d: str, seq: int, now: float) -> None:
        self.table.pop(d, None)
        self.broken[d] = (seq, now)

    def expire(self, now: float) -> list[str]:
        """Drop silent neighbours and stale routes; returns the lost destinations."""
        timeout = self.params.entry_timeout
        lost = []
        for n in sorted(self.alive):
            if now - self.alive[n] >= timeout:
                del self.alive[n]
                self.own_seq += 2
        for d in sorted(self.table):
            e = self.table[d]
            if e.next_node not in self.alive or now - e.last_updated >= timeout:
                self._break(d, e.sequence_no + 1, now)
                lost.append(d)
        for d in sorted(self.broken):
            if now - self.broken[d][1] >= timeout and all(d not in p or p[d][0] == INF_HOPS for p in self.sent.values()):
                del self.broken[d]
        return lost

    def remove_link(self, n: str) -> None:
        """Position-update hook: the radio link to ``n`` is gone."""
        self.link_bandwidth.pop(n, None)
        self.alive.pop(n, None)

    # routing manager

    def topology(self) -> dict[str, dict[str, float]]:
        """Undirected link graph as currently known to this node."""
        g: dict[str, dict[str, float]] = {self.node_id: {}}

        def add(a, b, bw):
            g.setdefault(a, {})[b] = bw
            g.setdefault(b, {})[a] = bw

        for n, bw in self.neighbor_list():
            add(self.node_id, n, bw)
        for d in sorted(self.adjacency):
            if d not in self.table:
                continue
            for n, bw in self.adjacency[d][1]:
                if n != self.node_id:
                    add(d, n, bw)
        return g

    def select_route(self, destination: str, traffic_class: str = REAL_TIME,
                     positions: Mapping[str, tuple[float, float]] | None = None) -> list[str]:
        if traffic_class not in TRAFFIC_CLASSES:
            raise ValueError(f"unknown traffic class {traffic_class!r}")
        if destination == self.node_id:
            return [self.node_id]
        entry = self.table.get(destination)
        if entry is None:
            raise NoRoute(f"{self.node_id} has no route to {destination}")
        if entry.next_node == destination:
            direct = [self.node_id, destination]
            if traffic_class == REAL_TIME or positions is None:
                return direct
        graph = self.topology()
        if traffic_class == REAL_TIME:
            tail = _min_hop_path(graph, entry.next_node, destination, exclude=self.node_id)
            if tail is None or len(tail) != entry.hops:
                raise NoRoute(f"{self.node_id}: route to {destination} not yet resolvable")
            return [self.node_id, *tail]
        if positions is None:
            raise ValueError("bulk routing needs node positions")
        path = min_energy_path(graph, self.node_id, destination, positions, self.params.path_loss_exponent)
        if path is None:
            raise NoRoute(f"{self.node_id}: no known path to {destination}")
        return path

    def path_bandwidth(self, path: list[str]) -> float:
        """Bottleneck bandwidth along ``path`` from this node's topology view."""
        if len(path) < 2:
            return math.inf
        g = self.topology()
        return min(g[a][b] for a, b in zip(path, path[1:]))


def _min_hop_path(graph, src, dst, exclude=None) -> list[str] | None:
    """BFS shortest path, neighbours visited in id order (lexicographic tie-break)."""
    if src == dst:
        return [src]
    prev = {src: None}
    q = deque([src])
    while q:
        u = q.popleft()
        for v in sorted(graph.get(u, {})):
            if v in prev or v == exclude:
                continue
            prev[v] = u
            if v == dst:
                path = [v]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return path[::-1]
            q.append(v)
    return None


def min_energy_path(graph, src, dst, positions, exponent: float = 2.0) -> list[str] | None:
    """Path minimising the sum of hop distance**exponent; ties -> fewer hops -> lexicographic."""
    best: dict[str, tuple] = {}
    heap = [(0.0, 0, [src])]
    while heap:
        c, h, path = heapq.heappop(heap)
        u = path[-1]
        if u in best:
            continue
        best[u] = (c, h, path)
        if u == dst:
            return path
        for v in sorted(graph.get(u, {})):
            if v in best:
                continue
            step = math.dist(positions[u], positions[v]) ** exponent
            heapq.heappush(heap, (c + step, h + 1, path + [v]))
    return None


class EnergyLedger:
    """Joule accounting per node; a node whose battery reaches zero is exhausted."""

    def __init__(self, nodes: Mapping[str, NodeSpec]):
        self.remaining = {i: n.available_energy for i, n in nodes.items()}
        self.compute = {i: 0.0 for i in nodes}
        self.tx = {i: 0.0 for i in nodes}
        self.relay = {i: 0.0 for i in nodes}

    def charge(self, node: str, joules: float, kind: str) -> bool:
        """Debit ``joules``; returns False (and clamps at zero) if the battery ran out."""
        book = {"compute": self.compute, "tx": self.tx, "relay": self.relay}[kind]
        left = self.remaining[node]
        if joules > left:
            book[node] += left
            self.remaining[node] = 0.0
            return False
        book[node] += joules
        self.remaining[node] = left - joules
        return True


@dataclass
class Transfer:
    source: str
    destination: str
    payload_size: float
    traffic_class: str
    frames: int
    path: list[str]
    billed_to: str
    started: float
    status: str = "pending"
    error: str | None = None
    finished: float | None = None
    frame: DataFrame | None = None
    _callbacks: list[Callable[["Transfer"], None]] = field(default_factory=list, repr=False)

    def add_done_callback(self, fn: Callable[["Transfer"], None]) -> None:
        if self.status == "pending":
            self._callbacks.append(fn)
        else:
            fn(self)

    @property
    def done(self) -> bool:
        return self.status != "pending"

    def _resolve(self, status: str, now: float, error: str | None = None) -> None:
        self.status, self.finished, self.error = status, now, error
        for fn in self._callbacks:
            fn(self)
        self._callbacks.clear()


@dataclass
class Connection:
    node: str
    peer: str
    state: str
    opened_at: float
    last_ok: float


class Network:
    """All routing agents plus the links between them, driven by one engine."""

    def __init__(self, engine: Engine, nodes: Mapping[str, NodeSpec], links: Mapping[frozenset, LinkSpec],
                 params: SimParams | None = None, packet_size: float = 1.5, ledger: EnergyLedger | None = None):
        self.engine = engine
        self.nodes = dict(nodes)
        self.links = dict(links)
        self.params = params or SimParams()
        self.packet_size = packet_size
        self.ledger = ledger or EnergyLedger(self.nodes)
        self.positions = {i: n.position for i, n in self.nodes.items()}
        self.up = set(self.nodes)
        self.ids = sorted(self.nodes)
        self.agents = {i: RoutingAgent(i, self._link_bw(i), self.params) for i in self.ids}
        self.connections: dict[tuple[str, str], Connection] = {}
        self.stats = {"sent": 0, "forwarded": 0, "dropped": 0}
        self.discovery_started: float | None = None
        self.replies_per_request: dict[tuple[str, int], int] = {}

    def _link_bw(self, i: str) -> dict[str, float]:
        out = {}
        for key, link in self.links.items():
            if i in key:
                (other,) = key - {i}
                out[other] = link.bandwidth
        return out

    def neighbors(self, i: str) -> list[str]:
        return sorted(self.agents[i].link_bandwidth)

    def link(self, a: str, b: str) -> LinkSpec:
        return self.links[frozenset((a, b))]

    # discovery

    def start_discovery(self) -> None:
        period = self.params.discovery_period
        self.discovery_started = self.engine.now
        for i in self.ids:
            offset = self.engine.rng.uniform(0.0, 0.5 * period)
            self.engine.schedule(offset, lambda i=i: self._periodic(i))

    def _periodic(self, i: str) -> None:
        if i not in self.up:
            return
        self.emit_discovery(i)
        self.maintain_connections(i)
        self.engine.schedule(self.params.discovery_period, lambda: self._periodic(i))

    def emit_discovery(self, i: str) -> DiscoveryRequest:
        """Broadcast a discovery request to every direct neighbour; returns it."""
        req = self.agents[i].emit_discovery(self.engine.now)
        targets = [n for n in self.neighbors(i)]
        self.engine.log(i, "disc_request", seq=req.sequence_no, fanout=len(targets))
        self.replies_per_request[(i, req.sequence_no)] = 0
        for n in targets:
            self.engine.schedule(self.link(i, n).latency, lambda n=n: self._deliver_request(n, req), MESSAGE)
        return req

    def _deliver_request(self, n: str, req: DiscoveryRequest) -> None:
        if n not in self.up:
            return
        reply = self.agents[n].handle_discovery_request(req, self.engine.now)
        if reply is None:
            return
        self.replies_per_request[(req.source, req.sequence_no)] += 1
        self.engine.log(n, "disc_reply", to=req.source, seq=reply.sequence_no, rows=len(reply.entries))
        self.engine.schedule(self.link(n, req.source).latency,
                             lambda: self._deliver_reply(req.source, reply), MESSAGE)

    def _deliver_reply(self, i: str, reply: DiscoveryReply) -> None:
        if i not in self.up:
            return
        changed = self.agents[i].merge_reply(reply, self.engine.now)
        if changed:
            self.engine.log(i, "table_update", via=reply.source, dests=changed)

    def fail_node(self, i: str, reason: str = "disconnect") -> None:
        if i in self.up:
            self.up.discard(i)
            self.engine.log(i, "node_down", reason=reason)

    def update_position(self, i: str, position: tuple[float, float]) -> None:
        """Move a node; links whose endpoints fall out of radio range are cut."""
        self.positions[i] = position
        spec = self.nodes[i]
        for n in self.neighbors(i):
            peer = self.nodes[n]
            if math.dist(position, self.positions[n]) > min(spec.radio_range, peer.radio_range):
                self.agents[i].remove_link(n)
                self.agents[n].remove_link(i)
                self.links.pop(frozenset((i, n)), None)
                self.engine.log(i, "link_down", peer=n)

    def snapshot(self) -> dict[str, dict[str, RoutingTableEntry]]:
        return {i: {d: e for d, e in sorted(a.table.items())} for i, a in self.agents.items()}

    def log_tables(self) -> None:
        for i in self.ids:
            for d, e in sorted(self.agents[i].table.items()):
                self.engine.log(i, "route", dest=d, next=e.next_node, hops=e.hops,
                                seq=e.sequence_no, bw=e.available_bandwidth)

    # connection manager

    def connection_open(self, node: str, peer: str) -> Connection:
        self.agents[node].select_route(peer, REAL_TIME, self.positions)
        now = self.engine.now
        conn = Connection(node, peer, "open", now, now)
        self.connections[(node, peer)] = conn
        self.engine.log(node, "conn_open", peer=peer)
        return conn

    def connection_maintain(self, node: str, peer: str) -> Connection:
        conn = self.connections[(node, peer)]
        if conn.state == "closed":
            return conn
        if peer in self.agents[node].table or peer == node:
            conn.state, conn.last_ok = "open", self.engine.now
        elif conn.state != "degraded":
            conn.state = "degraded"
            self.engine.log(node, "conn_degraded", peer=peer)
        return conn

    def maintain_connections(self, node: str) -> None:
        for (a, b) in sorted(self.connections):
            if a == node:
                self.connection_maintain(a, b)

    def connection_terminate(self, node: str, peer: str) -> None:
        conn = self.connections.get((node, peer))
        if conn is not None and conn.state != "closed":
            conn.state = "closed"
            self.engine.log(node, "conn_close", peer=peer)

    # application data manager / data transfer manager

    def send(self, src: str, dst: str, payload_size: float, traffic_class: str = BULK,
             billed_to: str | None = None) -> Transfer:
        """Segment ``payload_size`` KB into frames and forward them along the selected route.

        Raises NoRoute / ConnectionClosed / NodeDown synchronously; failures on the
        way (TTL, exhausted or vanished relays) resolve the returned transfer.
        """
        billed_to = billed_to or src
        now = self.engine.now
        if src == dst:
            t = Transfer(src, dst, payload_size, traffic_class, 0, [src], billed_to, now)
            t.frame = DataFrame(src, dst, payload_size, self.params.ttl, traffic_class, [src])
            self.engine.schedule(0.0, lambda: t._resolve("delivered", self.engine.now), TRANSFER_COMPLETE)
            return t
        if src not in self.up:
            raise NodeDown(f"{src} is down")
        conn = self.connections.get((src, dst))
        if conn is not None and conn.state == "closed":
            raise ConnectionClosed(f"connection {src}->{dst} was terminated")
        if conn is None:
            self.connection_open(src, dst)
        path = self.agents[src].select_route(dst, traffic_class, self.positions)
        frames = math.ceil(payload_size / self.packet_size)
        t = Transfer(src, dst, payload_size, traffic_class, frames, path, billed_to, now)
        t.frame = DataFrame(src, dst, payload_size, self.params.ttl, traffic_class, [src])
        self.stats["sent"] += frames
        self.engine.log(src, "data_send", dst=dst, kb=payload_size, frames=frames,
                        cls=traffic_class, route=path)
        b = self.nodes[billed_to].tx_energy_per_packet
        if not self.ledger.charge(billed_to, b * frames, "tx"):
            self._exhausted(billed_to)
            self._fail(t, NodeExhausted.kind)
            return t
        self._hop(t, 0)
        return t

    def _hop(self, t: Transfer, i: int) -> None:
        u, v = t.path[i], t.path[i + 1]
        link = self.links.get(frozenset((u, v)))
        if link is None or u not in self.up:
            self._fail(t, NodeDown.kind)
            return
        dt = t.payload_size * KB_TO_MEGABITS / link.bandwidth + link.latency
        self.engine.schedule(dt, lambda: self._arrive(t, i + 1), TRANSFER_COMPLETE)

    def _arrive(self, t: Transfer, i: int) -> None:
        v = t.path[i]
        if v not in self.up:
            self._fail(t, NodeDown.kind)
            return
        f = t.frame
        f.ttl -= 1
        f.path_so_far.append(v)
        if v == t.destination:
            self.engine.log(v, "data_deliver", src=t.source, kb=t.payload_size, frames=t.frames,
                            path=f.path_so_far)
            t._resolve("delivered", self.engine.now)
            return
        if f.ttl <= 0:
            self._fail(t, TTLExceeded.kind)
            return
        self.stats["forwarded"] += t.frames
        self.engine.log(v, "data_forward", src=t.source, dst=t.destination, frames=t.frames, ttl=f.ttl)
        if not self.ledger.charge(v, self.nodes[v].tx_energy_per_packet * t.frames, "relay"):
            self._exhausted(v)
            self._fail(t, NodeExhausted.kind)
            return
        self._hop(t, i)

    def _exhausted(self, node: str) -> None:
        self.fail_node(node, reason="exhausted")

    def _fail(self, t: Transfer, kind: str) -> None:
        self.stats["dropped"] += t.frames
        self.engine.log(t.frame.path_so_far[-1], "data_drop", src=t.source, dst=t.destination,
                        frames=t.frames, reason=kind)
        t._resolve("failed", self.engine.now, kind)
