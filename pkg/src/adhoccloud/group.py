"""Device discovery and standard group formation for Wi-Fi Direct style devices.

Devices scan, then alternate between search and listen states. A pair is
discovered the first instant one side searches while the other listens.
Two ungrouped devices that discover each other negotiate ownership with a
request/response/confirm handshake; the higher GO intent wins. An ungrouped
device that discovers an existing owner joins that group as a client.
"""

from __future__ import annotations

import dataclasses
import hashlib
import random
from dataclasses import dataclass, field

from .engine import Engine
from .model import LinkSpec, NodeSpec, Scenario

IDLE = "idle"
SCAN = "scan"
FIND_SEARCH = "find-search"
FIND_LISTEN = "find-listen"
NEGOTIATING = "negotiating"
GROUPED = "grouped"

ROLE_NONE = "none"
ROLE_OWNER = "owner"
ROLE_CLIENT = "client"

DWELL_MIN = 0.100
DWELL_MAX = 0.300
OWNER_ADDRESS = 1


@dataclass
class DeviceState:
    node_id: str
    phase: str = IDLE
    discovered_peers: set[str] = field(default_factory=set)
    role: str = ROLE_NONE
    group_id: str | None = None

    def check(self) -> None:
        if self.role in (ROLE_OWNER, ROLE_CLIENT) and self.phase != GROUPED:
            raise AssertionError(f"{self.node_id}: role {self.role} outside grouped phase")
        if self.node_id in self.discovered_peers:
            raise AssertionError(f"{self.node_id}: discovered itself")

    @property
    def searching(self) -> bool:
        return self.phase == FIND_SEARCH

    @property
    def listening(self) -> bool:
        # an owner keeps answering probes so late devices can find and join it
        return self.phase == FIND_LISTEN or (self.phase == GROUPED and self.role == ROLE_OWNER)

    @property
    def ungrouped(self) -> bool:
        return self.phase in (SCAN, FIND_SEARCH, FIND_LISTEN)


@dataclass
class Group:
    group_id: str
    owner: str
    clients: list[str] = field(default_factory=list)
    addresses: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.addresses.setdefault(self.owner, OWNER_ADDRESS)

    def add_client(self, node_id: str) -> int:
        if node_id == self.owner or node_id in self.clients:
            raise ValueError(f"{node_id} already in group {self.group_id}")
        self.clients.append(node_id)
        addr = max(self.addresses.values()) + 1
        self.addresses[node_id] = addr
        return addr

    @property
    def members(self) -> list[str]:
        return [self.owner, *self.clients]


def find_phase_step(state: DeviceState, rng: random.Random) -> tuple[DeviceState, float]:
    """Toggle search/listen and draw how long the new state lasts."""
    if state.phase == FIND_SEARCH:
        nxt = FIND_LISTEN
    elif state.phase == FIND_LISTEN:
        nxt = FIND_SEARCH
    else:
        raise ValueError(f"{state.node_id} is not in the find phase ({state.phase})")
    return dataclasses.replace(state, phase=nxt), rng.uniform(DWELL_MIN, DWELL_MAX)


def tie_breaker_bit(seed: int, lower_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{lower_id}".encode()).digest()
    return digest[0] & 1


def negotiate_group_owner(a: NodeSpec, b: NodeSpec, seed: int = 0, engine: Engine | None = None) -> str:
    """Three-way GO negotiation between ``a`` (initiator) and ``b``. Returns the owner id."""
    if a.id == b.id:
        raise ValueError("cannot negotiate with itself")
    bit = None
    if a.go_intent != b.go_intent:
        owner = a.id if a.go_intent > b.go_intent else b.id
    else:
        lo, hi = sorted((a.id, b.id))
        bit = tie_breaker_bit(seed, lo)
        owner = lo if bit == 0 else hi
    if engine is not None:
        engine.log(a.id, "go_neg_request", peer=b.id, intent=a.go_intent)
        engine.log(b.id, "go_neg_response", peer=a.id, intent=b.go_intent)
        engine.log(a.id, "go_neg_confirm", peer=b.id, owner=owner, tie_breaker=bit)
    return owner


@dataclass
class FormationResult:
    groups: list[Group]
    states: dict[str, DeviceState]
    end_time: float


class _Formation:
    def __init__(self, scenario: Scenario, engine: Engine):
        self.s = scenario
        self.engine = engine
        self.nodes = {n.id: n for n in scenario.nodes}
        self.ids = sorted(self.nodes)
        self.states = {i: DeviceState(i) for i in self.ids}
        self.neighbors = {
            i: [j for j in self.ids if j != i and self.nodes[i].in_range(self.nodes[j])]
            for i in self.ids
        }
        self.groups: list[Group] = []
        self.by_id: dict[str, Group] = {}
        self.done = False
        self.end_time = engine.now
        self._check_at: float | None = None

    def start(self) -> None:
        p = self.s.params
        t0 = self.engine.now
        if self._finished():
            self._finish()
            return
        for i in self.ids:
            self.states[i].phase = SCAN
            self.engine.log(i, "scan", duration=p.scan_duration)
            self.engine.schedule(p.scan_duration, lambda i=i: self._enter_find(i))
        self.engine.schedule_at(t0 + p.formation_timeout, self._finish)

    def _enter_find(self, i: str) -> None:
        if self.done:
            return
        st = self.states[i]
        st.phase = FIND_SEARCH if self.engine.rng.random() < 0.5 else FIND_LISTEN
        dwell = self.engine.rng.uniform(DWELL_MIN, DWELL_MAX)
        self.engine.log(i, st.phase, dwell=dwell)
        self.engine.schedule(dwell, lambda: self._toggle(i))
        self._request_check()

    def _toggle(self, i: str) -> None:
        st = self.states[i]
        if self.done or not st.ungrouped:
            return
        new, dwell = find_phase_step(st, self.engine.rng)
        st.phase = new.phase
        self.engine.log(i, st.phase, dwell=dwell)
        self.engine.schedule(dwell, lambda: self._toggle(i))
        self._request_check()

    def _request_check(self) -> None:
        # state changes sharing one instant are all applied before pairs are matched
        if self._check_at != self.engine.now:
            self._check_at = self.engine.now
            self.engine.schedule(0.0, self._check)

    def _check(self) -> None:
        if self.done:
            return
        pairs = []
        for u in self.ids:
            su = self.states[u]
            for v in self.neighbors[u]:
                if v < u or v in su.discovered_peers:
                    continue
                sv = self.states[v]
                if su.searching and sv.listening:
                    pairs.append((u, v))
                elif sv.searching and su.listening:
                    pairs.append((v, u))
        intents = lambda p: sorted((self.nodes[p[0]].go_intent, self.nodes[p[1]].go_intent), reverse=True)
        pairs.sort(key=lambda p: ([-x for x in intents(p)], sorted(p)))
        for searcher, listener in pairs:
            self._discovered(searcher, listener)
        if self._finished():
            self._finish()

    def _discovered(self, searcher: str, listener: str) -> None:
        a, b = self.states[searcher], self.states[listener]
        a.discovered_peers.add(listener)
        b.discovered_peers.add(searcher)
        self.engine.log(searcher, "probe_request", peer=listener)
        self.engine.log(listener, "probe_response", peer=searcher)
        if a.ungrouped and b.ungrouped:
            a.phase = b.phase = NEGOTIATING
            owner = negotiate_group_owner(self.nodes[searcher], self.nodes[listener],
                                          self.s.rng_seed, self.engine)
            client = listener if owner == searcher else searcher
            g = Group(f"g{len(self.groups) + 1}", owner)
            self.groups.append(g)
            self.by_id[g.group_id] = g
            self._grant(g, owner, ROLE_OWNER)
            self._join(g, client)
        elif a.ungrouped and b.role == ROLE_OWNER:
            self._join(self.by_id[b.group_id], searcher)
        elif b.ungrouped and a.role == ROLE_OWNER:
            self._join(self.by_id[a.group_id], listener)

    def _grant(self, g: Group, node: str, role: str) -> None:
        st = self.states[node]
        st.phase, st.role, st.group_id = GROUPED, role, g.group_id
        self.engine.log(node, "go_role", role=role, group=g.group_id)
        self.engine.log(g.owner, "address_grant", peer=node, group=g.group_id, address=g.addresses[node])

    def _join(self, g: Group, node: str) -> None:
        g.add_client(node)
        self._grant(g, node, ROLE_CLIENT)

    def _finished(self) -> bool:
        for u in self.ids:
            if self.states[u].phase in (GROUPED,):
                continue
            for v in self.neighbors[u]:
                sv = self.states[v]
                if sv.phase != GROUPED or sv.role == ROLE_OWNER:
                    return False
        return True

    def _finish(self) -> None:
        if self.done:
            return
        self.done = True
        self.end_time = self.engine.now
        self.engine.log("-", "formation_done", groups=len(self.groups))


def _realize_explicit(scenario: Scenario, engine: Engine) -> FormationResult:
    states = {n.id: DeviceState(n.id) for n in scenario.nodes}
    groups = []
    for i, cfg in enumerate(scenario.groups):
        g = Group(f"g{i + 1}", cfg.owner)
        groups.append(g)
        engine.log(cfg.owner, "go_role", role=ROLE_OWNER, group=g.group_id)
        engine.log(cfg.owner, "address_grant", peer=cfg.owner, group=g.group_id, address=OWNER_ADDRESS)
        for c in cfg.clients:
            addr = g.add_client(c)
            engine.log(c, "go_role", role=ROLE_CLIENT, group=g.group_id)
            engine.log(cfg.owner, "address_grant", peer=c, group=g.group_id, address=addr)
        for m in g.members:
            st = states[m]
            st.phase = GROUPED
            # a bridge keeps the role and id of the first group it was listed in
            if st.group_id is None:
                st.role = ROLE_OWNER if m == g.owner else ROLE_CLIENT
                st.group_id = g.group_id
    return FormationResult(groups, states, engine.now)


def run_formation(scenario: Scenario, engine: Engine | None = None) -> FormationResult:
    engine = engine or Engine(seed=scenario.rng_seed)
    if scenario.groups is not None:
        return _realize_explicit(scenario, engine)
    f = _Formation(scenario, engine)
    f.start()
    engine.run_while(lambda: not f.done, horizon=engine.now + scenario.params.formation_timeout)
    if not f.done:
        f._finish()
    return FormationResult(f.groups, f.states, f.end_time)


def form_groups(scenario: Scenario, engine: Engine | None = None) -> list[Group]:
    return run_formation(scenario, engine).groups


def group_links(groups: list[Group], scenario: Scenario) -> dict[frozenset, LinkSpec]:
    """Data-capable links after formation: each owner to each of its clients."""
    overrides = {l.key: l for l in scenario.links}
    p = scenario.params
    out = {}
    for g in groups:
        for c in g.clients:
            key = frozenset((g.owner, c))
            out[key] = overrides.get(key) or LinkSpec((g.owner, c), p.default_bandwidth, p.default_latency)
    return out
