"""Domain types shared across the simulator.

All types are frozen dataclasses that validate themselves on construction.
Units: work in mega-instructions (MI), processing power in MI/s, data in
kilobytes, bandwidth in megabits/s, energy in joules, time in seconds.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable

KB_TO_MEGABITS = 8.0 / 1000.0
MAX_GO_INTENT = 15


class ValidationError(ValueError):
    """An invariant was violated. ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)

    def prefixed(self, prefix: str) -> "ValidationError":
        path = f"{prefix}.{self.path}" if self.path else prefix
        return ValidationError(path, self.message)


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ValidationError(path, message)


_ID_RE = re.compile(r"^[A-Za-z0-9_.:-]+$")


def _valid_id(x) -> bool:
    return isinstance(x, str) and _ID_RE.match(x) is not None


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and not math.isnan(x)


@dataclass(frozen=True)
class NodeSpec:
    id: str
    processing_power: float
    available_energy: float
    proc_energy_rate: float
    tx_energy_per_packet: float
    position: tuple[float, float] = (0.0, 0.0)
    radio_range: float = 200.0
    go_intent: int = 7

    def __post_init__(self):
        _require(_valid_id(self.id), "id", "must be a non-empty token of [A-Za-z0-9_.:-]")
        _require(_finite(self.processing_power) and self.processing_power > 0,
                 "processing_power", "must be > 0")
        _require(_finite(self.available_energy) and self.available_energy >= 0,
                 "available_energy", "must be >= 0")
        _require(_finite(self.proc_energy_rate) and self.proc_energy_rate >= 0,
                 "proc_energy_rate", "must be >= 0")
        _require(_finite(self.tx_energy_per_packet) and self.tx_energy_per_packet >= 0,
                 "tx_energy_per_packet", "must be >= 0")
        _require(len(self.position) == 2 and all(map(_finite, self.position)),
                 "position", "must be an (x, y) pair")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        _require(_finite(self.radio_range) and self.radio_range > 0, "radio_range", "must be > 0")
        _require(isinstance(self.go_intent, int) and not isinstance(self.go_intent, bool)
                 and 0 <= self.go_intent <= MAX_GO_INTENT,
                 "go_intent", f"must be an integer in [0, {MAX_GO_INTENT}]")

    def distance_to(self, other: "NodeSpec") -> float:
        return math.dist(self.position, other.position)

    def in_range(self, other: "NodeSpec") -> bool:
        return self.distance_to(other) <= min(self.radio_range, other.radio_range)


@dataclass(frozen=True)
class TaskSpec:
    id: str
    size: float
    input_data: float = 0.0
    output_data: float = 0.0
    deadline: float = math.inf
    real_time: bool = False

    def __post_init__(self):
        _require(_valid_id(self.id), "id", "must be a non-empty token of [A-Za-z0-9_.:-]")
        _require(_finite(self.size) and self.size > 0, "size", "must be > 0")
        _require(_finite(self.input_data) and self.input_data >= 0, "input_data", "must be >= 0")
        _require(_finite(self.output_data) and self.output_data >= 0, "output_data", "must be >= 0")
        _require(_finite(self.deadline) and self.deadline > 0, "deadline", "must be > 0")


def find_cycle(task_ids: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[str] | None:
    """Return one cycle as a list of ids, or None if the graph is acyclic."""
    succ: dict[str, list[str]] = {t: [] for t in task_ids}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {t: WHITE for t in succ}
    for root in sorted(succ):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(sorted(succ[root])))]
        path = [root]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
                path.pop()
            elif color.get(nxt, WHITE) == GREY:
                return path[path.index(nxt):] + [nxt]
            elif color.get(nxt, WHITE) == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(sorted(succ.get(nxt, ())))))
                path.append(nxt)
    return None


@dataclass(frozen=True)
class TaskGraph:
    tasks: tuple[TaskSpec, ...] = ()
    edges: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "edges", tuple((str(a), str(b)) for a, b in self.edges))
        seen = set()
        for i, t in enumerate(self.tasks):
            _require(isinstance(t, TaskSpec), f"tasks[{i}]", "must be a TaskSpec")
            _require(t.id not in seen, f"tasks[{i}].id", f"duplicate task id {t.id!r}")
            seen.add(t.id)
        for i, (a, b) in enumerate(self.edges):
            _require(a in seen, f"edges[{i}]", f"unknown task {a!r}")
            _require(b in seen, f"edges[{i}]", f"unknown task {b!r}")
        if find_cycle(seen, self.edges) is not None:
            raise ValidationError("edges", "cycle detected")

    def task(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def predecessors(self, task_id: str) -> list[str]:
        return sorted({a for a, b in self.edges if b == task_id})

    def successors(self, task_id: str) -> list[str]:
        return sorted({b for a, b in self.edges if a == task_id})


@dataclass(frozen=True)
class LinkSpec:
    endpoints: tuple[str, str]
    bandwidth: float = 250.0
    latency: float = 0.002

    def __post_init__(self):
        _require(len(self.endpoints) == 2, "endpoints", "must name two nodes")
        a, b = self.endpoints
        _require(a != b, "endpoints", "must be distinct")
        object.__setattr__(self, "endpoints", (str(a), str(b)))
        _require(_finite(self.bandwidth) and self.bandwidth > 0, "bandwidth", "must be > 0")
        _require(_finite(self.latency) and self.latency >= 0, "latency", "must be >= 0")

    @property
    def key(self) -> frozenset[str]:
        return frozenset(self.endpoints)


@dataclass(frozen=True)
class GroupConfig:
    """An explicit group assignment: one owner plus its clients."""

    owner: str
    clients: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "clients", tuple(self.clients))
        _require(self.owner not in self.clients, "clients", "owner cannot also be a client")
        _require(len(set(self.clients)) == len(self.clients), "clients", "duplicate client")


@dataclass(frozen=True)
class Failure:
    """Node disconnect injected at ``time`` seconds after workload release."""

    node: str
    time: float

    def __post_init__(self):
        _require(_finite(self.time) and self.time >= 0, "time", "must be >= 0")


@dataclass(frozen=True)
class SimParams:
    discovery_period: float = 1.0
    entry_timeout: float | None = None  # defaults to 3 x discovery_period
    ttl: int = 16
    scan_duration: float = 0.125
    formation_timeout: float = 30.0
    default_bandwidth: float = 250.0
    default_latency: float = 0.002
    static_energy: bool = False
    path_loss_exponent: float = 2.0

    def __post_init__(self):
        _require(self.discovery_period > 0, "discovery_period", "must be > 0")
        if self.entry_timeout is None:
            object.__setattr__(self, "entry_timeout", 3.0 * self.discovery_period)
        _require(self.entry_timeout > 0, "entry_timeout", "must be > 0")
        _require(isinstance(self.ttl, int) and self.ttl >= 1, "ttl", "must be an integer >= 1")
        _require(self.scan_duration >= 0, "scan_duration", "must be >= 0")
        _require(self.formation_timeout > 0, "formation_timeout", "must be > 0")
        _require(self.default_bandwidth > 0, "default_bandwidth", "must be > 0")
        _require(self.default_latency >= 0, "default_latency", "must be >= 0")
        _require(self.path_loss_exponent > 0, "path_loss_exponent", "must be > 0")


@dataclass(frozen=True)
class WorkloadSource:
    """Remembers which profile produced a workload so sweeps can rebuild it."""

    profile: str
    input_mb: float


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[NodeSpec, ...]
    workload: TaskGraph
    source_node: str
    packet_size: float = 1.5
    energy_threshold: float = 0.0
    rng_seed: int = 0
    groups: tuple[GroupConfig, ...] | None = None
    links: tuple[LinkSpec, ...] = ()
    failures: tuple[Failure, ...] = ()
    params: SimParams = field(default_factory=SimParams)
    workload_source: WorkloadSource | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "failures", tuple(self.failures))
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(self.groups))
        _check_scenario(self)

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]


def _check_scenario(s: Scenario) -> None:
    _require(len(s.nodes) > 0, "nodes", "nodes empty")
    ids = set()
    for i, n in enumerate(s.nodes):
        _require(isinstance(n, NodeSpec), f"nodes[{i}]", "must be a NodeSpec")
        _require(n.id not in ids, f"nodes[{i}].id", f"duplicate node id {n.id!r}")
        ids.add(n.id)
    _require(isinstance(s.workload, TaskGraph), "workload", "must be a TaskGraph")
    _require(s.source_node in ids, "source_node", f"unknown node {s.source_node!r}")
    _require(_finite(s.packet_size) and s.packet_size > 0, "packet_size", "must be > 0")
    _require(_finite(s.energy_threshold) and s.energy_threshold >= 0,
             "energy_threshold", "must be >= 0")
    _require(isinstance(s.rng_seed, int), "rng_seed", "must be an integer")
    for i, link in enumerate(s.links):
        for end in link.endpoints:
            _require(end in ids, f"links[{i}].endpoints", f"unknown node {end!r}")
    for i, f in enumerate(s.failures):
        _require(f.node in ids, f"failures[{i}].node", f"unknown node {f.node!r}")
    if s.groups is not None:
        memberships: dict[str, int] = {}
        owners = set()
        for i, g in enumerate(s.groups):
            _require(g.owner in ids, f"groups[{i}].owner", f"unknown node {g.owner!r}")
            _require(g.owner not in owners, f"groups[{i}].owner",
                     f"{g.owner!r} already owns a group")
            owners.add(g.owner)
            for j, c in enumerate(g.clients):
                _require(c in ids, f"groups[{i}].clients[{j}]", f"unknown node {c!r}")
            for member in (g.owner, *g.clients):
                memberships[member] = memberships.get(member, 0) + 1
                _require(memberships[member] <= 2, f"groups[{i}]",
                         f"node {member!r} appears in more than two groups")


def validate_scenario(s: Scenario) -> Scenario:
    """Re-check every invariant of ``s`` and return it unchanged."""
    for i, n in enumerate(s.nodes):
        try:
            NodeSpec(**{f: getattr(n, f) for f in NodeSpec.__dataclass_fields__})
        except ValidationError as e:
            raise e.prefixed(f"nodes[{i}]") from None
    try:
        TaskGraph(s.workload.tasks, s.workload.edges)
    except ValidationError as e:
        raise e.prefixed("workload") from None
    _check_scenario(s)
    return s
