"""End-to-end scenario runs: group formation, routing convergence, allocation, execution.

Data flow follows a hub model: the source node (the camera device) holds the
video, ships each task's input to the node that runs it and collects each
task's output back. A task is released once all its predecessors' outputs
have reached the source. Each node computes one task at a time, FIFO.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field

from . import routing
from .engine import TASK_COMPLETE, TASK_START, Engine, Trace
from .group import group_links, run_formation
from .model import NodeSpec, Scenario, TaskGraph, validate_scenario
from .scheduler import AllocationParams, Assignment, allocate, sort_tasks

COMPLETION_HORIZON = 1e7


@dataclass
class TaskRecord:
    task: str
    node: str | None
    status: str
    start: float | None = None
    exec_start: float | None = None
    end: float | None = None
    estimated: float | None = None
    measured: float | None = None
    reason: str | None = None


@dataclass
class MetricsReport:
    makespan: float
    baseline_makespan: float
    feasible: bool
    workload_start: float
    per_task: list[TaskRecord] = field(default_factory=list)
    energy: dict[str, dict[str, float]] = field(default_factory=dict)
    packets: dict[str, int] = field(default_factory=dict)
    assignment: dict[str, str] = field(default_factory=dict)
    unassigned: dict[str, str] = field(default_factory=dict)
    groups: list[dict] = field(default_factory=list)

    @property
    def improvement(self) -> float:
        """Fractional makespan reduction versus running everything on the source."""
        if self.baseline_makespan == 0:
            return 0.0
        return 1.0 - self.makespan / self.baseline_makespan

    def task(self, task_id: str) -> TaskRecord:
        return next(r for r in self.per_task if r.task == task_id)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["improvement"] = self.improvement
        return d


@dataclass
class Run:
    report: MetricsReport
    trace: Trace
    network: routing.Network | None
    assignment: Assignment


class Executor:
    """Drives task release, input delivery, FIFO compute and output collection."""

    def __init__(self, engine: Engine, graph: TaskGraph, placement: dict[str, str], source: str,
                 nodes: dict[str, NodeSpec], network: routing.Network | None, ledger: routing.EnergyLedger):
        self.engine = engine
        self.graph = graph
        self.placement = placement
        self.source = source
        self.nodes = nodes
        self.net = network
        self.ledger = ledger
        self.order = [t.id for t in sort_tasks(graph)]
        self.tasks = {t.id: t for t in graph.tasks}
        self.records = {tid: TaskRecord(tid, placement.get(tid), "waiting") for tid in self.order}
        self.queues = {i: deque() for i in sorted(nodes)}
        self.busy: dict[str, str | None] = {i: None for i in nodes}
        self.down: set[str] = set()
        self.remaining = set(self.order)

    def start(self) -> None:
        for tid in self.order:
            if tid not in self.placement:
                self._fail(tid, "unassigned")
        self._release_ready()

    @property
    def pending(self) -> bool:
        return bool(self.remaining)

    def _release_ready(self) -> None:
        for tid in self.order:
            rec = self.records[tid]
            if rec.status != "waiting":
                continue
            preds = self.graph.predecessors(tid)
            if all(self.records[p].status == "done" for p in preds):
                self._release(tid, preds)

    def _release(self, tid: str, preds: list[str]) -> None:
        rec = self.records[tid]
        node = self.placement[tid]
        rec.status, rec.start = "transferring", self.engine.now
        self.engine.log(node, "task_release", task=tid, preds=preds)
        self._transfer(tid, self.source, node, self.tasks[tid].input_data, lambda: self._input_arrived(tid))

    def _transfer(self, tid, src, dst, kb, on_done) -> None:
        task = self.tasks[tid]
        cls = routing.REAL_TIME if task.real_time else routing.BULK
        billed = self.placement[tid]
        if self.net is None:
            if src != dst:
                raise RuntimeError("remote transfer without a network")
            self.engine.schedule(0.0, on_done, TASK_START)
            return
        try:
            tr = self.net.send(src, dst, kb, cls, billed_to=billed)
        except routing.RoutingError as e:
            self._fail(tid, e.kind)
            return

        def done(t: routing.Transfer):
            if t.status == "delivered":
                on_done()
            else:
                self._fail(tid, t.error)

        tr.add_done_callback(done)

    def _input_arrived(self, tid: str) -> None:
        rec = self.records[tid]
        if rec.status != "transferring":
            return
        node = self.placement[tid]
        if node in self.down:
            self._fail(tid, "node-down")
            return
        rec.status = "queued"
        self.engine.log(node, "input_arrived", task=tid)
        self.queues[node].append(tid)
        self._try_run(node)

    def _try_run(self, node: str) -> None:
        if self.busy[node] is not None or node in self.down:
            return
        while self.queues[node]:
            tid = self.queues[node].popleft()
            if self.records[tid].status == "queued":
                break
        else:
            return
        spec = self.nodes[node]
        task = self.tasks[tid]
        rec = self.records[tid]
        compute = task.size / spec.processing_power
        if not self.ledger.charge(node, spec.proc_energy_rate * compute, "compute"):
            if self.net is not None:
                self.net.fail_node(node, reason="exhausted")
            self.node_down(node)
            return
        rec.status, rec.exec_start = "running", self.engine.now
        self.busy[node] = tid
        self.engine.log(node, "task_start", task=tid, preds=self.graph.predecessors(tid), compute=compute)
        self.engine.schedule(compute, lambda: self._compute_done(node, tid), TASK_COMPLETE)

    def _compute_done(self, node: str, tid: str) -> None:
        if self.busy[node] != tid:
            return
        self.busy[node] = None
        self.records[tid].status = "returning"
        self.engine.log(node, "task_computed", task=tid)
        self._transfer(tid, node, self.source, self.tasks[tid].output_data, lambda: self._complete(tid))
        self._try_run(node)

    def _complete(self, tid: str) -> None:
        rec = self.records[tid]
        if rec.status != "returning":
            return
        rec.status, rec.end = "done", self.engine.now
        rec.measured = rec.end - rec.start
        self.remaining.discard(tid)
        self.engine.log(self.placement[tid], "task_complete", task=tid)
        self._release_ready()

    def _fail(self, tid: str, reason: str | None) -> None:
        rec = self.records[tid]
        if rec.status in ("done", "failed"):
            return
        rec.status, rec.reason = "failed", reason
        self.remaining.discard(tid)
        self.engine.log(rec.node or "-", "task_failed", task=tid, reason=reason)
        for s in self.graph.successors(tid):
            self._fail(s, "predecessor-failed")

    def node_down(self, node: str) -> None:
        self.down.add(node)
        for tid in self.order:
            if self.placement.get(tid) == node and self.records[tid].status in ("transferring", "queued", "running"):
                self._fail(tid, "node-down")
        self.busy[node] = None

    def makespan(self) -> float:
        done = [r for r in self.records.values() if r.status == "done"]
        if not done:
            return 0.0
        return max(r.end for r in done) - min(r.start for r in done)


def link_graph_diameter(ids: list[str], links) -> int:
    adj = {i: set() for i in ids}
    for key in links:
        a, b = sorted(key)
        adj[a].add(b)
        adj[b].add(a)
    best = 0
    for s in ids:
        dist = {s: 0}
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        best = max(best, max(dist.values()))
    return best


def bandwidth_from_source(net: routing.Network, source: str) -> dict[str, float]:
    """Bottleneck bandwidth of the source's current route to each node; unreachable nodes are omitted."""
    out = {source: math.inf}
    agent = net.agents[source]
    for d, e in sorted(agent.table.items()):
        if d in net.up:
            out[d] = e.available_bandwidth
    return out


def baseline_makespan(scenario: Scenario, start_time: float = 0.0) -> float:
    """Makespan with every task run on the source node and no data movement."""
    nodes = {n.id: n for n in scenario.nodes}
    engine = Engine(seed=scenario.rng_seed, trace=Trace(enabled=False), start_time=start_time)
    placement = {t.id: scenario.source_node for t in scenario.workload.tasks}
    ex = Executor(engine, scenario.workload, placement, scenario.source_node, nodes, None,
                  routing.EnergyLedger({i: _unbounded(n) for i, n in nodes.items()}))
    ex.start()
    engine.run_while(lambda: ex.pending, horizon=start_time + COMPLETION_HORIZON)
    return ex.makespan()


def _unbounded(n: NodeSpec) -> NodeSpec:
    return NodeSpec(n.id, n.processing_power, math.inf, n.proc_energy_rate, n.tx_energy_per_packet,
                    n.position, n.radio_range, n.go_intent)


def simulate(scenario: Scenario, trace: bool = True) -> Run:
    validate_scenario(scenario)
    p = scenario.params
    engine = Engine(seed=scenario.rng_seed, trace=Trace(enabled=trace))
    nodes = {n.id: n for n in scenario.nodes}

    formation = run_formation(scenario, engine)
    links = group_links(formation.groups, scenario)
    ledger = routing.EnergyLedger(nodes)
    net = routing.Network(engine, nodes, links, p, scenario.packet_size, ledger)
    net.start_discovery()
    diameter = link_graph_diameter(sorted(nodes), links)
    engine.run_until(engine.now + 2 * max(diameter, 1) * p.discovery_period)
    net.log_tables()

    t_work = engine.now
    bw = bandwidth_from_source(net, scenario.source_node)
    params = AllocationParams(bw, scenario.packet_size, scenario.energy_threshold, p.static_energy)
    assignment = allocate(scenario.workload, list(scenario.nodes), params)
    for tid, pl in assignment.placements.items():
        engine.log(pl.node_id, "assign", task=tid, est_time=pl.estimated_execution_time,
                   est_energy=pl.estimated_energy)
    for tid, reason in assignment.unassigned.items():
        engine.log("-", "unassigned", task=tid, reason=reason)

    placement = {tid: pl.node_id for tid, pl in assignment.placements.items()}
    ex = Executor(engine, scenario.workload, placement, scenario.source_node, nodes, net, ledger)
    for f in scenario.failures:
        def fail(node=f.node):
            net.fail_node(node)
            ex.node_down(node)
        engine.schedule_at(t_work + f.time, fail)
    ex.start()
    engine.run_while(lambda: ex.pending, horizon=t_work + COMPLETION_HORIZON)

    for tid, rec in ex.records.items():
        if tid in assignment.placements:
            rec.estimated = assignment.placements[tid].estimated_execution_time
        elif tid in assignment.unassigned:
            rec.reason = assignment.unassigned[tid]
            rec.status = "unassigned"
    per_task = [ex.records[tid] for tid in ex.order]
    report = MetricsReport(
        makespan=ex.makespan(),
        baseline_makespan=baseline_makespan(scenario, t_work),
        feasible=all(r.status == "done" for r in per_task),
        workload_start=t_work,
        per_task=per_task,
        energy={i: {"compute": ledger.compute[i], "tx": ledger.tx[i], "relay": ledger.relay[i],
                    "remaining": ledger.remaining[i]} for i in sorted(nodes)},
        packets=dict(net.stats),
        assignment=placement,
        unassigned=dict(assignment.unassigned),
        groups=[{"group": g.group_id, "owner": g.owner, "clients": list(g.clients),
                 "addresses": dict(g.addresses)} for g in formation.groups],
    )
    engine.log("-", "run_done", makespan=report.makespan, baseline=report.baseline_makespan)
    return Run(report, engine.trace, net, assignment)


def run_scenario(scenario: Scenario) -> MetricsReport:
    return simulate(scenario, trace=False).report
