"""Deadline-filtered, energy-minimising task allocation.

Step 1 keeps the nodes whose estimated execution time meets the task deadline
(and that still have energy to spare); step 2 picks the cheapest of those in
estimated energy.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import cost
from .model import NodeSpec, TaskGraph, TaskSpec

REASON_DEADLINE = "deadline"
REASON_ENERGY = "energy"


@dataclass(frozen=True)
class Placement:
    node_id: str
    estimated_execution_time: float
    estimated_energy: float


@dataclass
class Assignment:
    placements: dict[str, Placement] = field(default_factory=dict)
    unassigned: dict[str, str] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)

    @property
    def total_energy(self) -> float:
        return sum(p.estimated_energy for p in self.placements.values())

    def node_of(self, task_id: str) -> str | None:
        p = self.placements.get(task_id)
        return p.node_id if p else None


@dataclass(frozen=True)
class AllocationParams:
    bandwidth_of: Mapping[str, float]
    packet_size: float = 1.5
    energy_threshold: float = 0.0
    static_energy: bool = False


def sort_tasks(graph: TaskGraph) -> list[TaskSpec]:
    """Topological order; among ready tasks, earliest deadline first, then id."""
    indegree = {t.id: 0 for t in graph.tasks}
    succ: dict[str, list[str]] = {t.id: [] for t in graph.tasks}
    for a, b in set(graph.edges):
        indegree[b] += 1
        succ[a].append(b)
    by_id = {t.id: t for t in graph.tasks}
    ready = [(t.deadline, t.id) for t in graph.tasks if indegree[t.id] == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        _, tid = heapq.heappop(ready)
        out.append(by_id[tid])
        for s in succ[tid]:
            indegree[s] -= 1
            if indegree[s] == 0:
                heapq.heappush(ready, (by_id[s].deadline, s))
    return out


def feasible_nodes(
    task: TaskSpec,
    nodes: Sequence[NodeSpec],
    bandwidth_of: Mapping[str, float],
    packet_size: float,
    energy_threshold: float,
    available_energy: Mapping[str, float] | None = None,
) -> list[NodeSpec]:
    """Nodes that meet the deadline and can afford the task's estimated energy.

    ``bandwidth_of`` maps node id to the bottleneck bandwidth (Mbps) between
    the data source and that node; ``inf`` marks the source itself. Nodes
    missing from it are unreachable and never feasible.
    """
    out = []
    for node in nodes:
        if node.id not in bandwidth_of:
            continue
        energy_left = node.available_energy if available_energy is None else available_energy[node.id]
        dtt = cost.data_transfer_time(task.input_data, task.output_data, bandwidth_of[node.id])
        if cost.execution_time_estimate(task, node, dtt) > task.deadline:
            continue
        if not energy_left > energy_threshold:
            continue
        if energy_left < cost.energy_estimate(task, node, packet_size):
            continue
        out.append(node)
    return out


def allocate(graph: TaskGraph, nodes: Sequence[NodeSpec], params: AllocationParams) -> Assignment:
    energy_left = {n.id: n.available_energy for n in nodes}
    result = Assignment()
    for task in sort_tasks(graph):
        result.order.append(task.id)
        candidates = feasible_nodes(task, nodes, params.bandwidth_of, params.packet_size,
                                    params.energy_threshold, energy_left)
        if not candidates:
            result.unassigned[task.id] = _rejection_reason(task, nodes, params)
            continue
        scored = []
        for node in candidates:
            dtt = cost.data_transfer_time(task.input_data, task.output_data, params.bandwidth_of[node.id])
            ee = cost.execution_time_estimate(task, node, dtt)
            eec = cost.energy_estimate(task, node, params.packet_size)
            scored.append((eec, ee, node.id))
        eec, ee, chosen = min(scored)
        result.placements[task.id] = Placement(chosen, ee, eec)
        if not params.static_energy:
            energy_left[chosen] -= eec
    return result


def _rejection_reason(task: TaskSpec, nodes: Sequence[NodeSpec], params: AllocationParams) -> str:
    for node in nodes:
        if node.id not in params.bandwidth_of:
            continue
        dtt = cost.data_transfer_time(task.input_data, task.output_data, params.bandwidth_of[node.id])
        if cost.execution_time_estimate(task, node, dtt) <= task.deadline:
            return REASON_ENERGY
    return REASON_DEADLINE
