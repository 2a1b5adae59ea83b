"""Brute-force reference allocator used to cross-check :func:`scheduler.allocate`.

Deliberately shares no code with the scheduler or the cost module: the task
order comes from enumerating every permutation, and each placement from a
plain scan over all nodes with the cost formulas written out inline.
"""

from __future__ import annotations

import itertools
import math

from .model import NodeSpec, TaskGraph
from .scheduler import AllocationParams, Assignment, Placement

MAX_TASKS = 8
MAX_NODES = 6


class OracleTooLarge(ValueError):
    pass


def _brute_force_order(graph: TaskGraph) -> list[str]:
    # The greedy earliest-deadline topological order is the lexicographically
    # smallest valid order under the (deadline, id) key.
    tasks = {t.id: t for t in graph.tasks}
    best = None
    for perm in itertools.permutations(sorted(tasks)):
        pos = {tid: i for i, tid in enumerate(perm)}
        if any(pos[a] > pos[b] for a, b in graph.edges):
            continue
        key = [(tasks[tid].deadline, tid) for tid in perm]
        if best is None or key < best[0]:
            best = (key, perm)
    return list(best[1]) if best else []


def oracle_allocate(graph: TaskGraph, nodes: list[NodeSpec], params: AllocationParams) -> Assignment:
    if len(graph.tasks) > MAX_TASKS or len(nodes) > MAX_NODES:
        raise OracleTooLarge(f"oracle limited to {MAX_TASKS} tasks and {MAX_NODES} nodes")
    tasks = {t.id: t for t in graph.tasks}
    energy = {n.id: n.available_energy for n in nodes}
    out = Assignment()
    for tid in _brute_force_order(graph):
        out.order.append(tid)
        t = tasks[tid]
        pick = None
        any_on_time = False
        for n in nodes:
            if n.id not in params.bandwidth_of:
                continue
            bw = params.bandwidth_of[n.id]
            transfer = 0.0 if bw == math.inf else (t.input_data + t.output_data) * 8.0 / 1000.0 / bw
            t_exec = t.size / n.processing_power + transfer
            if t_exec > t.deadline:
                continue
            any_on_time = True
            frames = math.ceil(t.input_data / params.packet_size) + math.ceil(t.output_data / params.packet_size)
            e = n.proc_energy_rate * (t.size / n.processing_power) + n.tx_energy_per_packet * frames
            if energy[n.id] <= params.energy_threshold or energy[n.id] < e:
                continue
            if pick is None:
                pick = (e, t_exec, n.id)
                continue
            pe, pt, pid = pick
            if e < pe or (e == pe and t_exec < pt) or (e == pe and t_exec == pt and n.id < pid):
                pick = (e, t_exec, n.id)
        if pick is None:
            out.unassigned[tid] = "energy" if any_on_time else "deadline"
            continue
        e, t_exec, nid = pick
        out.placements[tid] = Placement(nid, t_exec, e)
        if not params.static_energy:
            energy[nid] -= e
    return out
