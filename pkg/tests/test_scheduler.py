import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from adhoccloud.model import TaskGraph
from adhoccloud.oracle import OracleTooLarge, oracle_allocate
from adhoccloud.scheduler import AllocationParams, allocate, feasible_nodes, sort_tasks

from conftest import node, task
from instances import random_instance


def test_sort_is_topological_then_edf():
    g = TaskGraph((task("a", deadline=9), task("b", deadline=1), task("c", deadline=2), task("d", deadline=0.5)),
                  (("a", "d"),))
    # d has the earliest deadline but must wait for a
    assert [t.id for t in sort_tasks(g)] == ["b", "c", "a", "d"]


def test_sort_breaks_deadline_ties_by_id():
    g = TaskGraph((task("z", deadline=1), task("m", deadline=1)))
    assert [t.id for t in sort_tasks(g)] == ["m", "z"]


def test_deadline_filter():
    t = task("t", size=1000, deadline=0.6)
    slow, fast = node("slow", p=1000), node("fast", p=2000)
    assert [n.id for n in feasible_nodes(t, [slow, fast], {"slow": math.inf, "fast": math.inf}, 1.5, 0)] == ["fast"]


def test_transfer_counts_against_deadline():
    t = task("t", size=1000, inp=10000, deadline=0.6)
    fast = node("fast", p=2000)
    assert feasible_nodes(t, [fast], {"fast": math.inf}, 1.5, 0)
    # 80 Mbit over 250 Mbps adds 0.32 s
    assert not feasible_nodes(t, [fast], {"fast": 250.0}, 1.5, 0)


def test_energy_threshold_and_budget():
    t = task("t", size=1000)
    n = node("n", p=1000, energy=5.0, a=1.0, b=0)
    assert feasible_nodes(t, [n], {"n": math.inf}, 1.5, 0)
    assert not feasible_nodes(t, [n], {"n": math.inf}, 1.5, 5.0)
    assert not feasible_nodes(t, [n], {"n": math.inf}, 1.5, 0, {"n": 0.5})


def test_unreachable_nodes_skipped():
    assert feasible_nodes(task("t"), [node("n")], {}, 1.5, 0) == []


def test_allocate_picks_min_energy():
    t = task("t", size=1000, deadline=10)
    cheap = node("cheap", p=1000, a=0.5)
    pricey = node("pricey", p=4000, a=4.0)
    a = allocate(TaskGraph((t,)), [pricey, cheap], AllocationParams({"cheap": 250.0, "pricey": 250.0}))
    assert a.node_of("t") == "cheap"
    assert a.placements["t"].estimated_energy == pytest.approx(0.5)
    assert a.total_energy == pytest.approx(0.5)


def test_energy_tie_goes_to_faster_then_lower_id():
    t = task("t", size=1000)
    a1 = node("b", p=1000, a=1.0)
    a2 = node("a", p=1000, a=1.0)
    fast = node("c", p=2000, a=2.0)
    got = allocate(TaskGraph((t,)), [a1, a2, fast], AllocationParams({"a": math.inf, "b": math.inf, "c": math.inf}))
    assert got.node_of("t") == "c"  # same 1.0 J, shorter time
    got = allocate(TaskGraph((t,)), [a1, a2], AllocationParams({"a": math.inf, "b": math.inf}))
    assert got.node_of("t") == "a"


def test_energy_is_decremented_between_placements():
    g = TaskGraph((task("x", size=1000), task("y", size=1000)))
    cheap = node("cheap", energy=1.5, a=1.0, b=0)
    other = node("other", energy=100, a=2.0, b=0)
    bw = {"cheap": math.inf, "other": math.inf}
    assert allocate(g, [cheap, other], AllocationParams(bw)).placements["y"].node_id == "other"
    assert allocate(g, [cheap, other], AllocationParams(bw, static_energy=True)).placements["y"].node_id == "cheap"


def test_unassigned_reasons():
    g = TaskGraph((task("late", size=1e6, deadline=0.1), task("hungry", size=1000)))
    n = node("n", energy=0.5, a=1.0)
    a = allocate(g, [n], AllocationParams({"n": math.inf}))
    assert a.unassigned == {"late": "deadline", "hungry": "energy"}


def test_oracle_size_limit():
    g = TaskGraph(tuple(task(f"t{i}") for i in range(9)))
    with pytest.raises(OracleTooLarge):
        oracle_allocate(g, [node("n")], AllocationParams({"n": math.inf}))


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_allocate_matches_oracle(seed):
    graph, nodes, params = random_instance(random.Random(seed))
    fast, ref = allocate(graph, nodes, params), oracle_allocate(graph, nodes, params)
    assert fast.order == ref.order
    assert {t: p.node_id for t, p in fast.placements.items()} == {t: p.node_id for t, p in ref.placements.items()}
    assert fast.unassigned == ref.unassigned


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_placements_respect_deadline_and_budget(seed):
    graph, nodes, params = random_instance(random.Random(seed))
    a = allocate(graph, nodes, params)
    budget = {n.id: n.available_energy for n in nodes}
    for tid in a.order:
        if tid not in a.placements:
            continue
        p = a.placements[tid]
        assert p.estimated_execution_time <= graph.task(tid).deadline
        assert p.estimated_energy <= budget[p.node_id]
        if not params.static_energy:
            budget[p.node_id] -= p.estimated_energy
    assert set(a.placements) | set(a.unassigned) == {t.id for t in graph.tasks}
