import math

import pytest

from adhoccloud.model import GroupConfig, LinkSpec, NodeSpec, Scenario, SimParams, TaskGraph, TaskSpec
from adhoccloud.scenario_io import loads_scenario, with_input_size
from adhoccloud.cli import load_scenario


def node(id, p=1000.0, energy=1000.0, a=1.0, b=0.001, pos=(0.0, 0.0), rng=200.0, intent=7):
    return NodeSpec(id, p, energy, a, b, pos, rng, intent)


def task(id, size=100.0, inp=0.0, out=0.0, deadline=math.inf, rt=False):
    return TaskSpec(id, size, inp, out, deadline, rt)


def chain_scenario(ids, workload=None, source=None, bw=250.0, latency=0.0, spacing=100.0, **kw):
    """Nodes on a line, each in range of its neighbours only, grouped into a relay chain."""
    nodes = tuple(node(i, pos=(k * spacing, 0.0), rng=spacing * 1.2) for k, i in enumerate(ids))
    groups = tuple(GroupConfig(ids[k], (ids[k + 1],)) for k in range(len(ids) - 1))
    links = tuple(LinkSpec((ids[k], ids[k + 1]), bw, latency) for k in range(len(ids) - 1))
    workload = workload or TaskGraph((task("t"),))
    return Scenario(nodes, workload, source or ids[0], groups=groups, links=links, **kw)


@pytest.fixture
def threenode():
    return load_scenario("table2_threenode")


@pytest.fixture
def threenode_at():
    base = load_scenario("table2_threenode")
    return lambda mb: with_input_size(base, mb)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
