import math

import pytest
from hypothesis import given, strategies as st

from adhoccloud.cost import (CostEstimate, data_transfer_time, energy_estimate, estimate,
                             execution_time_estimate, packet_count)

from conftest import node, task


def test_transfer_time_hand_value():
    # 1000 KB out + 250 KB back = 10 Mbit over 250 Mbps
    assert data_transfer_time(1000, 250, 250) == pytest.approx(0.04)


def test_source_node_has_no_transfer():
    assert data_transfer_time(1e6, 1e6, math.inf) == 0.0


def test_bad_bandwidth():
    with pytest.raises(ValueError):
        data_transfer_time(1, 1, 0)


def test_packet_count_ceiling_per_direction():
    assert packet_count(3.0, 1.6, 1.5) == 2 + 2
    assert packet_count(0, 0, 1.5) == 0
    with pytest.raises(ValueError):
        packet_count(1, 1, 0)


def test_estimate_hand_values():
    t = task("t", size=3000, inp=30000, out=1500)
    n = node("n", p=16000, a=4.0, b=8e-5)
    c = estimate(t, n, 250.0, 1.5)
    assert c.transfer_time == pytest.approx(1.008)
    assert c.execution_time == pytest.approx(1.008 + 0.1875)
    assert c.packets == 21000
    assert c.energy == pytest.approx(4.0 * 0.1875 + 8e-5 * 21000)


def test_cost_estimate_invariants():
    with pytest.raises(ValueError):
        CostEstimate(1.0, 2.0, 0.0, 0)
    with pytest.raises(ValueError):
        CostEstimate(1.0, 0.5, -1.0, 0)


sizes = st.floats(min_value=0.0, max_value=1e6, allow_nan=False)


@given(sizes, sizes, st.floats(min_value=1e-3, max_value=1e4))
def test_transfer_time_is_linear_in_data(i, o, bw):
    assert data_transfer_time(i, o, bw) == pytest.approx(data_transfer_time(i + o, 0, bw), rel=1e-12)
    assert data_transfer_time(2 * i, 2 * o, bw) == pytest.approx(2 * data_transfer_time(i, o, bw), rel=1e-12)


@given(st.floats(min_value=1e-3, max_value=1e6), st.floats(min_value=1.0, max_value=1e5),
       st.floats(min_value=0.0, max_value=10.0))
def test_execution_time_at_least_compute(size, p, dtt):
    t, n = task("t", size=size), node("n", p=p)
    assert execution_time_estimate(t, n, dtt) >= size / p


@given(sizes, sizes, st.floats(min_value=0.1, max_value=100.0))
def test_packets_cover_the_data(i, o, pkt):
    k = packet_count(i, o, pkt)
    assert k * pkt >= i + o - 1e-6
    assert k <= (i + o) / pkt + 2


@given(st.floats(min_value=1.0, max_value=1e5), st.floats(min_value=0, max_value=10),
       st.floats(min_value=0, max_value=1e-2))
def test_energy_monotone_in_size(size, a, b):
    n = node("n", p=1000.0, a=a, b=b)
    small = energy_estimate(task("t", size=size, inp=10, out=10), n, 1.5)
    big = energy_estimate(task("t", size=2 * size, inp=10, out=10), n, 1.5)
    assert big >= small
