import pytest
from hypothesis import given, strategies as st

from adhoccloud.engine import TASK_COMPLETE, Engine, SimulationError, Trace


def test_events_run_in_time_then_insertion_order():
    e = Engine()
    seen = []
    e.schedule(2.0, lambda: seen.append("late"))
    e.schedule(1.0, lambda: seen.append("a"))
    e.schedule(1.0, lambda: seen.append("b"))
    e.run_until(5.0)
    assert seen == ["a", "b", "late"]
    assert e.now == 5.0


def test_cancel_and_past_scheduling():
    e = Engine()
    seen = []
    ev = e.schedule(1.0, lambda: seen.append(1))
    ev.cancel()
    e.run_until(2.0)
    assert seen == []
    with pytest.raises(SimulationError):
        e.schedule_at(1.0, lambda: None)
    with pytest.raises(SimulationError):
        e.schedule(0.0, lambda: None, kind="nope")


def test_run_while_stops_at_condition():
    e = Engine()
    count = []
    for i in range(10):
        e.schedule(float(i), lambda: count.append(1))
    e.run_while(lambda: len(count) < 3, horizon=100.0)
    assert len(count) == 3 and e.now == 2.0


def test_trace_format():
    t = Trace()
    e = Engine(trace=t)
    e.schedule(0.5, lambda: e.log("n1", "thing", x=1.25, ok=True, path=["a", "b"], none=None, empty=[]),
               TASK_COMPLETE)
    e.run_until(1.0)
    assert t.lines() == ["0.500000 0 n1 thing x=1.25 ok=1 path=a,b none=- empty=-"]
    assert t.of_kind("thing")[0].get("x") == 1.25
    assert t.dump().endswith("\n")


def test_disabled_trace_records_nothing():
    e = Engine(trace=Trace(enabled=False))
    e.log("n", "x")
    assert e.trace.lines() == []


@given(st.lists(st.floats(min_value=0, max_value=1e3, allow_nan=False), max_size=50))
def test_clock_never_goes_backwards(delays):
    e = Engine()
    stamps = []
    for d in delays:
        e.schedule(d, lambda: stamps.append(e.now))
    e.run_until(2e3)
    assert stamps == sorted(stamps)


@given(st.integers(min_value=0, max_value=10**6))
def test_same_seed_same_draws(seed):
    assert [Engine(seed).rng.random() for _ in range(3)] == [Engine(seed).rng.random() for _ in range(3)]
