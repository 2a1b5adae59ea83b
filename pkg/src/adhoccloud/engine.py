"""Single-threaded discrete-event engine with a line-oriented trace."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

TIMER = "timer"
MESSAGE = "message-delivery"
TASK_START = "task-start"
TASK_COMPLETE = "task-complete"
TRANSFER_COMPLETE = "transfer-complete"
EVENT_KINDS = (TIMER, MESSAGE, TASK_START, TASK_COMPLETE, TRANSFER_COMPLETE)


class SimulationError(RuntimeError):
    """Internal invariant breach inside the engine (a bug, not bad input)."""


@dataclass(order=True)
class Event:
    time: float
    sequence: int
    kind: str = field(compare=False)
    action: Callable[[], Any] = field(compare=False, repr=False)
    payload: Any = field(default=None, compare=False)
    cancelled: bool = field(default=False, compare=False)

    def cancel(self) -> None:
        self.cancelled = True


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value) if value else "-"
    if value is None:
        return "-"
    return str(value)


@dataclass(frozen=True)
class TraceRecord:
    time: float
    sequence: int
    node: str
    kind: str
    fields: tuple[tuple[str, Any], ...] = ()

    def format(self) -> str:
        parts = [f"{self.time:.6f}", str(self.sequence), self.node, self.kind]
        parts += [f"{k}={_fmt(v)}" for k, v in self.fields]
        return " ".join(parts)

    def get(self, key: str, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default


class Trace:
    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.records: list[TraceRecord] = []
        self._seq = 0

    def emit(self, time: float, node: str, kind: str, **fields: Any) -> None:
        if not self.enabled:
            return
        self.records.append(TraceRecord(time, self._seq, node, kind, tuple(fields.items())))
        self._seq += 1

    def lines(self) -> list[str]:
        return [r.format() for r in self.records]

    def of_kind(self, kind: str) -> list[TraceRecord]:
        return [r for r in self.records if r.kind == kind]

    def dump(self) -> str:
        return "".join(line + "\n" for line in self.lines())


class Engine:
    def __init__(self, seed: int = 0, trace: Trace | None = None, start_time: float = 0.0):
        self.now = start_time
        self.rng = random.Random(seed)
        self.trace = trace if trace is not None else Trace()
        self._queue: list[Event] = []
        self._seq = 0
        self.processed = 0

    def schedule_at(self, time: float, action: Callable[[], Any], kind: str = TIMER, payload=None) -> Event:
        if time < self.now:
            raise SimulationError(f"event scheduled in the past: {time} < {self.now}")
        if kind not in EVENT_KINDS:
            raise SimulationError(f"unknown event kind {kind!r}")
        ev = Event(time, self._seq, kind, action, payload)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule(self, delay: float, action: Callable[[], Any], kind: str = TIMER, payload=None) -> Event:
        return self.schedule_at(self.now + delay, action, kind, payload)

    def log(self, node: str, kind: str, **fields: Any) -> None:
        self.trace.emit(self.now, node, kind, **fields)

    def peek_time(self) -> float | None:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].time if self._queue else None

    def step(self) -> bool:
        t = self.peek_time()
        if t is None:
            return False
        ev = heapq.heappop(self._queue)
        if ev.time < self.now:
            raise SimulationError("event queue went backwards")
        self.now = ev.time
        self.processed += 1
        ev.action()
        return True

    def run_until(self, t_end: float) -> "Engine":
        """Process every event with time <= t_end, then advance the clock to t_end."""
        if t_end < self.now:
            raise SimulationError(f"cannot run backwards to {t_end} from {self.now}")
        while True:
            t = self.peek_time()
            if t is None or t > t_end:
                break
            self.step()
        self.now = t_end
        return self

    def run_while(self, keep_going: Callable[[], bool], horizon: float) -> "Engine":
        """Step until ``keep_going()`` is false or the clock would pass ``horizon``."""
        while keep_going():
            t = self.peek_time()
            if t is None or t > horizon:
                break
            self.step()
        return self
