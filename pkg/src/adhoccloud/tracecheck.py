"""Re-verify run invariants from a written trace.

Checks are deliberately independent of the simulator's in-memory state so a
trace file on its own is enough: ordering, task causality, loop-free data
paths, and loop-free next-hop chains in every logged routing-table snapshot.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field


@dataclass
class ParsedRecord:
    line_no: int
    time: float
    sequence: int
    node: str
    kind: str
    fields: dict[str, str] = field(default_factory=dict)


class TraceFormatError(ValueError):
    pass


def parse_line(line: str, line_no: int = 0) -> ParsedRecord:
    parts = line.split()
    if len(parts) < 4:
        raise TraceFormatError(f"line {line_no}: expected 'time seq node kind [k=v ...]'")
    try:
        time, seq = float(parts[0]), int(parts[1])
    except ValueError:
        raise TraceFormatError(f"line {line_no}: bad time or sequence") from None
    fields = {}
    for kv in parts[4:]:
        k, sep, v = kv.partition("=")
        if not sep:
            raise TraceFormatError(f"line {line_no}: field {kv!r} is not key=value")
        fields[k] = v
    return ParsedRecord(line_no, time, seq, parts[2], parts[3], fields)


def parse_trace(text: str) -> list[ParsedRecord]:
    return [parse_line(l, i) for i, l in enumerate(text.splitlines(), 1) if l.strip()]


def _list(v: str) -> list[str]:
    return [] if v in ("", "-") else v.split(",")


def check_order(records: list[ParsedRecord]) -> list[str]:
    errs = []
    for prev, cur in zip(records, records[1:]):
        if (cur.time, cur.sequence) <= (prev.time, prev.sequence):
            errs.append(f"line {cur.line_no}: record out of order")
    return errs


def check_causality(records: list[ParsedRecord]) -> list[str]:
    """Each task is released only after every predecessor completed, and starts after its input arrived."""
    errs = []
    completed: dict[str, float] = {}
    released: dict[str, float] = {}
    arrived: dict[str, float] = {}
    for r in records:
        task = r.fields.get("task")
        if r.kind == "task_complete":
            completed[task] = r.time
        elif r.kind == "task_release":
            released[task] = r.time
            for p in _list(r.fields.get("preds", "-")):
                if p not in completed or completed[p] > r.time:
                    errs.append(f"line {r.line_no}: {task} released before predecessor {p} completed")
        elif r.kind == "input_arrived":
            if task not in released:
                errs.append(f"line {r.line_no}: input for {task} arrived before release")
            arrived[task] = r.time
        elif r.kind == "task_start":
            if task not in arrived or arrived[task] > r.time:
                errs.append(f"line {r.line_no}: {task} started before its input arrived")
            for p in _list(r.fields.get("preds", "-")):
                if p not in completed:
                    errs.append(f"line {r.line_no}: {task} started before predecessor {p} completed")
    return errs


def check_paths(records: list[ParsedRecord]) -> list[str]:
    errs = []
    for r in records:
        if r.kind == "data_deliver":
            path = _list(r.fields.get("path", "-"))
            if len(set(path)) != len(path):
                errs.append(f"line {r.line_no}: delivery path {'->'.join(path)} revisits a node")
    return errs


def check_route_snapshots(records: list[ParsedRecord]) -> list[str]:
    """Follow every finite next-hop chain in each table snapshot; it must reach its destination."""
    errs = []
    snapshots: dict[float, list[ParsedRecord]] = defaultdict(list)
    for r in records:
        if r.kind == "route":
            snapshots[r.time].append(r)
    for t, rows in sorted(snapshots.items()):
        nxt = {}
        for r in rows:
            if float(r.fields["hops"]) != float("inf"):
                nxt[(r.node, r.fields["dest"])] = r.fields["next"]
        nodes = {r.node for r in rows}
        limit = max(len(nodes) - 1, 1)
        for (src, dest) in sorted(nxt):
            cur, seen, steps = src, {src}, 0
            while cur != dest:
                hop = nxt.get((cur, dest))
                if hop is None:
                    errs.append(f"t={t:.6f}: chain {src}->{dest} dead-ends at {cur}")
                    break
                steps += 1
                if hop in seen or steps > limit:
                    errs.append(f"t={t:.6f}: next-hop loop on {src}->{dest}")
                    break
                seen.add(hop)
                cur = hop
    return errs


def check_trace_text(text: str) -> list[str]:
    records = parse_trace(text)
    return (check_order(records) + check_causality(records) + check_paths(records)
            + check_route_snapshots(records))
