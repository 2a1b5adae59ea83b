"""TOML scenario files: strict parsing and a canonical writer.

Layout::

    source_node = "vega_lte"          # default: first node

    [params]                          # every key optional, see DEFAULTS
    seed = 0
    packet_size = 1.5

    [[nodes]]
    id = "vega_lte"
    processing_power = 3000.0
    ...

    [workload]                        # default: profile "avss3" at 30 MB
    profile = "avss3"
    input_mb = 30.0
    # or: tasks = [{id = "a", size = 10.0, ...}], edges = [["a", "b"]]

    [[groups]]   owner, clients       # optional; omitted means run group formation
    [[links]]    endpoints, bandwidth, latency
    [[failures]] node, time
"""

from __future__ import annotations

import dataclasses
import re
import warnings
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .model import (Failure, GroupConfig, LinkSpec, NodeSpec, Scenario, SimParams, TaskGraph, TaskSpec,
                    ValidationError, WorkloadSource)
from .workload import UnknownProfile, build_avss_workload

DEFAULT_PROFILE = "avss3"
DEFAULT_INPUT_MB = 30.0

SCENARIO_PARAMS = {"seed": 0, "packet_size": 1.5, "energy_threshold": 0.0}
DEFAULTS = {**SCENARIO_PARAMS, **{f.name: f.default for f in dataclasses.fields(SimParams)}}

TOP_KEYS = {"source_node", "params", "nodes", "workload", "groups", "links", "failures"}
NODE_KEYS = {f.name for f in dataclasses.fields(NodeSpec)}
TASK_KEYS = {f.name for f in dataclasses.fields(TaskSpec)}
WORKLOAD_KEYS = {"profile", "input_mb", "tasks", "edges"}
GROUP_KEYS = {"owner", "clients"}
LINK_KEYS = {"endpoints", "bandwidth", "latency"}
FAILURE_KEYS = {"node", "time"}


class ScenarioSyntaxError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class UnknownKeyWarning(UserWarning):
    pass


def _check_keys(table, allowed: set[str], path: str, strict: bool) -> None:
    if not isinstance(table, dict):
        raise ValidationError(path, "must be a table")
    for key in sorted(set(table) - allowed):
        where = f"{path}.{key}" if path else key
        if strict:
            raise ValidationError(where, "unknown key")
        warnings.warn(f"{where}: unknown key ignored", UnknownKeyWarning, stacklevel=4)


def _build(cls, table: dict, allowed: set[str], path: str, strict: bool, **convert):
    _check_keys(table, allowed, path, strict)
    kwargs = {k: v for k, v in table.items() if k in allowed}
    for k, fn in convert.items():
        if k in kwargs:
            kwargs[k] = fn(kwargs[k])
    try:
        return cls(**kwargs)
    except ValidationError as e:
        raise e.prefixed(path) from None
    except TypeError as e:
        raise ValidationError(path, str(e)) from None


def _array(x, path):
    if not isinstance(x, list):
        raise ValidationError(path, "must be an array")
    return x


def scenario_from_dict(doc: dict, strict: bool = True) -> Scenario:
    _check_keys(doc, TOP_KEYS, "", strict)
    params_t = doc.get("params", {})
    _check_keys(params_t, set(DEFAULTS), "params", strict)
    sim_kwargs = {k: v for k, v in params_t.items() if k in DEFAULTS and k not in SCENARIO_PARAMS}
    try:
        params = SimParams(**sim_kwargs)
    except ValidationError as e:
        raise e.prefixed("params") from None

    if "nodes" not in doc:
        raise ValidationError("nodes", "nodes empty")
    nodes = tuple(_build(NodeSpec, t, NODE_KEYS, f"nodes[{i}]", strict, position=tuple)
                  for i, t in enumerate(_array(doc["nodes"], "nodes")))

    workload, wsource = _workload(doc.get("workload", {}), strict)
    groups = None
    if "groups" in doc:
        groups = tuple(_build(GroupConfig, t, GROUP_KEYS, f"groups[{i}]", strict, clients=tuple)
                       for i, t in enumerate(_array(doc["groups"], "groups")))
    links = tuple(_build(LinkSpec, t, LINK_KEYS, f"links[{i}]", strict, endpoints=tuple)
                  for i, t in enumerate(_array(doc.get("links", []), "links")))
    failures = tuple(_build(Failure, t, FAILURE_KEYS, f"failures[{i}]", strict)
                     for i, t in enumerate(_array(doc.get("failures", []), "failures")))
    source = doc.get("source_node", nodes[0].id if nodes else "")
    try:
        return Scenario(
            nodes=nodes, workload=workload, source_node=source,
            packet_size=params_t.get("packet_size", DEFAULTS["packet_size"]),
            energy_threshold=params_t.get("energy_threshold", DEFAULTS["energy_threshold"]),
            rng_seed=params_t.get("seed", DEFAULTS["seed"]),
            groups=groups, links=links, failures=failures, params=params, workload_source=wsource,
        )
    except ValidationError as e:
        if e.path in SCENARIO_PARAMS or e.path == "rng_seed":
            raise ValidationError("params." + ("seed" if e.path == "rng_seed" else e.path), e.message) from None
        raise


def _workload(t: dict, strict: bool) -> tuple[TaskGraph, WorkloadSource | None]:
    _check_keys(t, WORKLOAD_KEYS, "workload", strict)
    if "tasks" in t:
        if "profile" in t or "input_mb" in t:
            raise ValidationError("workload", "give either profile/input_mb or tasks, not both")
        tasks = tuple(_build(TaskSpec, row, TASK_KEYS, f"workload.tasks[{i}]", strict)
                      for i, row in enumerate(_array(t["tasks"], "workload.tasks")))
        edges = tuple(tuple(e) for e in _array(t.get("edges", []), "workload.edges"))
        try:
            return TaskGraph(tasks, edges), None
        except ValidationError as e:
            raise e.prefixed("workload") from None
    if "edges" in t:
        raise ValidationError("workload.edges", "edges need an inline task table")
    profile = t.get("profile", DEFAULT_PROFILE)
    mb = t.get("input_mb", DEFAULT_INPUT_MB)
    try:
        graph = build_avss_workload(mb, profile)
    except UnknownProfile as e:
        raise ValidationError("workload.profile", e.args[0]) from None
    except (ValueError, TypeError) as e:
        raise ValidationError("workload.input_mb", str(e)) from None
    return graph, WorkloadSource(profile, mb)


def loads_scenario(text: str, strict: bool = True) -> Scenario:
    if not text.strip():
        raise ScenarioSyntaxError(1, "empty scenario file")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(e))
            line = int(m.group(1)) if m else 1
        raise ScenarioSyntaxError(line, getattr(e, "msg", str(e))) from None
    if not doc:
        raise ScenarioSyntaxError(1, "scenario file has no tables")
    return scenario_from_dict(doc, strict)


def parse_scenario(path: str | Path, strict: bool = True) -> Scenario:
    return loads_scenario(Path(path).read_text(encoding="utf-8"), strict)


def scenario_to_dict(s: Scenario) -> dict:
    params = {"seed": s.rng_seed, "packet_size": s.packet_size, "energy_threshold": s.energy_threshold}
    params.update(dataclasses.asdict(s.params))
    doc: dict = {"source_node": s.source_node, "params": params}
    doc["nodes"] = [{**dataclasses.asdict(n), "position": list(n.position)} for n in s.nodes]
    ws = s.workload_source
    if ws is not None and build_avss_workload(ws.input_mb, ws.profile) == s.workload:
        doc["workload"] = {"profile": ws.profile, "input_mb": ws.input_mb}
    else:
        doc["workload"] = {
            "tasks": [dataclasses.asdict(t) for t in s.workload.tasks],
            "edges": [list(e) for e in s.workload.edges],
        }
    if s.groups is not None:
        doc["groups"] = [{"owner": g.owner, "clients": list(g.clients)} for g in s.groups]
    if s.links:
        doc["links"] = [{"endpoints": list(l.endpoints), "bandwidth": l.bandwidth, "latency": l.latency}
                        for l in s.links]
    if s.failures:
        doc["failures"] = [{"node": f.node, "time": f.time} for f in s.failures]
    return doc


def write_scenario(s: Scenario) -> str:
    """Canonical text for ``s``; ``loads_scenario(write_scenario(s)) == s``."""
    return tomli_w.dumps(scenario_to_dict(s))


def with_seed(s: Scenario, seed: int) -> Scenario:
    return dataclasses.replace(s, rng_seed=seed)


def with_input_size(s: Scenario, input_mb: float) -> Scenario:
    """Rebuild a profile-backed workload at a new input size."""
    if s.workload_source is None:
        raise ValueError("scenario has an inline workload; input size cannot be varied")
    ws = WorkloadSource(s.workload_source.profile, input_mb)
    return dataclasses.replace(s, workload=build_avss_workload(input_mb, ws.profile), workload_source=ws)

