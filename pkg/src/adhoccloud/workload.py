"""AVSS task graphs built from declared per-task profiles, and profile calibration.

A profile row gives, per task type, work (MI) and data (KB) as linear
functions of the input video size in MB. Sizes of the real vision kernels
are unknown, so the three-task profile is fitted rather than measured; see
:func:`calibrate_three_task_profile`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .model import KB_TO_MEGABITS, NodeSpec, TaskGraph, TaskSpec

PROFILE_FIELDS = ("id", "work_base", "work_per_mb", "input_kb_per_mb", "output_kb_per_mb",
                  "deadline_base", "deadline_per_mb", "real_time")


class UnknownProfile(KeyError):
    pass


class CalibrationError(ValueError):
    pass


def available_profiles() -> list[str]:
    root = resources.files("adhoccloud") / "data" / "profiles"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_profile(name: str) -> dict:
    path = resources.files("adhoccloud") / "data" / "profiles" / f"{name}.json"
    if not path.is_file():
        raise UnknownProfile(f"unknown workload profile {name!r} (have: {', '.join(available_profiles())})")
    return json.loads(path.read_text())


def build_avss_workload(input_size: float, profile: str | dict = "avss3") -> TaskGraph:
    if not input_size > 0:
        raise ValueError(f"input_size must be > 0 MB, got {input_size!r}")
    prof = load_profile(profile) if isinstance(profile, str) else profile
    tasks = []
    for row in prof["tasks"]:
        tasks.append(TaskSpec(
            id=row["id"],
            size=row["work_base"] + row["work_per_mb"] * input_size,
            input_data=row["input_kb_per_mb"] * input_size,
            output_data=row["output_kb_per_mb"] * input_size,
            deadline=row["deadline_base"] + row["deadline_per_mb"] * input_size,
            real_time=bool(row["real_time"]),
        ))
    return TaskGraph(tuple(tasks), tuple((a, b) for a, b in prof["edges"]))


@dataclass(frozen=True)
class CalibrationKnobs:
    """Quantities the fit holds fixed; everything else is solved for."""

    detection_work_per_mb: float = 100.0
    classification_work_per_mb: float = 30.0
    raw_kb_per_mb: float = 1000.0
    detection_out_kb_per_mb: float = 50.0
    tracking_out_kb_per_mb: float = 5.0
    classification_out_kb_per_mb: float = 2.0
    bandwidth: float = 250.0
    latency: float = 0.002
    detection_deadline_per_mb: float = 0.05
    tracking_deadline_slack: float = 2.0
    classification_deadline_base: float = 10.0
    classification_deadline_per_mb: float = 0.1


def _transfer(kb: float, k: CalibrationKnobs) -> float:
    return kb * KB_TO_MEGABITS / k.bandwidth + k.latency


def three_task_times(x: float, prof: dict, source: NodeSpec, fast: NodeSpec, helper: NodeSpec,
                     k: CalibrationKnobs) -> dict[str, float]:
    """Closed-form per-task times for the intended placement at ``x`` MB.

    Detection and tracking run on ``fast``, classification on ``helper``; every
    task pulls its input from ``source`` and returns its output there.
    """
    rows = {r["id"]: r for r in prof["tasks"]}

    def remote(tid, node):
        r = rows[tid]
        work = r["work_base"] + r["work_per_mb"] * x
        return (_transfer(r["input_kb_per_mb"] * x, k) + work / node.processing_power
                + _transfer(r["output_kb_per_mb"] * x, k))

    total_work = sum(r["work_base"] + r["work_per_mb"] * x for r in rows.values())
    return {
        "detection": remote("detection", fast),
        "tracking": remote("tracking", fast),
        "classification": remote("classification", helper),
        "baseline": total_work / source.processing_power,
    }


def calibrate_three_task_profile(source: NodeSpec, fast: NodeSpec, helper: NodeSpec,
                                 targets: tuple[tuple[float, float], ...] = ((30.0, 0.17), (50.0, 0.20)),
                                 knobs: CalibrationKnobs | None = None) -> dict:
    """Fit tracking work per MB and classification fixed work to two improvement targets.

    With detection then {tracking, classification} in parallel, and the
    classification branch on the critical path, cluster makespan D and the
    single-node baseline B are both linear in the two unknowns, so
    ``D(x) = (1 - improvement) * B(x)`` at two input sizes is a 2x2 linear system.
    """
    k = knobs or CalibrationKnobs()
    if len(targets) != 2:
        raise CalibrationError("exactly two (input_mb, improvement) targets are needed")
    ps, pf, ph = source.processing_power, fast.processing_power, helper.processing_power
    m = lambda kb: kb * KB_TO_MEGABITS / k.bandwidth
    a, rhs = [], []
    for x, imp in targets:
        keep = 1.0 - imp
        td = (m(k.raw_kb_per_mb * x) + k.detection_work_per_mb * x / pf
              + m(k.detection_out_kb_per_mb * x) + 2 * k.latency)
        tc_var = (m(k.detection_out_kb_per_mb * x) + k.classification_work_per_mb * x / ph
                  + m(k.classification_out_kb_per_mb * x) + 2 * k.latency)
        b_known = (k.detection_work_per_mb + k.classification_work_per_mb) * x / ps
        # td + tc_var + c0/ph = keep * (b_known + wt*x/ps + c0/ps)
        a.append([-keep * x / ps, 1.0 / ph - keep / ps])
        rhs.append(keep * b_known - td - tc_var)
    wt, c0 = (float(v) for v in np.linalg.solve(np.array(a), np.array(rhs)))
    if wt <= 0 or c0 < 0:
        raise CalibrationError(f"targets need non-physical work (tracking {wt:.3f}/MB, base {c0:.3f})")

    tracking_ee_per_mb = ((k.detection_out_kb_per_mb + k.tracking_out_kb_per_mb) * KB_TO_MEGABITS / k.bandwidth
                          + wt / pf)
    prof = {
        "name": "avss3",
        "description": "detection -> {tracking, classification}; fitted to the three-phone roster (clock x cores)",
        "tasks": [
            {"id": "detection", "work_base": 0.0, "work_per_mb": k.detection_work_per_mb,
             "input_kb_per_mb": k.raw_kb_per_mb, "output_kb_per_mb": k.detection_out_kb_per_mb,
             "deadline_base": 0.0, "deadline_per_mb": k.detection_deadline_per_mb, "real_time": True},
            {"id": "tracking", "work_base": 0.0, "work_per_mb": wt,
             "input_kb_per_mb": k.detection_out_kb_per_mb, "output_kb_per_mb": k.tracking_out_kb_per_mb,
             "deadline_base": 0.0, "deadline_per_mb": k.tracking_deadline_slack * tracking_ee_per_mb,
             "real_time": True},
            {"id": "classification", "work_base": c0, "work_per_mb": k.classification_work_per_mb,
             "input_kb_per_mb": k.detection_out_kb_per_mb, "output_kb_per_mb": k.classification_out_kb_per_mb,
             "deadline_base": k.classification_deadline_base,
             "deadline_per_mb": k.classification_deadline_per_mb, "real_time": False},
        ],
        "edges": [["detection", "tracking"], ["detection", "classification"]],
    }
    for x, _ in targets:
        t = three_task_times(x, prof, source, fast, helper, k)
        if t["classification"] < t["tracking"]:
            raise CalibrationError(f"at {x} MB tracking dominates; the linear fit does not apply")
    return prof
