"""Discrete-event simulator of a mobile ad hoc cloud built on Wi-Fi Direct style groups."""

from .cost import CostEstimate, data_transfer_time, energy_estimate, estimate, execution_time_estimate, packet_count
from .model import (Failure, GroupConfig, LinkSpec, NodeSpec, Scenario, SimParams, TaskGraph, TaskSpec,
                    ValidationError, validate_scenario)
from .scenario_io import parse_scenario, write_scenario
from .scheduler import AllocationParams, Assignment, allocate
from .sim import MetricsReport, run_scenario, simulate
from .workload import build_avss_workload

__all__ = [
    "AllocationParams", "Assignment", "CostEstimate", "Failure", "GroupConfig", "LinkSpec", "MetricsReport",
    "NodeSpec", "Scenario", "SimParams", "TaskGraph", "TaskSpec", "ValidationError", "allocate",
    "build_avss_workload", "data_transfer_time", "energy_estimate", "estimate", "execution_time_estimate",
    "packet_count", "parse_scenario", "run_scenario", "simulate", "validate_scenario", "write_scenario",
]
