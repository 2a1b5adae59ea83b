"""Execution-time, transfer-time and energy estimates for placing a task on a node."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import KB_TO_MEGABITS, NodeSpec, TaskSpec


@dataclass(frozen=True)
class CostEstimate:
    execution_time: float
    transfer_time: float
    energy: float
    packets: int

    def __post_init__(self):
        if min(self.execution_time, self.transfer_time, self.energy, self.packets) < 0:
            raise ValueError("cost fields must be non-negative")
        if self.execution_time < self.transfer_time:
            raise ValueError("execution_time must include transfer_time")


def packet_count(input_data: float, output_data: float, packet_size: float) -> int:
    """Frames needed to move a task's input and output, one ceiling per direction."""
    if not packet_size > 0:
        raise ValueError(f"packet_size must be > 0, got {packet_size!r}")
    if input_data < 0 or output_data < 0:
        raise ValueError("data sizes must be >= 0")
    return math.ceil(input_data / packet_size) + math.ceil(output_data / packet_size)


def data_transfer_time(input_data: float, output_data: float, bandwidth: float) -> float:
    """Seconds to move input plus output (KB) over a ``bandwidth`` Mbps channel.

    An infinite bandwidth stands for data that never leaves the node.
    """
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth!r}")
    if math.isinf(bandwidth):
        return 0.0
    return (input_data + output_data) * KB_TO_MEGABITS / bandwidth


def execution_time_estimate(task: TaskSpec, node: NodeSpec, transfer_time: float) -> float:
    return task.size / node.processing_power + transfer_time


def energy_estimate(task: TaskSpec, node: NodeSpec, packet_size: float) -> float:
    pkts = packet_count(task.input_data, task.output_data, packet_size)
    return node.proc_energy_rate * (task.size / node.processing_power) + node.tx_energy_per_packet * pkts


def estimate(task: TaskSpec, node: NodeSpec, bandwidth: float, packet_size: float) -> CostEstimate:
    dtt = data_transfer_time(task.input_data, task.output_data, bandwidth)
    return CostEstimate(
        execution_time=execution_time_estimate(task, node, dtt),
        transfer_time=dtt,
        energy=energy_estimate(task, node, packet_size),
        packets=packet_count(task.input_data, task.output_data, packet_size),
    )
