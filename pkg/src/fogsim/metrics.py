"""Per-loop latency decomposition, windowed throughput and the run summary."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .engine import ns_to_ms
from .workload import Locus, Loop, Task


class IncompleteTrace(Exception):
    """A latency record was requested for a task that has not finished."""


def transmission_delay(network_length: float, bandwidth: float) -> float:
    """Transmission delay in ms; length and bandwidth share units so the ratio is ms."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    return network_length / bandwidth


@dataclass(frozen=True)
class LatencyRecord:
    """Component breakdown of one task's round trip, in integer nanoseconds.

    Each component is already multiplied by the number of times its link is
    crossed (two for request/response legs).
    """

    task_id: int
    task_type: str
    loop: Loop
    locus: Locus
    vehicle: int
    primary: str
    executor: str
    emitted: int
    sensor: int
    vehicle_transmission: int
    vehicle_propagation: int
    fog_transmission: int
    fog_propagation: int
    cloud_transmission: int
    cloud_propagation: int
    queue: int
    process: int
    cloud_process: int
    actuator: int
    total: int

    COMPONENTS = ("sensor", "vehicle_transmission", "vehicle_propagation",
                  "fog_transmission", "fog_propagation", "cloud_transmission",
                  "cloud_propagation", "queue", "process", "cloud_process", "actuator")

    def component_sum(self) -> int:
        return sum(getattr(self, c) for c in self.COMPONENTS)

    @property
    def total_ms(self) -> float:
        return ns_to_ms(self.total)


def leg_counts(loop: Loop, locus: Locus) -> dict[str, int]:
    """How many times each link is crossed for a task of ``loop`` served at ``locus``.

    Loop A returns its result to the vehicle's actuator, so vehicle, fog and
    cloud links are crossed twice. Loop B ends at cloud storage: every link is
    crossed once and there is no actuator leg.
    """
    two = 2 if loop is Loop.A else 1
    return {
        "vehicle": two,
        "fog": two if locus is Locus.NEIGHBOUR else 0,
        "cloud": (two if locus is Locus.CLOUD else 0) if loop is Loop.A else 1,
        "actuator": 1 if loop is Loop.A else 0,
    }


def assemble_latency(task: Task) -> LatencyRecord:
    if task.delivered_time is None:
        raise IncompleteTrace(f"task {task.task_id} has no terminal timestamp")
    legs = leg_counts(task.loop, task.locus)
    if task.locus is Locus.CLOUD:
        queue = 0
        process = 0
    else:
        if task.start_time is None or task.arrival_time is None:
            raise IncompleteTrace(f"task {task.task_id} lacks fog service timestamps")
        queue = task.start_time - task.arrival_time
        process = task.process_time
    parts = dict(
        sensor=task.sensor_latency,
        vehicle_transmission=legs["vehicle"] * task.vehicle_transmission,
        vehicle_propagation=legs["vehicle"] * task.vehicle_latency,
        fog_transmission=legs["fog"] * task.fog_transmission,
        fog_propagation=legs["fog"] * task.fog_latency,
        cloud_transmission=legs["cloud"] * task.cloud_transmission,
        cloud_propagation=legs["cloud"] * task.cloud_latency,
        queue=queue,
        process=process,
        cloud_process=task.cloud_process,
        actuator=legs["actuator"] * task.actuator_latency,
    )
    return LatencyRecord(
        task_id=task.task_id, task_type=task.spec.task_type.value, loop=task.loop,
        locus=task.locus, vehicle=task.origin_vehicle, primary=task.primary_node,
        executor=task.executor or "", emitted=task.emission_time,
        total=sum(parts.values()), **parts)


def throughput(completion_times: Iterable[float], window: float,
               horizon: float | None = None) -> list[int]:
    """Counts of completions per window.

    Window ``k`` covers ``(k*window, (k+1)*window]``; a completion at exactly
    0 falls in the first window. With ``horizon`` the number of windows is
    fixed at ``ceil(horizon / window)``.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    times = list(completion_times)
    if horizon is not None:
        n = max(1, math.ceil(horizon / window))
    else:
        n = max([max(0, math.ceil(t / window) - 1) for t in times], default=-1) + 1
    counts = [0] * n
    for t in times:
        k = max(0, math.ceil(t / window) - 1)
        if k < n:
            counts[k] += 1
    return counts


def _stats(values: Sequence[float]) -> dict:
    if not values:
        return {"count": 0, "mean": None, "p50": None, "p95": None, "max": None}
    arr = np.asarray(values, dtype=float)
    return {"count": int(arr.size), "mean": float(arr.mean()),
            "p50": float(np.percentile(arr, 50)), "p95": float(np.percentile(arr, 95)),
            "max": float(arr.max())}


@dataclass
class MetricsReport:
    scenario: str
    offloading_threshold: float | str
    dec_enabled: bool
    horizon_ms: float
    tasks_emitted: int = 0
    tasks_terminal: int = 0
    tasks_in_flight: int = 0
    mean_rtt_loop_A: float | None = None
    mean_rtt_loop_B: float | None = None
    mean_rtt_loop_A_all: float | None = None
    mean_rtt_loop_B_all: float | None = None
    latency: dict = field(default_factory=dict)
    executed_task_count: int = 0
    executed_per_node: dict = field(default_factory=dict)
    throughput_window_ms: float = 1000.0
    throughput: list = field(default_factory=list)
    energy_per_node: dict = field(default_factory=dict)
    fog_energy: float = 0.0
    cloud_energy: float = 0.0
    decisions: dict = field(default_factory=dict)
    decision_steps: dict = field(default_factory=dict)
    switch_counts: dict = field(default_factory=dict)
    invariant_violations: dict = field(default_factory=dict)
    events_dispatched: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)


def latency_summary(records: Sequence[LatencyRecord]) -> dict:
    """Fog-only and all-task latency statistics (ms) per control loop."""
    out = {}
    for loop in Loop:
        fog = [r.total_ms for r in records if r.loop is loop and r.locus is not Locus.CLOUD]
        every = [r.total_ms for r in records if r.loop is loop]
        out[loop.value] = {"fog": _stats(fog), "all": _stats(every)}
    return out


TASK_COLUMNS = ("task_id", "task_type", "loop", "locus", "vehicle", "primary", "executor",
                "emitted_ms") + LatencyRecord.COMPONENTS + ("total_ms",)


def _ms(ns: int) -> str:
    return f"{ns / 1e6:.6f}"


def write_tasks_csv(path, records: Iterable[LatencyRecord]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TASK_COLUMNS)
        for r in records:
            w.writerow([r.task_id, r.task_type, r.loop.value, r.locus.value, r.vehicle,
                        r.primary, r.executor, _ms(r.emitted)]
                       + [_ms(getattr(r, c)) for c in LatencyRecord.COMPONENTS]
                       + [_ms(r.total)])
