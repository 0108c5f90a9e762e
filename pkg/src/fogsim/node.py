"""Fog-node runtime: FCFS waiting queue, single processor, wait estimator, power state."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .dec import EnergyLedger, PowerState
from .engine import ms_to_ns, ns_to_ms
from .workload import Task, TaskSpec


@dataclass(frozen=True)
class NodePreset:
    """Static hardware parameters of a fog node (or the cloud)."""

    mips: float = 15100.0
    ram: float = 40000.0
    uplink_bw: float = 1_000_000.0
    downlink_bw: float = 1_000_000.0
    processing_units: int = 1
    power_idle: float = 83.4333
    power_busy: float = 107.339
    rate_per_mips: float = 0.001

    def __post_init__(self):
        if not self.mips > 0:
            raise ValueError("mips capacity must be positive")
        if self.processing_units < 1:
            raise ValueError("a node needs at least one processing unit")


FOG_PRESET = NodePreset()
CLOUD_PRESET = NodePreset(mips=448000.0, power_idle=16 * 103, power_busy=16 * 83.25,
                          rate_per_mips=0.01)


def process_time_ns(cpu_length: float, mips: float, processing_units: int = 1) -> int:
    # MI / MIPS is seconds
    return int(round(cpu_length / (mips * processing_units) * 1e9))


class FogNode:
    __slots__ = ("node_id", "mips_capacity", "processing_units", "ram", "bw",
                 "power_idle", "power_busy", "offloading_threshold", "threshold_ns",
                 "queue", "queued_work", "inbound_count", "inbound_work",
                 "current", "service_end", "power_state", "pending_on", "ledger",
                 "boot_energy", "switch_count", "executed", "modules", "_ptime")

    def __init__(self, node_id: str, preset: NodePreset = FOG_PRESET,
                 offloading_threshold: float = math.inf,
                 power_state: PowerState = PowerState.ON,
                 boot_energy: float = 0.0, record_power: bool = False):
        self.node_id = node_id
        self.mips_capacity = preset.mips
        self.processing_units = preset.processing_units
        self.ram = preset.ram
        self.bw = preset.uplink_bw
        self.power_idle = preset.power_idle
        self.power_busy = preset.power_busy
        self.offloading_threshold = offloading_threshold  # ms
        self.threshold_ns = math.inf if math.isinf(offloading_threshold) else ms_to_ns(offloading_threshold)
        self.queue: deque[Task] = deque()
        self.queued_work = 0  # ns of expected service in the queue
        self.inbound_count = 0  # offloaded tasks in flight towards this node
        self.inbound_work = 0
        self.current: Task | None = None
        self.service_end = 0
        self.power_state = power_state
        self.pending_on = False
        lup = self.power_idle if power_state is PowerState.ON else 0.0
        self.ledger = EnergyLedger(lup, 0, record=record_power)
        self.boot_energy = boot_energy
        self.switch_count = 0
        self.executed = 0
        self.modules: frozenset[str] | None = None  # None: hosts every module
        self._ptime: dict[TaskSpec, int] = {}

    @property
    def busy(self) -> bool:
        return self.current is not None

    def process_ns(self, spec: TaskSpec) -> int:
        t = self._ptime.get(spec)
        if t is None:
            t = self._ptime[spec] = process_time_ns(spec.cpu_length, self.mips_capacity,
                                                     self.processing_units)
        return t

    def wait_ns(self, now: int) -> int:
        """Queued work plus the residual of the task in service."""
        w = self.queued_work
        if self.current is not None:
            w += self.service_end - now
        return w

    def committed_wait_ns(self, now: int) -> int:
        return self.wait_ns(now) + self.inbound_work

    def hosts(self, module_id: str) -> bool:
        return self.modules is None or module_id in self.modules

    def enqueue(self, task: Task) -> bool:
        """Append ``task``; True when the processor can start on the queue head now."""
        self.queue.append(task)
        self.queued_work += self.process_ns(task.spec)
        return self.can_start()

    def can_start(self) -> bool:
        return self.current is None and self.power_state is PowerState.ON and bool(self.queue)

    def start_next(self, now: int) -> Task:
        task = self.queue.popleft()
        d = self.process_ns(task.spec)
        self.queued_work -= d
        self.current = task
        self.service_end = now + d
        task.start_time = now
        task.process_time = d
        self.ledger.update(now, self.power_busy)
        return task

    def complete(self, now: int) -> Task:
        task = self.current
        self.current = None
        task.end_time = now
        self.executed += 1
        self.ledger.update(now, self.power_idle)
        return task

    def reserve(self, task: Task):
        self.inbound_count += 1
        self.inbound_work += self.process_ns(task.spec)

    def release(self, task: Task):
        self.inbound_count -= 1
        self.inbound_work -= self.process_ns(task.spec)

    def __repr__(self):
        return (f"FogNode({self.node_id}, {self.power_state.value}, queue={len(self.queue)}, "
                f"busy={self.busy})")


def expected_process_time(spec: TaskSpec, node: FogNode) -> float:
    """Expected service time (ms) of ``spec`` on ``node``."""
    return ns_to_ms(node.process_ns(spec))


def queue_waiting_time(node: FogNode, now: float = 0.0) -> float:
    """Estimated wait (ms) for a task joining ``node``'s queue at ``now`` (ms).

    Sums the expected service time of every queued task and adds whatever is
    left of the task in service.
    """
    return ns_to_ms(node.wait_ns(ms_to_ns(now)))


def threshold_exceeded(node: FogNode, now: float = 0.0) -> bool:
    return node.wait_ns(ms_to_ns(now)) > node.threshold_ns


def enqueue(task: Task, node: FogNode) -> bool:
    return node.enqueue(task)
