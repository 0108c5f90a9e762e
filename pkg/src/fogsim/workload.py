"""Application model, task definitions and per-vehicle emission."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

logger = logging.getLogger(__name__)


class TaskType(str, Enum):
    PRIORITY = "priority_request"
    SENSOR = "sensor_non_urgent"
    STATISTICAL = "statistical_traffic_data"


class Tier(str, Enum):
    FOG = "fog"
    CLOUD = "cloud"


class Locus(str, Enum):
    PRIMARY = "primary_fog"
    NEIGHBOUR = "neighbour_fog"
    CLOUD = "cloud"


class Loop(str, Enum):
    A = "A"
    B = "B"


PROCESS_PRIORITY = "process_priority_task"
ROAD_MONITOR = "road_monitor"
GLOBAL_ROAD_MONITOR = "global_road_monitor"


@dataclass(frozen=True)
class TaskSpec:
    task_type: TaskType
    cpu_length: float  # million instructions
    network_length: float
    target_module: str

    def __post_init__(self):
        if not self.cpu_length > 0:
            raise ValueError(f"cpu_length must be positive, got {self.cpu_length}")
        if not self.network_length > 0:
            raise ValueError(f"network_length must be positive, got {self.network_length}")

    @property
    def loop(self) -> Loop:
        return Loop.A if self.task_type is TaskType.PRIORITY else Loop.B


PRIORITY_REQUEST = TaskSpec(TaskType.PRIORITY, 1000.0, 1000.0, PROCESS_PRIORITY)
SENSOR_NON_URGENT = TaskSpec(TaskType.SENSOR, 900.0, 500.0, ROAD_MONITOR)
STATISTICAL_DATA = TaskSpec(TaskType.STATISTICAL, 300.0, 500.0, GLOBAL_ROAD_MONITOR)

DEFAULT_TASKS = {s.task_type: s for s in (PRIORITY_REQUEST, SENSOR_NON_URGENT, STATISTICAL_DATA)}


@dataclass(frozen=True)
class AppModule:
    module_id: str
    required_cpu_per_vehicle: float
    required_bw: float
    required_ram: float
    placement_tier: Tier = Tier.FOG

    def __post_init__(self):
        if min(self.required_cpu_per_vehicle, self.required_bw, self.required_ram) < 0:
            raise ValueError(f"module {self.module_id}: requirements must be non-negative")


@dataclass(frozen=True)
class AppDag:
    modules: tuple[AppModule, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        ids = [m.module_id for m in self.modules]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate module ids")
        for a, b in self.edges:
            if a not in ids or b not in ids:
                raise ValueError(f"edge ({a}, {b}) references an unknown module")
        self.topological_order()

    def module(self, module_id: str) -> AppModule:
        for m in self.modules:
            if m.module_id == module_id:
                return m
        raise KeyError(module_id)

    def topological_order(self) -> list[str]:
        """Kahn's algorithm; raises ``ValueError`` on a cycle."""
        indeg = {m.module_id: 0 for m in self.modules}
        for _, b in self.edges:
            indeg[b] += 1
        ready = [m for m, d in indeg.items() if d == 0]
        order = []
        while ready:
            m = ready.pop(0)
            order.append(m)
            for a, b in self.edges:
                if a == m:
                    indeg[b] -= 1
                    if indeg[b] == 0:
                        ready.append(b)
        if len(order) != len(indeg):
            raise ValueError("application graph contains a cycle")
        return order


# Road Monitor feeds Global Road Monitor; priority requests stand alone.
DEFAULT_DAG = AppDag(
    modules=(
        AppModule(PROCESS_PRIORITY, 333.33, 1000.0, 10_000.0, Tier.FOG),
        AppModule(ROAD_MONITOR, 300.0, 1000.0, 10_000.0, Tier.FOG),
        AppModule(GLOBAL_ROAD_MONITOR, 99.99, 1000.0, 10_000.0, Tier.CLOUD),
    ),
    edges=((ROAD_MONITOR, GLOBAL_ROAD_MONITOR),),
)


@dataclass(frozen=True)
class Vehicle:
    vehicle_id: int
    attached_node: str
    emission_interval: float = 3.0  # ms
    emitted_specs: tuple[TaskSpec, ...] = (PRIORITY_REQUEST, SENSOR_NON_URGENT)

    def __post_init__(self):
        if not self.emission_interval > 0:
            raise ValueError(f"vehicle {self.vehicle_id}: emission interval must be positive")


class Task:
    """Mutable record of one task's journey; owned by the simulation loop."""

    __slots__ = ("task_id", "spec", "origin_vehicle", "primary_node", "executor",
                 "emission_time", "arrival_time", "start_time", "end_time",
                 "delivered_time", "already_offloaded", "locus", "offload_count",
                 "vehicle_latency", "vehicle_transmission", "fog_latency",
                 "fog_transmission", "cloud_latency", "cloud_transmission",
                 "sensor_latency", "actuator_latency", "process_time",
                 "cloud_process", "primary_arrival", "predicted_wait")

    def __init__(self, task_id: int, spec: TaskSpec, origin_vehicle: int,
                 primary_node: str, emission_time: int):
        self.task_id = task_id
        self.spec = spec
        self.origin_vehicle = origin_vehicle
        self.primary_node = primary_node
        self.executor = None
        # times are integer nanoseconds
        self.emission_time = emission_time
        self.arrival_time = None
        self.start_time = None
        self.end_time = None
        self.delivered_time = None
        self.already_offloaded = False
        self.locus = Locus.PRIMARY
        self.offload_count = 0
        self.vehicle_latency = 0
        self.vehicle_transmission = 0
        self.fog_latency = 0
        self.fog_transmission = 0
        self.cloud_latency = 0
        self.cloud_transmission = 0
        self.sensor_latency = 0
        self.actuator_latency = 0
        self.process_time = 0
        self.cloud_process = 0
        self.primary_arrival = None
        self.predicted_wait = None

    def mark_offloaded(self, neighbour: str):
        if self.already_offloaded:
            raise RuntimeError(f"task {self.task_id} was already offloaded once")
        self.already_offloaded = True
        self.offload_count += 1
        self.locus = Locus.NEIGHBOUR
        self.executor = neighbour

    @property
    def loop(self) -> Loop:
        return self.spec.loop

    def __repr__(self):
        return (f"Task({self.task_id}, {self.spec.task_type.value}, v={self.origin_vehicle}, "
                f"locus={self.locus.value})")


def module_cpu_requirement(nv: int, rate: float, task_cpu: float) -> float:
    """CPU (MIPS) a module needs to serve ``nv`` vehicles emitting at ``rate`` per ms."""
    if nv < 0:
        raise ValueError("vehicle count must be non-negative")
    if not rate > 0:
        raise ValueError("rate must be positive")
    return nv * (rate * task_cpu)


@dataclass(frozen=True)
class NodeCapacity:
    cpu: float
    ram: float
    bw: float
    max_vehicles: int | None = None


@dataclass
class PlacementVerdict:
    feasible: bool
    violations: dict[str, float] = field(default_factory=dict)  # dimension -> excess


def module_demand(module: AppModule, nv: int, interval: float,
                  tasks: Iterable[TaskSpec] = DEFAULT_TASKS.values()) -> dict[str, float]:
    """CPU/RAM/BW a module needs on a node serving ``nv`` vehicles.

    CPU comes from the task the module processes when one is known, else from
    the module's per-vehicle figure.
    """
    cpu = nv * module.required_cpu_per_vehicle
    for spec in tasks:
        if spec.target_module == module.module_id:
            cpu = module_cpu_requirement(nv, 1.0 / interval, spec.cpu_length)
            break
    return {"cpu": cpu, "ram": module.required_ram, "bw": module.required_bw}


def check_placement(modules: Iterable[AppModule], capacity: NodeCapacity,
                    connected_vehicles: int = 0, interval: float = 3.0,
                    tasks: Iterable[TaskSpec] = DEFAULT_TASKS.values()) -> PlacementVerdict:
    """Check the summed demand of ``modules`` against one node's capacity.

    Also enforces the connected-vehicle cap when ``capacity.max_vehicles`` is set.
    """
    tasks = list(tasks)
    total = {"cpu": 0.0, "ram": 0.0, "bw": 0.0}
    for m in modules:
        d = module_demand(m, connected_vehicles, interval, tasks)
        for k in total:
            total[k] += d[k]
    violations = {}
    for k, used in total.items():
        excess = used - getattr(capacity, k)
        if excess > 1e-9:
            violations[k] = excess
    if capacity.max_vehicles is not None and connected_vehicles > capacity.max_vehicles:
        violations["vehicles"] = connected_vehicles - capacity.max_vehicles
    return PlacementVerdict(not violations, violations)


def place_modules(dag: AppDag, capacity: NodeCapacity, nv: int, interval: float,
                  tasks: Iterable[TaskSpec] = DEFAULT_TASKS.values(),
                  node_id: str = "?") -> tuple[set[str], set[str]]:
    """Greedy placement of fog-tier modules on one node, in graph order.

    Returns ``(on_fog, relocated)``; modules that do not fit go to the cloud.
    """
    tasks = list(tasks)
    kept: list[AppModule] = []
    relocated = set()
    for mid in dag.topological_order():
        module = dag.module(mid)
        if module.placement_tier is Tier.CLOUD:
            continue
        verdict = check_placement(kept + [module], capacity, nv, interval, tasks)
        if "vehicles" in verdict.violations:
            del verdict.violations["vehicles"]
            verdict.feasible = not verdict.violations
        if verdict.feasible:
            kept.append(module)
        else:
            relocated.add(mid)
            logger.warning("module %s does not fit on %s (%s); relocating to cloud",
                           mid, node_id, verdict.violations)
    return {m.module_id for m in kept}, relocated


def emission_schedule(v: Vehicle, horizon: float) -> list[tuple[float, TaskSpec]]:
    """All (time, spec) emissions of ``v`` in ``[0, horizon)``, in time order."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    out = []
    k = 0
    while k * v.emission_interval < horizon:
        t = k * v.emission_interval
        out.extend((t, spec) for spec in v.emitted_specs)
        k += 1
    return out
