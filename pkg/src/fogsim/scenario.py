"""Scenario configuration: JSON schema, validation, and the bundled default.

Schema (version 1), all times in milliseconds::

    {
      "schema_version": 1,
      "name": str,
      "horizon_ms": float,
      "seed": int,
      "offloading_threshold": float > 0 | "infinite",
      "dec_enabled": bool,
      "latency_mode": "table" | "geometric",
      "controller": {"mode": "event" | "periodic", "interval_ms": float},
      "boot_delay_ms": float, "boot_energy_j": float,
      "cloud_cost_includes_processing": bool,
      "placement": "pinned" | "checked",
      "max_vehicles_per_node": int | null,
      "throughput_window_ms": float,
      "vehicle_uplink_bw": float,
      "presets": {name: {"mips", "ram", "uplink_bw", "downlink_bw",
                         "processing_units", "power_idle", "power_busy",
                         "rate_per_mips"}},
      "cloud_preset": name,
      "topology": {
        "propagation_speed": float,
        "link_latency_ms": {"fog_cloud", "fog_fog", "sensor_vehicle"[, "vehicle_fog"]},
        "cloud_position": [x, y] | null,
        "fog_nodes": [{"id", "x", "y", "coverage_radius", "preset"}],
        "vehicles": [{"id", "x", "y"[, "attached_node"][, "link_latency_ms"]}]
      },
      "workload": {
        "emission_interval_ms": float,
        "emitted_task_types": [task type, ...],
        "tasks": {task type: {"cpu_length", "network_length", "target_module"}},
        "modules": [{"id", "cpu_per_vehicle", "bw", "ram", "tier"}],
        "edges": [[from, to], ...]
      }
    }
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .dec import ControllerMode
from .node import CLOUD_PRESET, FOG_PRESET, NodePreset
from .topology import (DEFAULT_LINK_LATENCY, SPEED_OF_LIGHT, LatencyMode, LinkKind, NoCoverage,
                       Position, Topology, nearest_fog_node, distance)
from .workload import (DEFAULT_DAG, DEFAULT_TASKS, AppDag, AppModule, TaskSpec, TaskType, Tier,
                       Vehicle)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
INFINITE = "infinite"


class ScenarioError(Exception):
    """Invalid scenario content; the message names the offending field."""


@dataclass(frozen=True)
class FogNodeConfig:
    id: str
    x: float
    y: float
    coverage_radius: float
    preset: str = "fog"


@dataclass(frozen=True)
class VehicleConfig:
    id: int
    x: float
    y: float
    attached_node: str | None = None
    link_latency_ms: float | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    fog_nodes: tuple[FogNodeConfig, ...]
    vehicles: tuple[VehicleConfig, ...]
    horizon_ms: float = 10_000.0
    seed: int = 0
    offloading_threshold: float = math.inf
    dec_enabled: bool = False
    latency_mode: LatencyMode = LatencyMode.TABLE
    controller_mode: ControllerMode = ControllerMode.EVENT_DRIVEN
    controller_interval_ms: float = 10.0
    boot_delay_ms: float = 0.0
    boot_energy_j: float = 0.0
    cloud_cost_includes_processing: bool = True
    placement: str = "pinned"
    max_vehicles_per_node: int | None = 25
    throughput_window_ms: float = 1000.0
    vehicle_uplink_bw: float = 1000.0
    presets: dict = field(default_factory=lambda: {"fog": FOG_PRESET, "cloud": CLOUD_PRESET})
    cloud_preset: str = "cloud"
    propagation_speed: float = SPEED_OF_LIGHT
    link_latency_ms: dict = field(default_factory=lambda: dict(DEFAULT_LINK_LATENCY))
    cloud_position: Position | None = None
    emission_interval_ms: float = 3.0
    emitted_task_types: tuple[TaskType, ...] = (TaskType.PRIORITY, TaskType.SENSOR)
    tasks: dict = field(default_factory=lambda: dict(DEFAULT_TASKS))
    dag: AppDag = DEFAULT_DAG

    def __post_init__(self):
        validate(self)

    def with_overrides(self, **kw) -> "Scenario":
        return replace(self, **kw)

    @property
    def threshold_label(self) -> str:
        return INFINITE if math.isinf(self.offloading_threshold) else f"{self.offloading_threshold:g}"

    def topology(self) -> Topology:
        return Topology(
            fog_positions={n.id: Position(n.x, n.y) for n in self.fog_nodes},
            vehicle_positions={v.id: Position(v.x, v.y) for v in self.vehicles},
            fog_coverage_radius={n.id: n.coverage_radius for n in self.fog_nodes},
            link_latency_table=dict(self.link_latency_ms),
            vehicle_link_latency={v.id: v.link_latency_ms for v in self.vehicles
                                  if v.link_latency_ms is not None},
            propagation_speed=self.propagation_speed,
            latency_mode=self.latency_mode,
            cloud_position=self.cloud_position,
        )

    def build_vehicles(self, topo: Topology | None = None) -> list[Vehicle]:
        topo = topo or self.topology()
        specs = tuple(self.tasks[t] for t in self.emitted_task_types)
        out = []
        for v in self.vehicles:
            node = v.attached_node or nearest_fog_node(v.id, topo)
            out.append(Vehicle(v.id, node, self.emission_interval_ms, specs))
        return out


def _fail(where: str, msg: str):
    raise ScenarioError(f"{where}: {msg}")


def validate(s: Scenario):
    if not s.fog_nodes and s.vehicles:
        _fail("topology.fog_nodes", "vehicles need at least one fog node")
    ids = [n.id for n in s.fog_nodes]
    if len(set(ids)) != len(ids):
        _fail("topology.fog_nodes", "duplicate node ids")
    vids = [v.id for v in s.vehicles]
    if len(set(vids)) != len(vids):
        _fail("topology.vehicles", "duplicate vehicle ids")
    for n in s.fog_nodes:
        if n.preset not in s.presets:
            _fail(f"topology.fog_nodes[{n.id}].preset", f"unknown preset {n.preset!r}")
        if not n.coverage_radius > 0:
            _fail(f"topology.fog_nodes[{n.id}].coverage_radius", "must be positive")
    if s.cloud_preset not in s.presets:
        _fail("cloud_preset", f"unknown preset {s.cloud_preset!r}")
    t = s.offloading_threshold
    if not (math.isinf(t) and t > 0) and not (isinstance(t, (int, float)) and 0 < t < math.inf):
        _fail("offloading_threshold", f"must be positive or {INFINITE!r}, got {t!r}")
    if not s.horizon_ms >= 0:
        _fail("horizon_ms", "must be non-negative")
    if not s.emission_interval_ms > 0:
        _fail("workload.emission_interval_ms", "must be positive")
    if not s.throughput_window_ms > 0:
        _fail("throughput_window_ms", "must be positive")
    if not s.vehicle_uplink_bw > 0:
        _fail("vehicle_uplink_bw", "must be positive")
    if s.controller_mode is ControllerMode.PERIODIC and not s.controller_interval_ms > 0:
        _fail("controller.interval_ms", "must be positive in periodic mode")
    if s.boot_delay_ms < 0 or s.boot_energy_j < 0:
        _fail("boot_delay_ms/boot_energy_j", "must be non-negative")
    if s.placement not in ("pinned", "checked"):
        _fail("placement", f"must be 'pinned' or 'checked', got {s.placement!r}")
    if s.latency_mode is LatencyMode.TABLE:
        for kind in (LinkKind.FOG_CLOUD, LinkKind.FOG_FOG, LinkKind.SENSOR_VEHICLE):
            if kind not in s.link_latency_ms:
                _fail("topology.link_latency_ms", f"missing {kind.value!r}")
    elif s.cloud_position is None:
        _fail("topology.cloud_position", "required in geometric latency mode")
    for tt in s.emitted_task_types:
        if tt not in s.tasks:
            _fail("workload.emitted_task_types", f"no task definition for {tt.value!r}")
    module_ids = {m.module_id for m in s.dag.modules}
    for tt, spec in s.tasks.items():
        if spec.target_module not in module_ids:
            _fail(f"workload.tasks[{tt.value}].target_module", f"unknown module {spec.target_module!r}")
    node_ids = set(ids)
    for v in s.vehicles:
        if v.attached_node is not None and v.attached_node not in node_ids:
            _fail(f"topology.vehicles[{v.id}].attached_node", f"unknown node {v.attached_node!r}")
    try:
        topo = s.topology()
        for v in s.vehicles:
            if v.attached_node is None:
                nearest_fog_node(v.id, topo)
            else:
                n = next(n for n in s.fog_nodes if n.id == v.attached_node)
                if distance(Position(v.x, v.y), Position(n.x, n.y)) > n.coverage_radius:
                    raise NoCoverage(f"vehicle {v.id} is outside the coverage of {n.id}")
    except (NoCoverage, ValueError) as e:
        _fail("topology", str(e))


# --- JSON ----------------------------------------------------------------

def _check_keys(d: dict, allowed: set, where: str, strict: bool):
    if not isinstance(d, dict):
        _fail(where, f"expected an object, got {type(d).__name__}")
    extra = set(d) - allowed
    if extra:
        msg = f"unknown keys {sorted(extra)}"
        if strict:
            _fail(where, msg)
        logger.warning("%s: %s (ignored)", where, msg)


def _req(d: dict, key: str, where: str):
    if key not in d:
        _fail(where, f"missing required key {key!r}")
    return d[key]


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        _fail(where, f"expected a number, got {x!r}")
    return x


_PRESET_KEYS = {f.name for f in fields(NodePreset)}


def preset_to_dict(p: NodePreset) -> dict:
    return {f.name: getattr(p, f.name) for f in fields(NodePreset)}


def to_dict(s: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "horizon_ms": s.horizon_ms,
        "seed": s.seed,
        "offloading_threshold": INFINITE if math.isinf(s.offloading_threshold) else s.offloading_threshold,
        "dec_enabled": s.dec_enabled,
        "latency_mode": s.latency_mode.value,
        "controller": {"mode": s.controller_mode.value, "interval_ms": s.controller_interval_ms},
        "boot_delay_ms": s.boot_delay_ms,
        "boot_energy_j": s.boot_energy_j,
        "cloud_cost_includes_processing": s.cloud_cost_includes_processing,
        "placement": s.placement,
        "max_vehicles_per_node": s.max_vehicles_per_node,
        "throughput_window_ms": s.throughput_window_ms,
        "vehicle_uplink_bw": s.vehicle_uplink_bw,
        "presets": {k: preset_to_dict(p) for k, p in s.presets.items()},
        "cloud_preset": s.cloud_preset,
        "topology": {
            "propagation_speed": s.propagation_speed,
            "link_latency_ms": {LinkKind(k).value: v for k, v in s.link_latency_ms.items()},
            "cloud_position": None if s.cloud_position is None else [s.cloud_position.x, s.cloud_position.y],
            "fog_nodes": [{"id": n.id, "x": n.x, "y": n.y, "coverage_radius": n.coverage_radius,
                           "preset": n.preset} for n in s.fog_nodes],
            "vehicles": [_vehicle_to_dict(v) for v in s.vehicles],
        },
        "workload": {
            "emission_interval_ms": s.emission_interval_ms,
            "emitted_task_types": [t.value for t in s.emitted_task_types],
            "tasks": {t.value: {"cpu_length": spec.cpu_length, "network_length": spec.network_length,
                                "target_module": spec.target_module}
                      for t, spec in s.tasks.items()},
            "modules": [{"id": m.module_id, "cpu_per_vehicle": m.required_cpu_per_vehicle,
                         "bw": m.required_bw, "ram": m.required_ram, "tier": m.placement_tier.value}
                        for m in s.dag.modules],
            "edges": [list(e) for e in s.dag.edges],
        },
    }


def _vehicle_to_dict(v: VehicleConfig) -> dict:
    d = {"id": v.id, "x": v.x, "y": v.y}
    if v.attached_node is not None:
        d["attached_node"] = v.attached_node
    if v.link_latency_ms is not None:
        d["link_latency_ms"] = v.link_latency_ms
    return d


_TOP_KEYS = {"schema_version", "name", "horizon_ms", "seed", "offloading_threshold", "dec_enabled",
             "latency_mode", "controller", "boot_delay_ms", "boot_energy_j",
             "cloud_cost_includes_processing", "placement", "max_vehicles_per_node",
             "throughput_window_ms", "vehicle_uplink_bw", "presets", "cloud_preset", "topology", "workload"}


def parse_threshold(value) -> float:
    if isinstance(value, str):
        if value.lower() in (INFINITE, "inf", "infinity", "none"):
            return math.inf
        try:
            value = float(value)
        except ValueError:
            _fail("offloading_threshold", f"expected a number or {INFINITE!r}, got {value!r}")
    value = _num(value, "offloading_threshold")
    if not value > 0:
        _fail("offloading_threshold", f"must be positive, got {value}")
    return float(value)


def from_dict(d: dict, strict: bool = True) -> Scenario:
    _check_keys(d, _TOP_KEYS, "scenario", strict)
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {version!r}")
    kw: dict = {"name": str(_req(d, "name", "scenario"))}
    for key in ("horizon_ms", "boot_delay_ms", "boot_energy_j", "throughput_window_ms",
                "vehicle_uplink_bw"):
        if key in d:
            kw[key] = _num(d[key], key)
    if "seed" in d:
        kw["seed"] = int(_num(d["seed"], "seed"))
    if "offloading_threshold" in d:
        kw["offloading_threshold"] = parse_threshold(d["offloading_threshold"])
    for key in ("dec_enabled", "cloud_cost_includes_processing"):
        if key in d:
            if not isinstance(d[key], bool):
                _fail(key, f"expected a boolean, got {d[key]!r}")
            kw[key] = d[key]
    if "latency_mode" in d:
        try:
            kw["latency_mode"] = LatencyMode(d["latency_mode"])
        except ValueError:
            _fail("latency_mode", f"unknown mode {d['latency_mode']!r}")
    if "controller" in d:
        c = d["controller"]
        _check_keys(c, {"mode", "interval_ms"}, "controller", strict)
        if "mode" in c:
            try:
                kw["controller_mode"] = ControllerMode(c["mode"])
            except ValueError:
                _fail("controller.mode", f"unknown mode {c['mode']!r}")
        if "interval_ms" in c:
            kw["controller_interval_ms"] = _num(c["interval_ms"], "controller.interval_ms")
    if "placement" in d:
        kw["placement"] = d["placement"]
    if "max_vehicles_per_node" in d:
        mv = d["max_vehicles_per_node"]
        kw["max_vehicles_per_node"] = None if mv is None else int(_num(mv, "max_vehicles_per_node"))
    if "presets" in d:
        presets = {}
        for name, p in d["presets"].items():
            where = f"presets.{name}"
            _check_keys(p, _PRESET_KEYS, where, strict)
            try:
                presets[name] = NodePreset(**{k: p[k] for k in _PRESET_KEYS if k in p})
            except (TypeError, ValueError) as e:
                _fail(where, str(e))
        kw["presets"] = presets
    if "cloud_preset" in d:
        kw["cloud_preset"] = d["cloud_preset"]

    topo = _req(d, "topology", "scenario")
    _check_keys(topo, {"propagation_speed", "link_latency_ms", "cloud_position", "fog_nodes",
                       "vehicles"}, "topology", strict)
    if "propagation_speed" in topo:
        kw["propagation_speed"] = _num(topo["propagation_speed"], "topology.propagation_speed")
    if "link_latency_ms" in topo:
        table = {}
        for k, v in topo["link_latency_ms"].items():
            try:
                table[LinkKind(k)] = _num(v, f"topology.link_latency_ms.{k}")
            except ValueError:
                _fail("topology.link_latency_ms", f"unknown link kind {k!r}")
        kw["link_latency_ms"] = table
    cp = topo.get("cloud_position")
    if cp is not None:
        kw["cloud_position"] = Position(*cp)
    nodes = []
    for i, n in enumerate(_req(topo, "fog_nodes", "topology")):
        where = f"topology.fog_nodes[{i}]"
        _check_keys(n, {"id", "x", "y", "coverage_radius", "preset"}, where, strict)
        nodes.append(FogNodeConfig(str(_req(n, "id", where)), _num(_req(n, "x", where), where + ".x"),
                                   _num(_req(n, "y", where), where + ".y"),
                                   _num(_req(n, "coverage_radius", where), where + ".coverage_radius"),
                                   n.get("preset", "fog")))
    kw["fog_nodes"] = tuple(nodes)
    vehicles = []
    for i, v in enumerate(topo.get("vehicles", [])):
        where = f"topology.vehicles[{i}]"
        _check_keys(v, {"id", "x", "y", "attached_node", "link_latency_ms"}, where, strict)
        lat = v.get("link_latency_ms")
        vehicles.append(VehicleConfig(int(_num(_req(v, "id", where), where + ".id")),
                                      _num(_req(v, "x", where), where + ".x"),
                                      _num(_req(v, "y", where), where + ".y"),
                                      v.get("attached_node"),
                                      None if lat is None else _num(lat, where + ".link_latency_ms")))
    kw["vehicles"] = tuple(vehicles)

    if "workload" in d:
        w = d["workload"]
        _check_keys(w, {"emission_interval_ms", "emitted_task_types", "tasks", "modules", "edges"},
                    "workload", strict)
        if "emission_interval_ms" in w:
            kw["emission_interval_ms"] = _num(w["emission_interval_ms"], "workload.emission_interval_ms")
        try:
            if "emitted_task_types" in w:
                kw["emitted_task_types"] = tuple(TaskType(t) for t in w["emitted_task_types"])
            if "tasks" in w:
                tasks = {}
                for t, spec in w["tasks"].items():
                    _check_keys(spec, {"cpu_length", "network_length", "target_module"},
                                f"workload.tasks.{t}", strict)
                    tt = TaskType(t)
                    tasks[tt] = TaskSpec(tt, spec["cpu_length"], spec["network_length"],
                                         spec["target_module"])
                kw["tasks"] = tasks
            if "modules" in w or "edges" in w:
                modules = tuple(
                    AppModule(m["id"], m.get("cpu_per_vehicle", 0.0), m.get("bw", 0.0),
                              m.get("ram", 0.0), Tier(m.get("tier", "fog")))
                    for m in w.get("modules", [mod_to_dict(m) for m in DEFAULT_DAG.modules]))
                edges = tuple(tuple(e) for e in w.get("edges", []))
                kw["dag"] = AppDag(modules, edges)
        except (KeyError, ValueError, TypeError) as e:
            _fail("workload", f"{type(e).__name__}: {e}")
    return Scenario(**kw)


def mod_to_dict(m: AppModule) -> dict:
    return {"id": m.module_id, "cpu_per_vehicle": m.required_cpu_per_vehicle, "bw": m.required_bw,
            "ram": m.required_ram, "tier": m.placement_tier.value}


def loads(text: str, strict: bool = True, source: str = "<string>") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{source}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return from_dict(data, strict=strict)


def load_scenario(path, strict: bool = True) -> Scenario:
    path = Path(path)
    return loads(path.read_text(), strict=strict, source=str(path))


def save_scenario(s: Scenario, path):
    Path(path).write_text(json.dumps(to_dict(s), indent=2) + "\n")


def dumps(s: Scenario) -> str:
    return json.dumps(to_dict(s), indent=2) + "\n"


def load_paper_default() -> Scenario:
    text = resources.files("fogsim").joinpath("data/paper_default.json").read_text()
    return loads(text, source="paper_default.json")


def build_paper_default() -> Scenario:
    """Seven fog nodes in the overlapping layout; 25 vehicles each on FOG2 and FOG3.

    FOG1 neighbours FOG2 and FOG3; FOG3 neighbours FOG1, FOG4, FOG5; FOG2 also
    reaches FOG6 and FOG7, so every idle node neighbours a loaded one.
    """
    radius = 150.0
    coords = {
        "FOG1": (0.0, 0.0),
        "FOG2": (-120.0, 0.0),
        "FOG3": (120.0, 0.0),
        "FOG4": (220.0, 80.0),
        "FOG5": (220.0, -80.0),
        "FOG6": (-220.0, 80.0),
        "FOG7": (-220.0, -80.0),
    }
    nodes = tuple(FogNodeConfig(k, x, y, radius) for k, (x, y) in coords.items())
    vehicles = []
    for vid in range(50):
        home = "FOG2" if vid < 25 else "FOG3"
        hx, hy = coords[home]
        i = vid % 25
        # 5x5 grid of 10 m spacing around the roadside unit
        vehicles.append(VehicleConfig(vid, hx + (i % 5 - 2) * 10.0, hy + (i // 5 - 2) * 10.0))
    return Scenario(name="paper_default", fog_nodes=nodes, vehicles=tuple(vehicles))
