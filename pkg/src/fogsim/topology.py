"""Static network model: positions, coverage, neighbour sets and link latencies."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

SPEED_OF_LIGHT = 3.0e8  # m/s

CLOUD_ID = "cloud"


class NoCoverage(Exception):
    """Raised when no fog node covers a vehicle."""


class LatencyMode(str, Enum):
    TABLE = "table"
    GEOMETRIC = "geometric"


class LinkKind(str, Enum):
    VEHICLE_FOG = "vehicle_fog"
    FOG_FOG = "fog_fog"
    FOG_CLOUD = "fog_cloud"
    SENSOR_VEHICLE = "sensor_vehicle"


# Link latencies (ms) between entity classes.
DEFAULT_LINK_LATENCY = {
    LinkKind.FOG_CLOUD: 100.0,
    LinkKind.FOG_FOG: 2.0,
    LinkKind.SENSOR_VEHICLE: 1.0,
}


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates: ({self.x}, {self.y})")


def id_key(node_id: str):
    """Natural sort key so that ``FOG2 < FOG10``."""
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", str(node_id))]


def distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def propagation_delay(d: float, ps: float = SPEED_OF_LIGHT) -> float:
    """Signal propagation delay in milliseconds over ``d`` metres at speed ``ps`` (m/s)."""
    if ps <= 0:
        raise ValueError(f"propagation speed must be positive, got {ps}")
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    return d / ps * 1000.0


def default_vehicle_latency(vehicle_id: int) -> float:
    # spread over [1, 5] ms
    return 1.0 + (int(vehicle_id) % 5)


@dataclass(frozen=True)
class Topology:
    fog_positions: Mapping[str, Position]
    vehicle_positions: Mapping[int, Position]
    fog_coverage_radius: Mapping[str, float]
    link_latency_table: Mapping[LinkKind, float] = field(
        default_factory=lambda: dict(DEFAULT_LINK_LATENCY))
    vehicle_link_latency: Mapping[int, float] = field(default_factory=dict)
    propagation_speed: float = SPEED_OF_LIGHT
    latency_mode: LatencyMode = LatencyMode.TABLE
    cloud_position: Position | None = None

    def __post_init__(self):
        for f, r in self.fog_coverage_radius.items():
            if not r > 0:
                raise ValueError(f"coverage radius of {f} must be positive, got {r}")
        missing = set(self.fog_positions) - set(self.fog_coverage_radius)
        if missing:
            raise ValueError(f"no coverage radius for {sorted(missing, key=id_key)}")
        if self.propagation_speed <= 0:
            raise ValueError("propagation speed must be positive")
        if self.latency_mode is LatencyMode.TABLE:
            needed = {LinkKind.FOG_CLOUD, LinkKind.FOG_FOG, LinkKind.SENSOR_VEHICLE}
            absent = needed - set(self.link_latency_table)
            if absent:
                raise ValueError(f"link latency table lacks {sorted(k.value for k in absent)}")
        # neighbour sets never change after load
        object.__setattr__(self, "_neighbours", {
            f: self._compute_neighbours(f) for f in self.fog_positions})

    @property
    def fog_ids(self) -> list[str]:
        return sorted(self.fog_positions, key=id_key)

    def _compute_neighbours(self, f: str) -> frozenset[str]:
        here = self.fog_positions[f]
        radius = self.fog_coverage_radius[f]
        return frozenset(g for g, pos in self.fog_positions.items()
                         if g != f and distance(here, pos) <= radius)

    def vehicle_latency(self, vehicle_id: int) -> float:
        if vehicle_id in self.vehicle_link_latency:
            return self.vehicle_link_latency[vehicle_id]
        if LinkKind.VEHICLE_FOG in self.link_latency_table:
            return self.link_latency_table[LinkKind.VEHICLE_FOG]
        return default_vehicle_latency(vehicle_id)


def nearest_fog_node(vehicle_id: int, topo: Topology) -> str:
    """Nearest fog node whose coverage radius contains the vehicle.

    Ties go to the lowest node id. Raises :class:`NoCoverage` if the vehicle is
    outside every node's radius.
    """
    pos = topo.vehicle_positions[vehicle_id]
    best = None
    for f in topo.fog_ids:
        d = distance(pos, topo.fog_positions[f])
        if d <= topo.fog_coverage_radius[f] and (best is None or d < best[0]):
            best = (d, f)
    if best is None:
        raise NoCoverage(f"vehicle {vehicle_id} at ({pos.x}, {pos.y}) is not covered by any fog node")
    return best[1]


def neighbours(f: str, topo: Topology) -> frozenset[str]:
    return topo._neighbours[f]


def _position_of(endpoint, topo: Topology) -> Position:
    if endpoint == CLOUD_ID:
        if topo.cloud_position is None:
            raise ValueError("geometric latency to the cloud needs a cloud position")
        return topo.cloud_position
    if endpoint in topo.fog_positions:
        return topo.fog_positions[endpoint]
    if endpoint in topo.vehicle_positions:
        return topo.vehicle_positions[endpoint]
    raise KeyError(f"unknown endpoint {endpoint!r}")


def link_latency(kind: LinkKind | str, a, b, topo: Topology) -> float:
    """One-way latency (ms) of a link of ``kind`` between endpoints ``a`` and ``b``.

    For vehicle links pass the vehicle id as ``a``. Sensors and actuators sit on
    their vehicle, so in geometric mode that hop has zero length.
    """
    try:
        kind = LinkKind(kind)
    except ValueError:
        raise ValueError(f"unknown link kind {kind!r}") from None
    if topo.latency_mode is LatencyMode.TABLE:
        if kind is LinkKind.VEHICLE_FOG:
            return topo.vehicle_latency(a)
        return topo.link_latency_table[kind]
    if kind is LinkKind.SENSOR_VEHICLE:
        return 0.0
    d = distance(_position_of(a, topo), _position_of(b, topo))
    return propagation_delay(d, topo.propagation_speed)
