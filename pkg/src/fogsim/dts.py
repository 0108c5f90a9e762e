"""Dynamic task scheduling: local queueing, one-shot neighbour offload, cloud fallback."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .engine import ms_to_ns
from .node import FogNode, process_time_ns
from .topology import CLOUD_ID, LinkKind, Topology, id_key, link_latency, neighbours
from .workload import Task, TaskSpec


class Action(str, Enum):
    LOCAL = "ProcessLocally"
    NEIGHBOUR = "OffloadToNeighbour"
    CLOUD = "SendToCloud"


@dataclass
class OffloadDecision:
    action: Action
    target: str | None = None
    step: int = 0  # flowchart branch that fired
    primary_wait: int = 0  # ns
    candidate_costs: tuple[tuple[str, int], ...] = ()
    cloud_cost: int | None = None

    def __post_init__(self):
        if self.action is Action.NEIGHBOUR and self.target is None:
            raise ValueError("neighbour offload needs a target")


def transmission_ns(network_length: float, bandwidth: float) -> int:
    # network length over bandwidth reads directly as milliseconds
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    return ms_to_ns(network_length / bandwidth)


@dataclass(frozen=True)
class CloudParams:
    mips: float = 448000.0
    processing_units: int = 1
    include_processing: bool = True


class Scheduler:
    """Per-arrival offloading policy with link costs precomputed from the topology."""

    def __init__(self, topo: Topology, nodes: Mapping[str, FogNode],
                 cloud: CloudParams = CloudParams()):
        self.topo = topo
        self.nodes = nodes
        self.cloud = cloud
        self.neighbour_links: dict[str, list[tuple[str, int]]] = {}
        self.cloud_latency: dict[str, int] = {}
        for f in nodes:
            nbrs = sorted(neighbours(f, topo), key=id_key)
            self.neighbour_links[f] = [
                (g, ms_to_ns(link_latency(LinkKind.FOG_FOG, f, g, topo))) for g in nbrs if g in nodes]
            self.cloud_latency[f] = ms_to_ns(link_latency(LinkKind.FOG_CLOUD, f, CLOUD_ID, topo))
        self._cloud_cost: dict[tuple[str, TaskSpec], int] = {}

    def neighbour_costs(self, f: str, now: int, module: str | None = None) -> list[tuple[str, int]]:
        out = []
        for g, pd in self.neighbour_links[f]:
            node = self.nodes[g]
            if module is not None and not node.hosts(module):
                continue
            out.append((g, node.committed_wait_ns(now) + pd))
        return out

    def best_neighbour(self, f: str, now: int, module: str | None = None):
        """``(node_id, costs)`` minimising wait plus link delay; lowest id wins ties."""
        costs = self.neighbour_costs(f, now, module)
        best = None
        for g, c in costs:  # already in id order, so strict < keeps the lowest id
            if best is None or c < best[1]:
                best = (g, c)
        return (best[0] if best else None), costs

    def cloud_cost(self, f: str, spec: TaskSpec) -> int:
        """Round trip to the cloud: two link latencies, two transmissions, processing."""
        key = (f, spec)
        c = self._cloud_cost.get(key)
        if c is None:
            c = 2 * (self.cloud_latency[f] + transmission_ns(spec.network_length, self.nodes[f].bw))
            if self.cloud.include_processing:
                c += process_time_ns(spec.cpu_length, self.cloud.mips, self.cloud.processing_units)
            self._cloud_cost[key] = c
        return c

    def decide(self, task: Task, f: str, now: int) -> OffloadDecision:
        node = self.nodes[f]
        if node.current is None and not node.queue:
            return OffloadDecision(Action.LOCAL, f, 1)
        wait = node.committed_wait_ns(now)
        if wait <= node.threshold_ns:
            return OffloadDecision(Action.LOCAL, f, 2, wait)
        if task.already_offloaded:
            return OffloadDecision(Action.LOCAL, f, 3, wait)
        best, costs = self.best_neighbour(f, now, task.spec.target_module)
        if best is not None:
            g = self.nodes[best]
            if g.committed_wait_ns(now) <= g.threshold_ns:
                return OffloadDecision(Action.NEIGHBOUR, best, 4, wait, tuple(costs))
        cloud = self.cloud_cost(f, task.spec)
        if wait > cloud:
            return OffloadDecision(Action.CLOUD, CLOUD_ID, 5, wait, tuple(costs), cloud)
        return OffloadDecision(Action.LOCAL, f, 5, wait, tuple(costs), cloud)


def select_best_neighbour(f: str, topo: Topology, nodes: Mapping[str, FogNode],
                          now: float = 0.0) -> str | None:
    """Neighbour of ``f`` with the least queue wait plus fog-to-fog delay, or None."""
    best, _ = Scheduler(topo, nodes).best_neighbour(f, ms_to_ns(now))
    return best


def decide(task: Task, primary: str, topo: Topology, nodes: Mapping[str, FogNode],
           cloud: CloudParams = CloudParams(), now: float = 0.0) -> OffloadDecision:
    return Scheduler(topo, nodes, cloud).decide(task, primary, ms_to_ns(now))

