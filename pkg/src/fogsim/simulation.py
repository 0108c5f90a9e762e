"""Three-tier vehicular fog system driven by the event engine.

Vehicles emit tasks to their primary fog node; each arrival goes through the
offloading policy; the fog controller switches nodes ON and OFF when energy
control is enabled. Call :meth:`FogSimulation.run` to get a
:class:`~fogsim.metrics.MetricsReport`.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass

from .dec import (ControllerMode, ControllerState, EnergyLedger, PowerState, apply_power_signal,
                  controller_evaluate, evaluate_node)
from .dts import Action, CloudParams, OffloadDecision, Scheduler, transmission_ns
from .engine import Engine, EventKind, ms_to_ns, ns_to_ms
from .metrics import (LatencyRecord, MetricsReport, assemble_latency, latency_summary,
                      throughput, write_tasks_csv)
from .node import FogNode, process_time_ns
from .scenario import Scenario
from .topology import CLOUD_ID, LinkKind, id_key, link_latency
from .workload import DEFAULT_TASKS, Locus, Loop, Task, TaskType, place_modules, NodeCapacity

logger = logging.getLogger(__name__)


@dataclass
class Cloud:
    """Infinitely parallel cloud tier: no queueing, one energy ledger."""

    mips: float
    processing_units: int
    power_idle: float
    power_busy: float
    ledger: EnergyLedger
    active: int = 0

    def begin(self, now: int):
        if self.active == 0:
            self.ledger.update(now, self.power_busy)
        self.active += 1

    def end(self, now: int):
        self.active -= 1
        if self.active == 0:
            self.ledger.update(now, self.power_idle)


class FogSimulation:
    def __init__(self, scenario: Scenario, audit: bool = False, trace: bool = False,
                 record_power: bool = False):
        self.scenario = s = scenario
        self.topo = s.topology()
        self.engine = Engine()
        if trace:
            self.engine.trace = []
        self.audit = audit
        self.decisions: list[tuple[int, int, str, OffloadDecision]] = []
        self.horizon = ms_to_ns(s.horizon_ms)

        initial = PowerState.OFF if s.dec_enabled else PowerState.ON
        self.nodes: dict[str, FogNode] = {}
        for cfg in sorted(s.fog_nodes, key=lambda n: id_key(n.id)):
            self.nodes[cfg.id] = FogNode(cfg.id, s.presets[cfg.preset], s.offloading_threshold,
                                         initial, s.boot_energy_j, record_power)
        cp = s.presets[s.cloud_preset]
        self.cloud = Cloud(cp.mips, cp.processing_units, cp.power_idle, cp.power_busy,
                           EnergyLedger(cp.power_idle, 0, record=record_power))
        self.cloud_params = CloudParams(cp.mips, cp.processing_units, s.cloud_cost_includes_processing)
        self.scheduler = Scheduler(self.topo, self.nodes, self.cloud_params)

        self.vehicles = s.build_vehicles(self.topo)
        self._vehicle_by_id = {v.vehicle_id: v for v in self.vehicles}
        self.emission_interval = ms_to_ns(s.emission_interval_ms)
        self._vehicle_bw = s.vehicle_uplink_bw
        self._sensor = ms_to_ns(link_latency(LinkKind.SENSOR_VEHICLE, None, None, self.topo))
        self._vlat = {v.vehicle_id: ms_to_ns(link_latency(LinkKind.VEHICLE_FOG, v.vehicle_id,
                                                          v.attached_node, self.topo))
                      for v in self.vehicles}
        self._fog_link = {}
        self._cloud_link = {f: ms_to_ns(link_latency(LinkKind.FOG_CLOUD, f, CLOUD_ID, self.topo))
                            for f in self.nodes}
        self._stat_spec = s.tasks.get(TaskType.STATISTICAL, DEFAULT_TASKS[TaskType.STATISTICAL])
        self._stat_cloud_ns = process_time_ns(self._stat_spec.cpu_length, cp.mips, cp.processing_units)
        self._placement()

        self.controller = ControllerState(mode=s.controller_mode,
                                          interval_ms=s.controller_interval_ms)
        self.boot_delay = ms_to_ns(s.boot_delay_ms)
        for f, node in self.nodes.items():
            self.controller.report(f, node.power_state, 0, False)

        self.tasks: list[Task] = []
        self.records: list[LatencyRecord] = []
        self.fog_completions: list[int] = []
        self.decision_counts: Counter = Counter()
        self.step_counts: Counter = Counter()
        self.violations: Counter = Counter()
        self._starting: set[str] = set()
        self._off_pending: set[str] = set()
        self._ran = False

        e = self.engine
        e.on(EventKind.TASK_EMITTED, self._on_emit)
        e.on(EventKind.TASK_ARRIVED, self._on_arrival)
        e.on(EventKind.PROCESSING_STARTED, self._on_start)
        e.on(EventKind.PROCESSING_COMPLETED, self._on_complete)
        e.on(EventKind.RESULT_DELIVERED, self._on_delivered)
        e.on(EventKind.CLOUD_ARRIVAL, self._on_cloud_arrival)
        e.on(EventKind.CLOUD_COMPLETED, self._on_cloud_completed)
        e.on(EventKind.POWER_SIGNAL, self._on_power_signal)
        e.on(EventKind.CONTROLLER_EVALUATE, self._on_controller_tick)

    # --- setup -----------------------------------------------------------

    def _placement(self):
        s = self.scenario
        if s.placement == "pinned":
            return
        counts = Counter(v.attached_node for v in self.vehicles)
        tasks = [s.tasks[t] for t in s.tasks]
        for f, node in self.nodes.items():
            preset = s.presets[next(n.preset for n in s.fog_nodes if n.id == f)]
            cap = NodeCapacity(preset.mips, preset.ram, preset.uplink_bw, s.max_vehicles_per_node)
            on_fog, _ = place_modules(s.dag, cap, counts.get(f, 0), s.emission_interval_ms, tasks, f)
            node.modules = frozenset(on_fog)

    def _fog_hop(self, f: str, g: str) -> int:
        key = (f, g)
        hop = self._fog_link.get(key)
        if hop is None:
            hop = self._fog_link[key] = ms_to_ns(link_latency(LinkKind.FOG_FOG, f, g, self.topo))
        return hop

    # --- controller ------------------------------------------------------

    def _report(self, node: FogNode):
        """Node pushes its state to the controller; event-driven mode reacts at once."""
        qsize = len(node.queue) + node.inbound_count
        rep = self.controller.nodes[node.node_id]
        rep.power_state = node.power_state
        rep.queue_size = qsize
        rep.processing = node.current is not None
        if not self.scenario.dec_enabled or self.controller.mode is not ControllerMode.EVENT_DRIVEN:
            return
        sig = evaluate_node(rep)
        if sig is not None:
            self._send_signal(node, sig)

    def _send_signal(self, node: FogNode, sig: PowerState):
        if sig is PowerState.ON:
            if node.pending_on:
                return
            node.pending_on = True
            self.engine.schedule(self.engine.now + self.boot_delay, EventKind.POWER_SIGNAL,
                                 (node.node_id, sig))
        else:
            if node.node_id in self._off_pending:
                return
            if node.current is not None or node.queue or node.inbound_count:
                self.violations["dec_off_while_loaded"] += 1
            self._off_pending.add(node.node_id)
            self.engine.schedule(self.engine.now, EventKind.POWER_SIGNAL, (node.node_id, sig))

    def _on_power_signal(self, ev):
        node_id, sig = ev.payload
        node = self.nodes[node_id]
        if sig is PowerState.OFF:
            self._off_pending.discard(node_id)
        changed = apply_power_signal(node, sig, ev.time)
        if changed:
            rep = self.controller.nodes[node_id]
            rep.power_state = node.power_state
            if sig is PowerState.ON and node.can_start():
                self._schedule_start(node)

    def _on_controller_tick(self, ev):
        for node_id, sig in controller_evaluate(self.controller):
            self._send_signal(self.nodes[node_id], sig)
        nxt = ev.time + ms_to_ns(self.controller.interval_ms)
        if nxt <= self.horizon:
            self.engine.schedule(nxt, EventKind.CONTROLLER_EVALUATE)

    # --- task flow ---------------------------------------------------------

    def _on_emit(self, ev):
        v = self._vehicle_by_id[ev.payload]
        now = ev.time
        up = self._sensor + self._vlat[v.vehicle_id]
        for spec in v.emitted_specs:
            task = Task(len(self.tasks), spec, v.vehicle_id, v.attached_node, now)
            task.sensor_latency = self._sensor
            task.vehicle_latency = self._vlat[v.vehicle_id]
            task.vehicle_transmission = transmission_ns(spec.network_length, self._vehicle_bw)
            task.actuator_latency = self._sensor
            self.tasks.append(task)
            self.engine.schedule(now + up + task.vehicle_transmission, EventKind.TASK_ARRIVED,
                                 (task, v.attached_node))
        nxt = now + self.emission_interval
        if nxt < self.horizon:
            self.engine.schedule(nxt, EventKind.TASK_EMITTED, v.vehicle_id)

    def _on_arrival(self, ev):
        task, f = ev.payload
        now = ev.time
        node = self.nodes[f]
        if task.already_offloaded:
            node.release(task)
        else:
            task.primary_arrival = now
        task.arrival_time = now
        if not node.hosts(task.spec.target_module):
            decision = OffloadDecision(Action.CLOUD, CLOUD_ID, 0, node.committed_wait_ns(now))
        else:
            decision = self.scheduler.decide(task, f, now)
        self.decision_counts[decision.action.value] += 1
        self.step_counts[decision.step] += 1
        if self.audit:
            self.decisions.append((now, task.task_id, f, decision))
        action = decision.action
        if action is Action.LOCAL:
            task.executor = f
            task.predicted_wait = node.wait_ns(now)
            if node.enqueue(task):
                self._schedule_start(node)
            self._report(node)
        elif action is Action.NEIGHBOUR:
            g = decision.target
            if task.already_offloaded:
                self.violations["offload_twice"] += 1
            task.mark_offloaded(g)
            hop_t = transmission_ns(task.spec.network_length, node.bw)
            hop = self._fog_hop(f, g)
            task.fog_transmission = hop_t
            task.fog_latency = hop
            target = self.nodes[g]
            target.reserve(task)
            self._report(target)
            self.engine.schedule(now + hop_t + hop, EventKind.TASK_ARRIVED, (task, g))
        else:
            task.locus = Locus.CLOUD
            task.executor = CLOUD_ID
            task.cloud_transmission = transmission_ns(task.spec.network_length, node.bw)
            task.cloud_latency = self._cloud_link[f]
            self.engine.schedule(now + task.cloud_transmission + task.cloud_latency,
                                 EventKind.CLOUD_ARRIVAL, task)

    def _schedule_start(self, node: FogNode):
        if node.node_id in self._starting:
            return
        self._starting.add(node.node_id)
        self.engine.schedule(self.engine.now, EventKind.PROCESSING_STARTED, node.node_id)

    def _on_start(self, ev):
        f = ev.payload
        self._starting.discard(f)
        node = self.nodes[f]
        if not node.can_start():
            return
        node.start_next(ev.time)
        self.engine.schedule(node.service_end, EventKind.PROCESSING_COMPLETED, f)
        self._report(node)

    def _on_complete(self, ev):
        f = ev.payload
        node = self.nodes[f]
        task = node.complete(ev.time)
        now = ev.time
        if now <= self.horizon:
            self.fog_completions.append(now)
        if task.loop is Loop.A:
            back = task.fog_transmission + task.fog_latency if task.locus is Locus.NEIGHBOUR else 0
            back += task.vehicle_transmission + task.vehicle_latency + task.actuator_latency
            self.engine.schedule(now + back, EventKind.RESULT_DELIVERED, task)
        else:
            # processed sensor data goes to the cloud as statistical traffic data
            task.cloud_transmission = transmission_ns(self._stat_spec.network_length, node.bw)
            task.cloud_latency = self._cloud_link[f]
            self.engine.schedule(now + task.cloud_transmission + task.cloud_latency,
                                 EventKind.CLOUD_ARRIVAL, task)
        if node.queue:
            self._schedule_start(node)
        self._report(node)

    def _on_cloud_arrival(self, ev):
        task = ev.payload
        now = ev.time
        if task.locus is Locus.CLOUD:
            d = process_time_ns(task.spec.cpu_length, self.cloud.mips, self.cloud.processing_units)
            if task.loop is Loop.B:
                d += self._stat_cloud_ns
        else:
            d = self._stat_cloud_ns
        task.cloud_process = d
        self.cloud.begin(now)
        self.engine.schedule(now + d, EventKind.CLOUD_COMPLETED, task)

    def _on_cloud_completed(self, ev):
        task = ev.payload
        now = ev.time
        self.cloud.end(now)
        if task.loop is Loop.A:
            back = (task.cloud_transmission + task.cloud_latency + task.vehicle_transmission
                    + task.vehicle_latency + task.actuator_latency)
            self.engine.schedule(now + back, EventKind.RESULT_DELIVERED, task)
        else:
            self._finish(task, now)

    def _on_delivered(self, ev):
        self._finish(ev.payload, ev.time)

    def _finish(self, task: Task, now: int):
        task.delivered_time = now
        rec = assemble_latency(task)
        if rec.total != now - task.emission_time:
            self.violations["latency_additivity"] += 1
        self.records.append(rec)

    # --- run ---------------------------------------------------------------

    def run(self, until: float | None = None) -> MetricsReport:
        """Simulate up to ``until`` ms (default: the scenario horizon).

        Emissions stop at the scenario horizon. Passing ``until=math.inf``
        drains every in-flight task before returning.
        """
        if self._ran:
            raise RuntimeError("a FogSimulation instance runs once")
        self._ran = True
        stop = self.horizon if until is None else (math.inf if math.isinf(until) else ms_to_ns(until))
        e = self.engine
        if self.horizon > 0:
            for v in sorted(self.vehicles, key=lambda v: v.vehicle_id):
                e.schedule(0, EventKind.TASK_EMITTED, v.vehicle_id)
        if self.scenario.dec_enabled and self.controller.mode is ControllerMode.PERIODIC:
            e.schedule(0, EventKind.CONTROLLER_EVALUATE)
        e.run(stop)
        end = max(e.now, self.horizon) if math.isinf(stop) else stop
        self.end_time = end
        for node in self.nodes.values():
            node.ledger.update(end, node.ledger.last_utilization_power)
        self.cloud.ledger.update(end, self.cloud.ledger.last_utilization_power)
        return self.report()

    def report(self) -> MetricsReport:
        s = self.scenario
        summary = latency_summary(self.records)
        offloaded_twice = sum(1 for t in self.tasks if t.offload_count > 1)
        self.violations["offload_twice"] = max(self.violations["offload_twice"], offloaded_twice)
        executed = {f: n.executed for f, n in self.nodes.items()}
        rep = MetricsReport(
            scenario=s.name,
            offloading_threshold=s.threshold_label,
            dec_enabled=s.dec_enabled,
            horizon_ms=s.horizon_ms,
            tasks_emitted=len(self.tasks),
            tasks_terminal=len(self.records),
            tasks_in_flight=len(self.tasks) - len(self.records),
            mean_rtt_loop_A=summary["A"]["fog"]["mean"],
            mean_rtt_loop_B=summary["B"]["fog"]["mean"],
            mean_rtt_loop_A_all=summary["A"]["all"]["mean"],
            mean_rtt_loop_B_all=summary["B"]["all"]["mean"],
            latency=summary,
            executed_task_count=len(self.fog_completions),
            executed_per_node=executed,
            throughput_window_ms=s.throughput_window_ms,
            throughput=throughput([ns_to_ms(t) for t in self.fog_completions],
                                  s.throughput_window_ms, ns_to_ms(self.end_time)),
            energy_per_node={f: n.ledger.total_energy for f, n in self.nodes.items()},
            fog_energy=sum(n.ledger.total_energy for n in self.nodes.values()),
            cloud_energy=self.cloud.ledger.total_energy,
            decisions=dict(sorted(self.decision_counts.items())),
            decision_steps={str(k): v for k, v in sorted(self.step_counts.items())},
            switch_counts={f: n.switch_count for f, n in self.nodes.items()},
            invariant_violations={k: v for k, v in sorted(self.violations.items())},
            events_dispatched=self.engine.dispatched,
        )
        return rep

    # --- outputs -------------------------------------------------------------

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("time_ms", "sequence", "kind", "payload"))
            for ev in self.engine.trace or ():
                w.writerow((f"{ev.time / 1e6:.6f}", ev.sequence, ev.kind.value, _payload(ev.payload)))

    def write_decisions(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("task_id", "time_ms", "node", "action", "target", "step",
                        "primary_wait_ms", "candidate_costs_ms", "cloud_cost_ms"))
            for now, tid, f, d in self.decisions:
                costs = ";".join(f"{g}:{c / 1e6:.6f}" for g, c in d.candidate_costs)
                w.writerow((tid, f"{now / 1e6:.6f}", f, d.action.value, d.target or "", d.step,
                            f"{d.primary_wait / 1e6:.6f}", costs,
                            "" if d.cloud_cost is None else f"{d.cloud_cost / 1e6:.6f}"))

    def write_power(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("node", "time_ms", "old_state", "new_state", "lup_w"))
            units = [(f, n.ledger, n.power_idle, n.power_busy) for f, n in self.nodes.items()]
            units.append((CLOUD_ID, self.cloud.ledger, self.cloud.power_idle, self.cloud.power_busy))
            for f, ledger, idle, busy in units:
                prev = ""
                for t, p in ledger.transitions or ():
                    state = "OFF" if p == 0 else ("BUSY" if p == busy else "IDLE")
                    w.writerow((f, f"{t / 1e6:.6f}", prev, state, p))
                    prev = state

    def write_tasks(self, path):
        write_tasks_csv(path, self.records)


def _payload(p) -> str:
    if isinstance(p, tuple):
        return "|".join(_payload(x) for x in p)
    if isinstance(p, Task):
        return f"task{p.task_id}"
    if isinstance(p, PowerState):
        return p.value
    return "" if p is None else str(p)


def simulate(scenario: Scenario, until: float | None = None, **kw) -> MetricsReport:
    return FogSimulation(scenario, **kw).run(until)
