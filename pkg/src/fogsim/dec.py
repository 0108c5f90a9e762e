"""Dynamic energy control: fog-controller ON/OFF signalling and energy ledgers."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .engine import ms_to_ns


class TimeRegression(Exception):
    """Energy update requested for a time before the last update."""


class PowerState(str, Enum):
    ON = "ON"
    OFF = "OFF"


class ControllerMode(str, Enum):
    EVENT_DRIVEN = "event"
    PERIODIC = "periodic"


class EnergyLedger:
    """Running energy total under piecewise-constant power.

    ``last_update_time`` is in nanoseconds, powers in watts, energy in joules.
    """

    __slots__ = ("total_energy", "last_update_time", "last_utilization_power",
                 "previous_total", "transitions")

    def __init__(self, power: float = 0.0, start: int = 0, record: bool = False):
        self.total_energy = 0.0
        self.previous_total = 0.0
        self.last_update_time = start
        self.last_utilization_power = power
        self.transitions: list[tuple[int, float]] | None = [(start, power)] if record else None

    def update(self, now: int, new_power: float) -> "EnergyLedger":
        if now < self.last_update_time:
            raise TimeRegression(f"energy update at {now} ns precedes last update "
                                 f"{self.last_update_time} ns")
        self.total_energy = (self.previous_total
                             + (now - self.last_update_time) * self.last_utilization_power * 1e-9)
        self.previous_total = self.total_energy
        self.last_update_time = now
        if new_power != self.last_utilization_power and self.transitions is not None:
            self.transitions.append((now, new_power))
        self.last_utilization_power = new_power
        return self


def update_energy(ledger: EnergyLedger, now: float, new_power: float) -> EnergyLedger:
    """Close the current power interval at ``now`` (ms) and switch to ``new_power``."""
    return ledger.update(ms_to_ns(now), new_power)


@dataclass
class NodeReport:
    power_state: PowerState
    queue_size: int  # queued plus in-flight tasks bound for the node
    processing: bool


@dataclass
class ControllerState:
    nodes: dict[str, NodeReport] = field(default_factory=dict)
    mode: ControllerMode = ControllerMode.EVENT_DRIVEN
    interval_ms: float = 1.0

    def report(self, node_id: str, power_state: PowerState, queue_size: int, processing: bool):
        self.nodes[node_id] = NodeReport(power_state, queue_size, processing)


def evaluate_node(report: NodeReport) -> PowerState | None:
    if report.power_state is PowerState.OFF:
        if report.queue_size != 0:
            return PowerState.ON
        return None
    if not report.processing and report.queue_size == 0:
        return PowerState.OFF
    return None


def controller_evaluate(state: ControllerState,
                        only: Iterable[str] | None = None) -> list[tuple[str, PowerState]]:
    """Power signals for the reported nodes (or the subset ``only``).

    An OFF node with waiting work is switched ON; an ON node that is neither
    processing nor holding work is switched OFF.
    """
    ids = state.nodes if only is None else only
    signals = []
    for node_id in ids:
        sig = evaluate_node(state.nodes[node_id])
        if sig is not None:
            signals.append((node_id, sig))
    return signals


def apply_power_signal(node, signal: PowerState, now: int) -> bool:
    """Apply ``signal`` to ``node`` at ``now`` (ns). Returns True if the state changed.

    OFF is ignored unless the node is idle with no queued or inbound work. The
    caller starts service on a freshly switched-ON node with a non-empty queue.
    """
    if signal is PowerState.ON:
        node.pending_on = False
        if node.power_state is PowerState.ON:
            return False
        node.power_state = PowerState.ON
        node.ledger.update(now, node.power_idle)
        node.ledger.total_energy += node.boot_energy
        node.ledger.previous_total = node.ledger.total_energy
        node.switch_count += 1
        return True
    if node.power_state is PowerState.OFF:
        return False
    if node.busy or node.queue or node.inbound_count:
        return False
    node.power_state = PowerState.OFF
    node.ledger.update(now, 0.0)
    node.switch_count += 1
    return True


def energy_saving(without_dec: float, with_dec: float) -> float:
    """Relative saving (E_noDEC - E_DEC) / E_noDEC."""
    if without_dec <= 0:
        return 0.0
    return (without_dec - with_dec) / without_dec


def fog_energy(ledgers: Mapping[str, EnergyLedger]) -> float:
    return sum(l.total_energy for l in ledgers.values())

