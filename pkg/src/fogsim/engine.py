"""Deterministic discrete-event core: clock, future event list, dispatch.

Times are integer nanoseconds. Events at the same instant are dispatched in
insertion order.
"""

from __future__ import annotations

import heapq
import math
from enum import Enum
from typing import Any, Callable, NamedTuple

NS_PER_MS = 1_000_000


def ms_to_ns(ms: float) -> int:
    return int(round(ms * NS_PER_MS))


def ns_to_ms(ns: int) -> float:
    return ns / NS_PER_MS


class PastEvent(Exception):
    """An event was scheduled before the current simulation time."""


class EventKind(str, Enum):
    TASK_EMITTED = "TaskEmitted"
    TASK_ARRIVED = "TaskArrivedAtNode"
    PROCESSING_STARTED = "ProcessingStarted"
    PROCESSING_COMPLETED = "ProcessingCompleted"
    RESULT_DELIVERED = "ResultDelivered"
    CONTROLLER_EVALUATE = "ControllerEvaluate"
    POWER_SIGNAL = "PowerSignal"
    CLOUD_ARRIVAL = "CloudArrival"
    CLOUD_COMPLETED = "CloudCompleted"


class Event(NamedTuple):
    time: int
    sequence: int
    kind: EventKind
    payload: Any = None


class Engine:
    """Future event list plus a dispatch loop over registered handlers."""

    def __init__(self):
        self.now = 0
        self._heap: list[Event] = []
        self._seq = 0
        self._handlers: dict[EventKind, Callable[[Event], None]] = {}
        self.dispatched = 0
        self.trace: list[Event] | None = None

    def __len__(self):
        return len(self._heap)

    def on(self, kind: EventKind, handler: Callable[[Event], None]):
        self._handlers[kind] = handler

    def schedule(self, time: int, kind: EventKind, payload: Any = None) -> Event:
        if time < self.now:
            raise PastEvent(f"cannot schedule {kind.value} at {time} ns; clock is at {self.now} ns")
        ev = Event(time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def schedule_event(self, e: Event) -> Event:
        """Schedule a prebuilt event; its sequence number is reassigned."""
        return self.schedule(e.time, e.kind, e.payload)

    def peek_time(self) -> int | None:
        return self._heap[0].time if self._heap else None

    def run(self, until: int | float = math.inf) -> int:
        """Dispatch events with ``time <= until`` in (time, sequence) order.

        Returns the number of events dispatched by this call. The clock is left
        at the last dispatched event's time.
        """
        heap = self._heap
        handlers = self._handlers
        trace = self.trace
        pop = heapq.heappop
        n = 0
        while heap and heap[0][0] <= until:
            ev = pop(heap)
            self.now = ev[0]
            if trace is not None:
                trace.append(ev)
            handler = handlers.get(ev[2])
            if handler is None:
                raise KeyError(f"no handler registered for {ev[2].value}")
            handler(ev)
            n += 1
        self.dispatched += n
        return n
