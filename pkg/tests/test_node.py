import random

import pytest
from hypothesis import given, strategies as st

from fogsim.dec import PowerState
from fogsim.engine import ms_to_ns
from fogsim.node import (CLOUD_PRESET, FogNode, NodePreset, enqueue, expected_process_time,
                         queue_waiting_time, threshold_exceeded)
from fogsim.workload import PRIORITY_REQUEST, SENSOR_NON_URGENT, Task, TaskSpec, TaskType
from oracles import isclose_ms, naive_wait_oracle

_ids = iter(range(10**9))


def task(spec=PRIORITY_REQUEST):
    return Task(next(_ids), spec, 0, "A", 0)


@pytest.mark.parametrize("spec,node,ms", [
    (PRIORITY_REQUEST, FogNode("A"), 66.2252),
    (SENSOR_NON_URGENT, FogNode("A"), 59.6026),
    (PRIORITY_REQUEST, FogNode("C", CLOUD_PRESET), 2.2321),
])
def test_expected_process_time(spec, node, ms):
    assert expected_process_time(spec, node) == pytest.approx(ms, abs=5e-5)


def test_wait_examples():
    n = FogNode("A")
    assert queue_waiting_time(n) == 0
    for spec in (PRIORITY_REQUEST, PRIORITY_REQUEST, SENSOR_NON_URGENT):
        n.enqueue(task(spec))
    assert queue_waiting_time(n) == pytest.approx(192.053, abs=1e-3)
    assert queue_waiting_time(n) == pytest.approx(naive_wait_oracle([1000, 1000, 900], 15100), abs=1e-5)


def test_wait_counts_residual_service():
    n = FogNode("A")
    n.enqueue(task())
    n.start_next(0)
    now = n.service_end - ms_to_ns(10)
    assert queue_waiting_time(n, now / 1e6) == pytest.approx(10.0)


def test_threshold_is_strict():
    n = FogNode("A", offloading_threshold=50)
    assert not threshold_exceeded(n)
    big = TaskSpec(TaskType.PRIORITY, 755.0, 1, "m")  # 50 ms at 15100 MIPS
    n.enqueue(task(big))
    assert queue_waiting_time(n) == pytest.approx(50.0)
    assert not threshold_exceeded(n)
    n.enqueue(task(big))
    assert threshold_exceeded(n)
    for spec in (PRIORITY_REQUEST, PRIORITY_REQUEST):
        n.enqueue(task(spec))
    assert threshold_exceeded(n)


def test_enqueue_start_rules():
    on = FogNode("A")
    assert enqueue(task(), on)  # idle and ON: start now
    on.start_next(0)
    assert not enqueue(task(), on)  # busy: just queued
    assert len(on.queue) == 1 and on.current is not None
    off = FogNode("B", power_state=PowerState.OFF)
    assert not enqueue(task(), off)  # waits for the ON signal
    assert len(off.queue) == 1


def test_fifo_order_and_busy_implies_on():
    n = FogNode("A")
    ts = [task(random.choice([PRIORITY_REQUEST, SENSOR_NON_URGENT])) for _ in range(20)]
    for t in ts:
        n.enqueue(t)
    now, done = 0, []
    while n.queue:
        n.start_next(now)
        assert n.power_state is PowerState.ON
        now = n.service_end
        done.append(n.complete(now))
    assert done == ts


def test_preset_invariants():
    with pytest.raises(ValueError):
        NodePreset(mips=0)
    with pytest.raises(ValueError):
        NodePreset(processing_units=0)


def _random_queue_case(rng):
    mips = rng.uniform(100, 500000)
    units = rng.randint(1, 4)
    cpus = [rng.uniform(1, 5000) for _ in range(rng.randint(0, 40))]
    in_service = rng.uniform(1, 5000) if rng.random() < 0.5 else None
    frac = rng.random()
    return mips, units, cpus, in_service, frac


def _compare(mips, units, cpus, in_service, frac):
    node = FogNode("A", NodePreset(mips=mips, processing_units=units))
    now_ms, residual = 0.0, 0.0
    if in_service is not None:
        node.enqueue(task(TaskSpec(TaskType.PRIORITY, in_service, 1, "m")))
        node.start_next(0)
        now_ms = round(frac * node.service_end) / 1e6
        residual = in_service / (mips * units) * 1000 - now_ms
    for c in cpus:
        node.enqueue(task(TaskSpec(TaskType.SENSOR, c, 1, "m")))
    got = queue_waiting_time(node, now_ms)
    want = naive_wait_oracle(cpus, mips, units, max(residual, 0.0))
    assert isclose_ms(got, want, len(cpus) + 1), (got, want)


def test_wait_matches_oracle_on_10k_random_queues():
    rng = random.Random(20240917)
    for _ in range(10_000):
        _compare(*_random_queue_case(rng))


@given(st.floats(100, 5e5), st.integers(1, 4),
       st.lists(st.floats(1, 5000), max_size=30),
       st.none() | st.floats(1, 5000), st.floats(0, 1))
def test_wait_matches_oracle_property(mips, units, cpus, in_service, frac):
    _compare(mips, units, cpus, in_service, frac)
