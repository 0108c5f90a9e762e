import math

import pytest
from hypothesis import given, settings, strategies as st

from fogsim.engine import Engine, EventKind, PastEvent, ms_to_ns, ns_to_ms
from fogsim.simulation import FogSimulation
from conftest import make_scenario


def recorder():
    e = Engine()
    seen = []
    for k in EventKind:
        e.on(k, seen.append)
    return e, seen


def test_same_time_is_fifo():
    e, seen = recorder()
    e.schedule(5, EventKind.POWER_SIGNAL, "first")
    e.schedule(5, EventKind.TASK_EMITTED, "second")
    e.schedule(1, EventKind.TASK_EMITTED, "early")
    e.run()
    assert [ev.payload for ev in seen] == ["early", "first", "second"]


def test_schedule_at_now_runs_before_later():
    e, seen = recorder()
    e.schedule(10, EventKind.TASK_EMITTED, "later")
    e.on(EventKind.POWER_SIGNAL, lambda ev: (seen.append(ev), e.schedule(e.now, EventKind.TASK_ARRIVED, "now")))
    e.schedule(3, EventKind.POWER_SIGNAL, "trigger")
    e.run()
    assert [ev.payload for ev in seen] == ["trigger", "now", "later"]


def test_past_event_rejected():
    e, _ = recorder()
    e.schedule(10, EventKind.TASK_EMITTED)
    e.run()
    with pytest.raises(PastEvent):
        e.schedule(9, EventKind.TASK_EMITTED)


def test_run_until_is_inclusive():
    e, seen = recorder()
    for t in (1, 2, 3):
        e.schedule(t, EventKind.TASK_EMITTED, t)
    assert e.run(2) == 2
    assert e.peek_time() == 3 and len(e) == 1


def test_ms_ns_round_trip():
    assert ms_to_ns(1.5) == 1_500_000
    assert ns_to_ms(66_225_166) == pytest.approx(66.225166)


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 3)), max_size=60))
def test_clock_monotone_and_stable(items):
    e, seen = recorder()
    kinds = list(EventKind)
    for i, (t, k) in enumerate(items):
        e.schedule(t, kinds[k], i)
    e.run()
    times = [ev.time for ev in seen]
    assert times == sorted(times)
    assert [ev.payload for ev in seen] == [i for _, i in sorted((t, i) for i, (t, _) in enumerate(items))]


def test_empty_scenario():
    s = make_scenario([("A", 0, 0, 100)], horizon_ms=100.0)
    r = FogSimulation(s).run()
    assert r.tasks_emitted == 0 and r.executed_task_count == 0
    assert r.fog_energy == pytest.approx(83.4333 * 0.1)  # idle accounting only


def test_single_vehicle_one_tick_traced_end_to_end():
    s = make_scenario([("A", 0, 0, 100)], [(0, 10, 0)], horizon_ms=3.0)
    sim = FogSimulation(s, trace=True)
    r = sim.run(math.inf)
    assert r.tasks_emitted == 2 and r.tasks_terminal == 2
    kinds = [ev.kind for ev in sim.engine.trace]
    assert kinds.count(EventKind.TASK_EMITTED) == 1
    assert kinds.count(EventKind.TASK_ARRIVED) == 2
    assert kinds.count(EventKind.PROCESSING_COMPLETED) == 2
    assert kinds.count(EventKind.RESULT_DELIVERED) == 1  # priority task
    assert kinds.count(EventKind.CLOUD_COMPLETED) == 1  # sensor data stored at the cloud
    # vehicle 0: sensor 1 ms + link 1 ms + transmission; priority arrives at 3 ms
    prio = next(r for r in sim.records if r.task_type == "priority_request")
    sensor = next(r for r in sim.records if r.task_type == "sensor_non_urgent")
    assert ns_to_ms(sensor.component_sum()) == pytest.approx(1 + 1 + 0.5 + 59.602649 + 100 + 0.0005 + 300 / 448)
    # sensor (2.5 ms) started first, so the priority task waits behind it
    assert ns_to_ms(prio.queue) == pytest.approx(2.5 + 59.602649 - 3.0, abs=1e-6)
    assert prio.total_ms == pytest.approx(2 * (1 + 1) + 1 + 1 + ns_to_ms(prio.queue) + 66.225166, abs=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 12), st.sampled_from([20.0, 50.0, math.inf]), st.booleans())
def test_no_event_loss(nv, thr, dec):
    s = make_scenario([("A", 0, 0, 150), ("B", 100, 0, 150)],
                      [(i, i, 0) for i in range(nv)], horizon_ms=30.0,
                      offloading_threshold=thr, dec_enabled=dec)
    r = FogSimulation(s).run(math.inf)
    assert r.tasks_emitted == r.tasks_terminal and r.tasks_in_flight == 0


def test_replay_identical_traces():
    s = make_scenario([("A", 0, 0, 150), ("B", 100, 0, 150)], [(i, i, 0) for i in range(6)],
                      horizon_ms=40.0, offloading_threshold=20.0, dec_enabled=True)
    a, b = FogSimulation(s, trace=True), FogSimulation(s, trace=True)
    ra, rb = a.run(), b.run()
    strip = lambda sim: [(ev.time, ev.sequence, ev.kind, repr(ev.payload)) for ev in sim.engine.trace]
    assert strip(a) == strip(b)
    assert ra.to_dict() == rb.to_dict()
