import math

import pytest
from hypothesis import given, settings, strategies as st

from fogsim.dts import Action, CloudParams, Scheduler, decide, select_best_neighbour
from fogsim.engine import ms_to_ns
from fogsim.node import FogNode, NodePreset
from fogsim.simulation import FogSimulation
from fogsim.topology import LinkKind, Position, Topology
from fogsim.workload import PRIORITY_REQUEST, SENSOR_NON_URGENT, Task, TaskSpec, TaskType
from conftest import make_scenario
from oracles import brute_force_argmin, cloud_round_trip_ms

_ids = iter(range(10**9))


def star(n_nbrs, fog_fog=2.0, preset=NodePreset(), threshold=50.0):
    """Primary P at the origin with neighbours N1..Nn on a circle of radius 50."""
    pos = {"P": Position(0, 0)}
    for i in range(n_nbrs):
        a = 2 * math.pi * i / max(n_nbrs, 1)
        pos[f"N{i + 1}"] = Position(50 * math.cos(a), 50 * math.sin(a))
    table = {LinkKind.FOG_CLOUD: 100.0, LinkKind.FOG_FOG: fog_fog, LinkKind.SENSOR_VEHICLE: 1.0}
    # radius 60 reaches the primary but not across the circle for small n
    radius = {f: (100.0 if f == "P" else 60.0) for f in pos}
    topo = Topology(pos, {}, radius, table)
    nodes = {f: FogNode(f, preset, threshold) for f in pos}
    return topo, nodes


def load(node, *cpus):
    for c in cpus:
        node.enqueue(Task(next(_ids), TaskSpec(TaskType.PRIORITY, c, 1000, "m"), 0, node.node_id, 0))


def fresh(spec=PRIORITY_REQUEST):
    return Task(next(_ids), spec, 0, "P", 0)


def test_first_task_processed_locally():
    topo, nodes = star(2)
    d = decide(fresh(), "P", topo, nodes)
    assert d.action is Action.LOCAL and d.step == 1


def test_offload_to_cheapest_neighbour():
    topo, nodes = star(2)
    load(nodes["P"], 1000, 1000, 900)  # 192.05 ms
    load(nodes["N1"], 151)  # 10 ms wait, cost 12
    load(nodes["N2"], 302)  # 20 ms wait, cost 22
    d = decide(fresh(), "P", topo, nodes)
    assert d.action is Action.NEIGHBOUR and d.target == "N1" and d.step == 4
    assert dict(d.candidate_costs)["N1"] == ms_to_ns(12.0)


def test_cloud_versus_local_when_neighbours_full():
    topo, nodes = star(2)
    load(nodes["N1"], 1000)
    load(nodes["N2"], 1000)  # both 66 ms > 50
    load(nodes["P"], 1000, 1000, 900)  # 192 ms < ~202 ms round trip
    d = decide(fresh(), "P", topo, nodes)
    assert d.action is Action.LOCAL and d.step == 5
    assert d.cloud_cost / 1e6 == pytest.approx(cloud_round_trip_ms(100, 1000, 1e6, 1000, 448000), abs=1e-6)
    load(nodes["P"], 270)  # 209.9 ms
    d = decide(fresh(), "P", topo, nodes)
    assert d.action is Action.CLOUD and d.target == "cloud"


def test_cloud_cost_without_processing():
    topo, nodes = star(0)
    s = Scheduler(topo, nodes, CloudParams(include_processing=False))
    assert s.cloud_cost("P", PRIORITY_REQUEST) == ms_to_ns(2 * (100 + 0.001))


def test_already_offloaded_task_stays():
    topo, nodes = star(2)
    load(nodes["P"], 5000)
    t = fresh()
    t.mark_offloaded("P")
    d = decide(t, "P", topo, nodes)
    assert d.action is Action.LOCAL and d.step == 3


def test_within_threshold_stays_local():
    topo, nodes = star(2)
    load(nodes["P"], 755)  # exactly 50 ms: not over a 50 ms threshold
    d = decide(fresh(), "P", topo, nodes)
    assert d.action is Action.LOCAL and d.step == 2


def test_infinite_threshold_never_offloads():
    topo, nodes = star(3, threshold=math.inf)
    load(nodes["P"], *[1000] * 50)
    assert decide(fresh(), "P", topo, nodes).action is Action.LOCAL


def test_tie_goes_to_lowest_id():
    topo, nodes = star(3)
    load(nodes["P"], 5000)
    assert select_best_neighbour("P", topo, nodes) == "N1"


def test_no_neighbours():
    topo, nodes = star(0)
    assert select_best_neighbour("P", topo, nodes) is None


waits = st.lists(st.integers(0, 400), min_size=1, max_size=6)


@given(waits)
def test_argmin_matches_enumeration(ws):
    preset = NodePreset(mips=1000)  # 1 MI = 1 ms
    topo, nodes = star(len(ws), preset=preset)
    for i, w in enumerate(ws):
        if w:
            load(nodes[f"N{i + 1}"], w)
    best, costs = Scheduler(topo, nodes).best_neighbour("P", 0)
    own = {f"N{i + 1}": ms_to_ns(w + 2.0) for i, w in enumerate(ws)}
    assert dict(costs) == own
    assert best == brute_force_argmin(own)


@given(waits, st.integers(2, 20))
def test_argmin_scale_invariant(ws, k):
    picks = []
    for scale in (1, k):
        topo, nodes = star(len(ws), fog_fog=2.0 * scale, preset=NodePreset(mips=1000))
        for i, w in enumerate(ws):
            if w:
                load(nodes[f"N{i + 1}"], w * scale)
        picks.append(Scheduler(topo, nodes).best_neighbour("P", 0)[0])
    assert picks[0] == picks[1]


def audited(s):
    sim = FogSimulation(s, audit=True)
    sim.run(math.inf)
    return sim


@settings(max_examples=12, deadline=None)
@given(st.integers(2, 15), st.sampled_from([5.0, 20.0, 50.0, 100.0]), st.booleans())
def test_trace_invariants(nv, thr, dec):
    s = make_scenario([("A", 0, 0, 150), ("B", 100, 0, 150), ("C", -100, 0, 150), ("D", 0, 100, 150)],
                      [(i, i, 0) for i in range(nv)], horizon_ms=45.0,
                      offloading_threshold=thr, dec_enabled=dec)
    sim = audited(s)
    for t in sim.tasks:
        assert t.offload_count <= 1
        assert (t.locus.value == "neighbour_fog") <= t.already_offloaded
    thr_ns = ms_to_ns(thr)
    for _, _, f, d in sim.decisions:
        if d.action is Action.NEIGHBOUR:
            assert d.target == brute_force_argmin(dict(d.candidate_costs))
            assert all(dict(d.candidate_costs)[d.target] <= c for _, c in d.candidate_costs)
        if d.action is Action.LOCAL:
            # admitted only under the threshold, after one offload, or when alternatives lose
            assert d.step in (1, 2, 3, 5)
            if d.step == 2:
                assert d.primary_wait <= thr_ns
            if d.step == 5:
                assert d.primary_wait <= d.cloud_cost
        if d.action is Action.CLOUD:
            assert d.primary_wait > d.cloud_cost
    assert sim.report().invariant_violations.get("offload_twice", 0) == 0


def test_infinite_threshold_trace_has_no_offloads():
    s = make_scenario([("A", 0, 0, 150), ("B", 100, 0, 150)], [(i, i, 0) for i in range(10)],
                      horizon_ms=60.0)
    r = audited(s).report()
    assert set(r.decisions) == {"ProcessLocally"}


def test_sensor_tasks_are_scheduled_too():
    topo, nodes = star(1)
    load(nodes["P"], 5000)
    d = decide(fresh(SENSOR_NON_URGENT), "P", topo, nodes)
    assert d.action is Action.NEIGHBOUR
