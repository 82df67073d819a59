"""Simulation harness: determinism, convergence, exhaustive interleavings."""

import importlib.resources as ir

import pytest

from collabgraph import harness as hz
from collabgraph import protocol as p
from collabgraph.errors import ParseError


def sample_text(name):
    return (ir.files("collabgraph") / "samples" / name).read_text()


def elements_by_id(model_dict):
    return {e["id"]: e for e in model_dict["elements"]}


def random_scenario(seed, clients=3, count=40, schedule="randomDelay"):
    return hz.Scenario(
        seed=seed,
        clients=clients,
        modelId="sim",
        script=[
            hz.ScriptStep(clientIndex=i, delay=0.0,
                          action={"kind": "randomEdits", "count": count})
            for i in range(clients)
        ],
        deliverySchedule=schedule,
    )


def test_same_seed_same_everything(flowchart_spec):
    a = hz.run_scenario(random_scenario(123), flowchart_spec)
    b = hz.run_scenario(random_scenario(123), flowchart_spec)
    assert a.finalModel == b.finalModel
    assert (a.committed, a.rejected, a.reverted, a.broadcasts) == \
        (b.committed, b.rejected, b.reverted, b.broadcasts)
    assert a.virtualTime == b.virtualTime


def test_different_seed_diverges(flowchart_spec):
    a = hz.run_scenario(random_scenario(1), flowchart_spec)
    b = hz.run_scenario(random_scenario(2), flowchart_spec)
    assert a.finalModel != b.finalModel  # astronomically unlikely to collide


def test_random_workload_converges_fifo(flowchart_spec):
    report = hz.run_scenario(random_scenario(99, schedule="fifo"), flowchart_spec)
    assert report.converged, report.perClientDiff
    assert report.replayMatches
    assert report.committed > 0


def test_random_workload_converges_jittered(flowchart_spec):
    report = hz.run_scenario(random_scenario(99), flowchart_spec)
    assert report.converged, report.perClientDiff
    assert report.replayMatches


def test_fifo_per_link_under_jitter():
    """Random per-frame latency never reorders frames on one link."""
    clock = hz.VirtualClock()
    import random
    received = []
    link = hz.SimLink(clock, random.Random(5), received.append,
                      base_latency=1.0, jitter_bounds=(0.0, 10.0))
    for i in range(50):
        link.send(i)
    clock.run()
    assert received == list(range(50))


def test_stale_move_scenario_file(flowchart_spec):
    scenario = hz.load_scenario(sample_text("stale_move.yaml"))
    report = hz.run_scenario(scenario, flowchart_spec)
    assert report.converged
    assert report.rejected == 1
    assert report.reverted == 1
    assert report.replayMatches
    node = elements_by_id(report.finalModel)["n1"]
    assert (node["x"], node["y"]) == (1, 1)


def test_stale_move_deterministic(flowchart_spec):
    scenario = hz.load_scenario(sample_text("stale_move.yaml"))
    a = hz.run_scenario(scenario, flowchart_spec)
    b = hz.run_scenario(hz.load_scenario(sample_text("stale_move.yaml")), flowchart_spec)
    assert a.finalModel == b.finalModel


def test_load_scenario_defaults_and_errors():
    scenario = hz.load_scenario("seed: 7\nclients: 4\n")
    assert scenario.seed == 7
    assert scenario.clients == 4
    assert scenario.deliverySchedule == "fifo"
    assert scenario.script == []
    with pytest.raises(ParseError):
        hz.load_scenario("- just\n- a list\n")


def base_setup():
    return [
        p.CreateNode(id="a", typeName="Task", containerId="simx", x=0, y=0,
                     width=80, height=40),
        p.CreateNode(id="b", typeName="Task", containerId="simx", x=200, y=0,
                     width=80, height=40),
    ]


def test_exhaustive_move_move(flowchart_spec):
    """Two concurrent moves of one node: either move may win, both clients
    always agree with the server."""
    outcomes = hz.exhaustive_interleave(
        flowchart_spec,
        base_setup(),
        [
            (0, p.MoveNode(id="a", fromContainerId="simx", toContainerId="simx",
                           from_=[0, 0], to=[10, 10])),
            (1, p.MoveNode(id="a", fromContainerId="simx", toContainerId="simx",
                           from_=[0, 0], to=[90, 90])),
        ],
        model_id="simx",
    )
    positions = sorted(
        (elements_by_id(m)["a"]["x"], elements_by_id(m)["a"]["y"])
        for m in outcomes.values()
    )
    assert positions == [(10, 10), (90, 90)]  # first-arrival wins, loser reverted


def test_exhaustive_move_resize_commute(flowchart_spec):
    """Move and resize touch disjoint fields of the same node but the
    stale check still serializes them; exploration must stay convergent."""
    outcomes = hz.exhaustive_interleave(
        flowchart_spec,
        base_setup(),
        [
            (0, p.MoveNode(id="a", fromContainerId="simx", toContainerId="simx",
                           from_=[0, 0], to=[5, 5])),
            (1, p.ResizeNode(id="a", oldSize=[80, 40], newSize=[100, 60])),
        ],
        model_id="simx",
    )
    for m in outcomes.values():
        el = elements_by_id(m)["a"]
        # every outcome applied at least one of the edits and never mixed
        # in values neither client requested
        assert (el["x"], el["y"]) in [(0, 0), (5, 5)]
        assert (el["width"], el["height"]) in [(80, 40), (100, 60)]
        assert (el["x"], el["y"]) != (0, 0) or (el["width"], el["height"]) != (80, 40)


def test_exhaustive_edit_vs_delete(flowchart_spec):
    """Concurrent attribute edit and delete of the same node: the element
    ends up either absent or carrying the new label, never half-updated."""
    outcomes = hz.exhaustive_interleave(
        flowchart_spec,
        base_setup(),
        [
            (0, p.SetAttributes(id="a", oldAssignment={"label": [""], "priority": [0]},
                                newAssignment={"label": ["hi"], "priority": [0]})),
            (1, p.DeleteNode(id="a")),
        ],
        model_id="simx",
    )
    for m in outcomes.values():
        el = elements_by_id(m).get("a")
        assert el is None or el["attributes"]["label"] == ["hi"]
    assert any("a" not in elements_by_id(m) for m in outcomes.values())
