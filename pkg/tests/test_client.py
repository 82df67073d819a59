"""Mirror replica: optimistic edits, server priority, desync, view projection."""

import pytest

from collabgraph import client as cl
from collabgraph import model as mm
from collabgraph import protocol as p
from collabgraph.client import MirrorModel, point_along, render_state
from collabgraph.errors import DesyncDetectedError, NotConnectedError
from collabgraph.server import GraphServer


class Wire:
    def __init__(self):
        self.frames = []

    def send(self, frame):
        self.frames.append(frame)


def make_pair(spec, users=("alice",), model_id="m1"):
    """Server plus connected mirrors with manual frame pumping."""
    server = GraphServer(spec, auto_create=True)
    trio = []
    for user in users:
        wire = Wire()
        mirror = MirrorModel(spec, user, transport=wire)
        session = server.connect(user, model_id)
        pump_down(session, mirror)
        trio.append((mirror, session, wire))
    return server, trio


def pump_up(server, session, wire):
    frames, wire.frames = wire.frames, []
    for frame in frames:
        server.handle_frame(session, frame)


def pump_down(session, mirror):
    while session.outbound:
        mirror.on_server_frame(session.outbound.popleft())


def sync(server, trio):
    for mirror, session, wire in trio:
        pump_up(server, session, wire)
    for mirror, session, wire in trio:
        pump_down(session, mirror)


def test_init_builds_replica(flowchart_spec):
    server, [(mirror, session, wire)] = make_pair(flowchart_spec)
    assert mirror.connected
    assert mm.models_equal(mirror.replica, server.get_model("m1"))


def test_optimistic_edit_then_echo_converges(flowchart_spec):
    server, trio = make_pair(flowchart_spec, ("alice", "bob"))
    (alice, a_sess, a_wire), (bob, *_rest) = trio[0], trio[1]
    out = alice.local_edit(p.CreateNode(id="n1", typeName="Start", containerId="m1",
                                        x=5, y=6))
    assert out.status == "sent"
    assert "n1" in alice.replica.elements  # applied before any round trip
    assert len(alice.pending) == 1
    sync(server, trio)
    assert alice.pending == []
    for replica in (alice.replica, bob.replica, server.get_model("m1")):
        el = replica.elements["n1"]
        assert (el.x, el.y) == (5, 6)
        assert el.version == 1  # server stamp propagated
    assert alice.replica.modelVersion == server.get_model("m1").modelVersion


def test_local_guard_matches_server_guard(flowchart_spec):
    """The mirror pre-rejects exactly what the server would reject."""
    server, [(mirror, session, wire)] = make_pair(flowchart_spec)
    mirror.local_edit(p.CreateNode(id="s", typeName="Start", containerId="m1"))
    mirror.local_edit(p.CreateNode(id="e", typeName="End", containerId="m1"))
    sync(server, [(mirror, session, wire)])
    probes = [
        p.CreateNode(id="ok", typeName="Task", containerId="m1"),
        p.CreateNode(id="ab", typeName="Activity", containerId="m1"),  # abstract
        p.CreateEdge(id="f1", typeName="Flow", sourceId="s", targetId="e"),
        p.CreateEdge(id="f2", typeName="Flow", sourceId="s", targetId="e"),  # Start 1..1
        p.CreateEdge(id="f3", typeName="Flow", sourceId="e", targetId="s"),  # End no outgoing
    ]
    for cmd in probes:
        outcome = mirror.local_edit(cmd)
        rejected_before = server.counters["rejected"]
        sync(server, [(mirror, session, wire)])
        server_rejected = server.counters["rejected"] > rejected_before
        if outcome.status == "rejectedLocal":
            # the server never even saw it, so it cannot have rejected it
            assert server.counters["rejected"] == rejected_before
        else:
            assert not server_rejected  # locally valid edits commit centrally
    assert mm.models_equal(mirror.replica, server.get_model("m1"), ignore_versions=True)


def test_stale_move_offender_reverted(flowchart_spec):
    server, trio = make_pair(flowchart_spec, ("alice", "bob"))
    (alice, a_sess, a_wire), (bob, b_sess, b_wire) = trio
    alice.local_edit(p.CreateNode(id="n1", typeName="Start", containerId="m1",
                                  x=10, y=10, width=60, height=40))
    sync(server, trio)

    # both edit concurrently from the same observed position
    alice.local_edit(p.MoveNode(id="n1", fromContainerId="m1", toContainerId="m1",
                                from_=[10, 10], to=[1, 1]))
    bob.local_edit(p.MoveNode(id="n1", fromContainerId="m1", toContainerId="m1",
                              from_=[10, 10], to=[50, 50]))
    pump_up(server, a_sess, a_wire)  # alice's move arrives first and wins
    pump_up(server, b_sess, b_wire)
    pump_down(a_sess, alice)
    reports = []
    while b_sess.outbound:
        reports.append(bob.on_server_frame(b_sess.outbound.popleft()))

    assert server.counters["rejected"] == 1
    assert server.counters["reverted"] == 1
    assert [r.kind for r in reports] == ["foreign", "revert"]
    assert reports[0].discarded_pending  # bob's own move was preempted
    for replica in (alice.replica, bob.replica, server.get_model("m1")):
        el = replica.elements["n1"]
        assert (el.x, el.y) == (1, 1)
    assert alice.pending == bob.pending == []
    assert not bob._awaiting_repair


def test_compound_delete_round_trip(flowchart_spec):
    server, trio = make_pair(flowchart_spec, ("alice", "bob"))
    (alice, *_a), (bob, *_b) = trio
    alice.local_edit(p.CreateNode(id="sw", typeName="Swimlane", containerId="m1"))
    alice.local_edit(p.CreateNode(id="t", typeName="Task", containerId="sw"))
    alice.local_edit(p.CreateNode(id="s", typeName="Start", containerId="m1"))
    alice.local_edit(p.CreateEdge(id="f", typeName="Flow", sourceId="s", targetId="t"))
    sync(server, trio)
    out = alice.delete_element("sw")
    assert out.status == "sent"
    assert "sw" not in alice.replica.elements
    assert "t" not in alice.replica.elements
    assert "f" not in alice.replica.elements  # incident edge went with the subtree
    sync(server, trio)
    for replica in (bob.replica, server.get_model("m1")):
        assert {"sw", "t", "f"}.isdisjoint(replica.elements)
        assert "s" in replica.elements


def test_not_connected(flowchart_spec):
    mirror = MirrorModel(flowchart_spec, "nobody")
    with pytest.raises(NotConnectedError):
        mirror.local_edit(p.CreateNode(id="x", typeName="Task", containerId="m1"))


def test_pending_window_bound(flowchart_spec):
    server, [(mirror, session, wire)] = make_pair(flowchart_spec)
    mirror.max_pending = 4
    for i in range(4):
        mirror.local_edit(p.CreateNode(id=f"n{i}", typeName="Task", containerId="m1"))
    with pytest.raises(NotConnectedError):
        mirror.local_edit(p.CreateNode(id="n9", typeName="Task", containerId="m1"))
    sync(server, [(mirror, session, wire)])  # confirmations free the window
    assert mirror.pending == []
    assert mirror.local_edit(
        p.CreateNode(id="n9", typeName="Task", containerId="m1")).status == "sent"


def test_desync_detection_requests_init(flowchart_spec):
    server, trio = make_pair(flowchart_spec, ("alice", "bob"))
    (alice, a_sess, a_wire), (bob, b_sess, b_wire) = trio
    alice.local_edit(p.CreateNode(id="n1", typeName="Start", containerId="m1",
                                  x=10, y=10, width=60, height=40))
    sync(server, trio)
    bob.replica.elements["n1"].x = 999  # simulate silent corruption
    alice.local_edit(p.MoveNode(id="n1", fromContainerId="m1", toContainerId="m1",
                                from_=[10, 10], to=[20, 20]))
    pump_up(server, a_sess, a_wire)
    pump_down(a_sess, alice)
    with pytest.raises(DesyncDetectedError):
        pump_down(b_sess, bob)
    assert bob.desync
    # recovery: the mirror asked for a fresh snapshot
    [frame] = b_wire.frames
    assert p.decode_message(frame).kind == "initRequest"
    pump_up(server, b_sess, b_wire)
    pump_down(b_sess, bob)
    assert not bob.desync
    assert mm.models_equal(bob.replica, server.get_model("m1"))


def test_local_rejection_leaves_replica_untouched(flowchart_spec):
    server, [(mirror, session, wire)] = make_pair(flowchart_spec)
    mirror.local_edit(p.CreateNode(id="s", typeName="Start", containerId="m1"))
    before = mm.model_to_dict(mirror.replica)
    out = mirror.local_edit_many([
        p.CreateNode(id="t", typeName="Task", containerId="m1"),
        p.CreateNode(id="bad", typeName="Activity", containerId="m1"),
    ])
    assert out.status == "rejectedLocal"
    assert mm.model_to_dict(mirror.replica) == before
    assert len(mirror.pending) == 1  # only the first, independent message


# -- view projection ---------------------------------------------------------


def build_view_fixture(spec):
    m = mm.new_model(spec, "m1")
    for cmd in (
        p.CreateNode(id="t1", typeName="Task", containerId="m1", x=100, y=50,
                     width=80, height=40, initialAttributes={"label": ["ship it"]}),
        p.CreateNode(id="d1", typeName="Decision", containerId="m1", x=300, y=50,
                     width=80, height=50, initialAttributes={"condition": ["ready?"]}),
        p.CreateEdge(id="f1", typeName="Flow", sourceId="t1", targetId="d1",
                     bendPoints=[[240, 70]], initialAttributes={"label": ["yes"]}),
    ):
        assert mm.apply_command(m, spec, cmd, check_stale=True).applied
    return m


def test_render_nodes_bind_attributes(flowchart_spec):
    vm = render_state(build_view_fixture(flowchart_spec), flowchart_spec)
    task = next(n for n in vm.nodes if n.elementId == "t1")
    assert task.shape.kind == "rectangle"
    assert (task.shape.x, task.shape.y) == (100, 50)
    [label] = task.shape.children
    assert label.kind == "text"
    assert label.text == "ship it"
    # centered anchor: parent 80x40 at (100,50), zero-size text box
    assert (label.x, label.y) == (100 + 80 / 2, 50 + 40 / 2)


def test_render_edge_path_and_decorators(flowchart_spec):
    vm = render_state(build_view_fixture(flowchart_spec), flowchart_spec)
    [edge] = vm.edges
    assert edge.path == [[140, 70], [240, 70], [340, 75]]
    # arrow head sits at the very end of the path
    arrow = next(d for d in edge.decorators if not isinstance(d[2], cl.DrawableShape))
    assert [arrow[0], arrow[1]] == [340, 75]
    label = next(d for d in edge.decorators if isinstance(d[2], cl.DrawableShape))
    assert label[2].text == "yes"


def test_point_along_matches_arithmetic_oracle():
    path = [[0, 0], [10, 0], [10, 5]]  # lengths 10 + 5
    assert point_along(path, 0.0) == [0, 0]
    assert point_along(path, 1.0) == [10, 5]
    assert point_along(path, 0.5) == [7.5, 0]  # 7.5 of 15 along first segment
    assert point_along(path, 2 / 3) == [10, 0]  # exactly the bend
    assert point_along(path, 0.9) == [10, 3.5]
    assert point_along([[3, 4]] * 2, 0.7) == [3, 4]  # degenerate zero-length


def test_anchor_alignments(flowchart_spec):
    pos = type(flowchart_spec.styles.nodeStyles["Task"].mainShape.innerShapes[0].position)
    parent = (10, 20, 100, 60)
    cases = {
        ("left", "top"): (10, 20),
        ("right", "bottom"): (10 + 100 - 8, 20 + 60 - 6),
        ("center", "middle"): (10 + 46, 20 + 27),
    }
    for (h, v), expected in cases.items():
        got = cl._anchor(*parent, 8, 6, pos(hAlign=h, vAlign=v, dx=0, dy=0))
        assert got == expected
    shifted = cl._anchor(*parent, 8, 6, pos(hAlign="left", vAlign="top", dx=4, dy=-3))
    assert shifted == (14, 17)


def test_palette_and_property_forms(flowchart_spec):
    vm = render_state(mm.new_model(flowchart_spec, "m1"), flowchart_spec)
    names = {e.typeName for e in vm.palette}
    assert names == {"Start", "End", "Task", "Decision", "Swimlane"}
    assert "Activity" not in names  # abstract types are not instantiable
    swim = next(e for e in vm.palette if e.typeName == "Swimlane")
    assert swim.container
    task_form = {f.name: f for f in vm.propertyForms["Task"]}
    assert set(task_form) == {"label", "priority"}  # inherited + own
    assert task_form["priority"].valueType == "integer"


def test_render_includes_validation_diagnostics(flowchart_spec):
    m = mm.new_model(flowchart_spec, "m1")  # missing the mandatory Start node
    vm = render_state(m, flowchart_spec)
    assert any(d.rule == "LowerBound" for d in vm.diagnostics)
