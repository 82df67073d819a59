"""Graph instance semantics: guard, staleness, atomic rejection, inverses."""

import copy
import random

import pytest

from collabgraph import model as mm
from collabgraph import protocol as p
from collabgraph.errors import MalformedCommandError, NotInvertibleError
from collabgraph.metamodel import subtypes_of


def fresh(spec, model_id="m1"):
    return mm.new_model(spec, model_id)


def apply_ok(model, spec, cmd):
    result = mm.apply_command(model, spec, cmd, check_stale=True)
    assert result.applied, (cmd, result.status, result.rule_id)
    return result


def build_basic(spec):
    """start -> task -> end with one flow pair, plus a swimlane."""
    m = fresh(spec)
    apply_ok(m, spec, p.CreateNode(id="s", typeName="Start", containerId="m1", x=0, y=0))
    apply_ok(m, spec, p.CreateNode(id="t", typeName="Task", containerId="m1", x=100, y=0))
    apply_ok(m, spec, p.CreateNode(id="e", typeName="End", containerId="m1", x=200, y=0))
    apply_ok(m, spec, p.CreateNode(id="sw", typeName="Swimlane", containerId="m1",
                                   x=0, y=100, width=300, height=150))
    apply_ok(m, spec, p.CreateEdge(id="f1", typeName="Flow", sourceId="s", targetId="t"))
    apply_ok(m, spec, p.CreateEdge(id="f2", typeName="Flow", sourceId="t", targetId="e"))
    return m


# -- constraint guard -------------------------------------------------------


def test_whitelist_semantics_no_constraint_forbidden(flowchart_spec):
    """Flow from End is not declared anywhere, so it must be rejected."""
    m = build_basic(flowchart_spec)
    result = mm.apply_command(
        m, flowchart_spec,
        p.CreateEdge(id="bad", typeName="Flow", sourceId="e", targetId="t"),
        check_stale=True,
    )
    assert result.status == "rejectedConstraint"
    assert result.rule_id == "NoConnection"


def test_outgoing_upper_bound_enforced(flowchart_spec):
    """A Task allows at most one outgoing Flow."""
    m = build_basic(flowchart_spec)
    result = mm.apply_command(
        m, flowchart_spec,
        p.CreateEdge(id="f3", typeName="Flow", sourceId="t", targetId="e"),
        check_stale=True,
    )
    assert result.status == "rejectedConstraint"
    assert result.rule_id == "ConnectionUpper"


def test_embedding_upper_bound_enforced(flowchart_spec):
    """A Swimlane holds at most one Decision."""
    m = build_basic(flowchart_spec)
    apply_ok(m, flowchart_spec, p.CreateNode(id="d1", typeName="Decision", containerId="sw"))
    result = mm.apply_command(
        m, flowchart_spec,
        p.CreateNode(id="d2", typeName="Decision", containerId="sw"),
        check_stale=True,
    )
    assert result.status == "rejectedConstraint"
    assert result.rule_id == "EmbeddingUpper"


def test_embedding_forbidden_type(flowchart_spec):
    """Start is not embeddable in a Swimlane."""
    m = build_basic(flowchart_spec)
    result = mm.apply_command(
        m, flowchart_spec,
        p.CreateNode(id="s2", typeName="Start", containerId="sw"),
        check_stale=True,
    )
    assert result.status == "rejectedConstraint"
    assert result.rule_id == "NoEmbedding"


def test_abstract_type_not_instantiable(flowchart_spec):
    m = fresh(flowchart_spec)
    result = mm.apply_command(
        m, flowchart_spec,
        p.CreateNode(id="a", typeName="Activity", containerId="m1"),
        check_stale=True,
    )
    assert result.status == "rejectedConstraint"
    assert result.rule_id == "AbstractType"


def _count_violations(model, spec):
    """Brute-force recount oracle, fully independent of the guard code."""
    violations = 0
    # connection upper bounds, per node and per declared constraint
    for el in model.elements.values():
        if isinstance(el, mm.Edge):
            continue
        for direction, endpoint in (("outgoing", "sourceId"), ("incoming", "targetId")):
            for conn in spec.connections_of(el.typeName, direction):
                if conn.upper == -1:
                    continue
                edge_types = subtypes_of(spec, conn.edgeTypeName)
                n = sum(
                    1
                    for e in model.elements.values()
                    if isinstance(e, mm.Edge)
                    and e.typeName in edge_types
                    and getattr(e, endpoint) == el.id
                )
                if n > conn.upper:
                    violations += 1
    # embedding upper bounds
    for el in list(model.elements.values()) + [model]:
        type_name = getattr(el, "typeName", None) or spec.graphModel.name
        if not spec.is_container_type(type_name) and type_name != spec.graphModel.name:
            continue
        children = el.rootChildren if el is model else el.children
        for emb in spec.embeddings_of(type_name):
            if emb.upper == -1:
                continue
            member_types = subtypes_of(spec, emb.nodeTypeName)
            n = sum(1 for cid in children if model.elements[cid].typeName in member_types)
            if n > emb.upper:
                violations += 1
    return violations


def _random_command(rng, model, counter):
    nodes = sorted(i for i, e in model.elements.items() if not isinstance(e, mm.Edge))
    node_types = ["Start", "End", "Task", "Decision", "Swimlane"]
    containers = ["m1"] + sorted(
        i for i, e in model.elements.items() if isinstance(e, mm.Container)
    )
    kind = rng.randrange(4)
    if kind == 0 or not nodes:
        return p.CreateNode(
            id=f"n{counter}", typeName=rng.choice(node_types),
            containerId=rng.choice(containers),
            x=rng.randrange(500), y=rng.randrange(500),
        )
    if kind == 1 and len(nodes) >= 2:
        return p.CreateEdge(
            id=f"e{counter}", typeName="Flow",
            sourceId=rng.choice(nodes), targetId=rng.choice(nodes),
        )
    if kind == 2:
        el = model.elements[rng.choice(nodes)]
        return p.MoveNode(id=el.id, fromContainerId=el.containerId,
                          toContainerId=rng.choice(containers),
                          from_=[el.x, el.y], to=[rng.randrange(500), rng.randrange(500)])
    victim = rng.choice(sorted(model.elements))
    el = mm.element_to_dict(model.elements[victim])
    if isinstance(model.elements[victim], mm.Edge):
        return p.DeleteEdge(id=victim, oldState=el)
    return p.DeleteNode(id=victim, oldState=el)


def test_guard_soundness_random_attempts(flowchart_spec):
    """Random commands never leave an upper-bound violation behind,
    and rejected commands leave the model bit-identical."""
    rng = random.Random(1234)
    m = fresh(flowchart_spec)
    attempts, rejected = 2000, 0
    for i in range(attempts):
        cmd = _random_command(rng, m, i)
        before = mm.model_to_dict(m)
        try:
            result = mm.apply_command(m, flowchart_spec, cmd, check_stale=True)
        except MalformedCommandError:
            assert mm.model_to_dict(m) == before
            continue
        if not result.applied:
            rejected += 1
            assert mm.model_to_dict(m) == before
        assert _count_violations(m, flowchart_spec) == 0
    assert rejected > 0  # the stream actually exercised the guard


# -- staleness --------------------------------------------------------------


def test_move_stale_on_position(flowchart_spec):
    m = build_basic(flowchart_spec)
    result = mm.apply_command(
        m, flowchart_spec,
        p.MoveNode(id="t", fromContainerId="m1", toContainerId="m1",
                   from_=[999, 999], to=[5, 5]),
        check_stale=True,
    )
    assert result.status == "rejectedStale"


def test_stale_completeness_single_field_perturbations(flowchart_spec):
    """Perturbing any single old-state field of Move/Resize/SetAttributes
    makes the command stale; matching old state commits."""
    m = build_basic(flowchart_spec)
    el = m.elements["t"]
    ok = p.MoveNode(id="t", fromContainerId="m1", toContainerId="m1",
                    from_=[el.x, el.y], to=[50, 60])
    for field_name, bad_value in (
        ("from_", [el.x + 1, el.y]),
        ("from_", [el.x, el.y + 1]),
        ("fromContainerId", "sw"),
    ):
        stale = copy.deepcopy(ok)
        setattr(stale, field_name, bad_value)
        r = mm.apply_command(copy.deepcopy(m), flowchart_spec, stale, check_stale=True)
        assert r.status == "rejectedStale", field_name

    resize_ok = p.ResizeNode(id="t", oldSize=[el.width, el.height], newSize=[90, 70])
    stale = copy.deepcopy(resize_ok)
    stale.oldSize = [el.width + 1, el.height]
    assert mm.apply_command(copy.deepcopy(m), flowchart_spec, stale,
                            check_stale=True).status == "rejectedStale"

    attrs_ok = p.SetAttributes(id="t", oldAssignment=dict(el.attributes),
                               newAssignment={**el.attributes, "label": ["x"]})
    stale = copy.deepcopy(attrs_ok)
    stale.oldAssignment = {**el.attributes, "label": ["phantom"]}
    assert mm.apply_command(copy.deepcopy(m), flowchart_spec, stale,
                            check_stale=True).status == "rejectedStale"

    # the unperturbed commands commit
    for cmd in (ok, resize_ok, attrs_ok):
        assert mm.apply_command(copy.deepcopy(m), flowchart_spec, cmd,
                                check_stale=True).applied


def test_delete_never_stale(flowchart_spec):
    """Deletes only require existence: a stale old state still deletes."""
    m = build_basic(flowchart_spec)
    r = mm.apply_command(
        m, flowchart_spec,
        p.DeleteEdge(id="f2", oldState={"sourceId": "wrong", "targetId": "wrong"}),
        check_stale=True,
    )
    assert r.applied


def test_local_mode_skips_stale_check(flowchart_spec):
    m = build_basic(flowchart_spec)
    r = mm.apply_command(
        m, flowchart_spec,
        p.MoveNode(id="t", fromContainerId="m1", toContainerId="m1",
                   from_=[999, 999], to=[5, 5]),
        check_stale=False,
    )
    assert r.applied


# -- structural rules -------------------------------------------------------


def test_delete_container_with_children_is_malformed(flowchart_spec):
    m = build_basic(flowchart_spec)
    apply_ok(m, flowchart_spec, p.CreateNode(id="tk", typeName="Task", containerId="sw"))
    with pytest.raises(MalformedCommandError):
        mm.apply_command(m, flowchart_spec, p.DeleteNode(id="sw", oldState={}),
                         check_stale=True)


def test_delete_node_with_edges_is_malformed(flowchart_spec):
    m = build_basic(flowchart_spec)
    with pytest.raises(MalformedCommandError):
        mm.apply_command(m, flowchart_spec, p.DeleteNode(id="t", oldState={}),
                         check_stale=True)


def test_compound_delete_expansion(flowchart_spec):
    m = build_basic(flowchart_spec)
    apply_ok(m, flowchart_spec, p.CreateNode(id="tk", typeName="Task", containerId="sw"))
    cmds = mm.delete_commands_for(m, "sw")
    # edges first, then nodes leaf-to-root
    kinds = [type(c).__name__ for c in cmds]
    assert kinds == sorted(kinds, key=lambda k: 0 if k == "DeleteEdge" else 1)
    assert kinds[-1] == "DeleteNode" and cmds[-1].id == "sw"
    for cmd in cmds:
        apply_ok(m, flowchart_spec, cmd)
    assert "sw" not in m.elements and "tk" not in m.elements


def test_move_subtree_rigid(flowchart_spec):
    m = build_basic(flowchart_spec)
    apply_ok(m, flowchart_spec, p.CreateNode(id="tk", typeName="Task", containerId="sw",
                                             x=10, y=110))
    sw = m.elements["sw"]
    apply_ok(m, flowchart_spec, p.MoveNode(
        id="sw", fromContainerId="m1", toContainerId="m1",
        from_=[sw.x, sw.y], to=[sw.x + 40, sw.y + 7]))
    assert (m.elements["tk"].x, m.elements["tk"].y) == (50, 117)


def test_containment_cycle_rejected(flowchart_spec):
    m = fresh(flowchart_spec)
    apply_ok(m, flowchart_spec, p.CreateNode(id="a", typeName="Swimlane", containerId="m1"))
    apply_ok(m, flowchart_spec, p.CreateNode(id="b", typeName="Swimlane", containerId="a"))
    r = mm.apply_command(
        m, flowchart_spec,
        p.MoveNode(id="a", fromContainerId="m1", toContainerId="b",
                   from_=[m.elements["a"].x, m.elements["a"].y], to=[0, 0]),
        check_stale=True,
    )
    assert r.status == "rejectedConstraint"
    assert r.rule_id == "ContainmentCycle"


# -- inverses / undo --------------------------------------------------------


def _random_valid_sequence(rng, spec, length):
    m = fresh(spec)
    cmds = []
    counter = 0
    while len(cmds) < length:
        counter += 1
        cmd = _random_command(rng, m, counter + 10_000)
        if isinstance(cmd, (p.DeleteNode, p.DeleteEdge)):
            expansion = mm.delete_commands_for(m, cmd.id)
            applied = []
            ok = True
            for c in expansion:
                r = mm.apply_command(m, spec, c, check_stale=True)
                if not r.applied:
                    ok = False
                    break
                applied.append((c, r.inverse))
            if not ok:
                continue
            cmds.extend(applied)
            continue
        try:
            r = mm.apply_command(m, spec, cmd, check_stale=True)
        except MalformedCommandError:
            continue
        if r.applied:
            cmds.append((cmd, r.inverse))
    return cmds


def test_undo_restores_initial_model(flowchart_spec):
    rng = random.Random(99)
    for _ in range(50):
        length = rng.randrange(1, 21)
        m = fresh(flowchart_spec)
        initial = mm.clone_model(m)
        applied = []
        counter = 0
        while len(applied) < length:
            counter += 1
            cmd = _random_command(rng, m, counter)
            if isinstance(cmd, (p.DeleteNode, p.DeleteEdge)):
                continue  # compound deletes are covered separately
            try:
                r = mm.apply_command(m, flowchart_spec, cmd, check_stale=True)
            except MalformedCommandError:
                continue
            if r.applied:
                applied.append(r.inverse)
        for inverse in reversed(applied):
            r = mm.apply_command(m, flowchart_spec, inverse, check_stale=False)
            assert r.applied, inverse
        assert mm.models_equal(m, initial, ignore_versions=True), mm.diff_models(m, initial)


def test_inverse_of_inverse_is_original_effect(flowchart_spec):
    m = build_basic(flowchart_spec)
    snapshot = mm.model_to_dict(m)
    cmd = p.MoveNode(id="t", fromContainerId="m1", toContainerId="m1",
                     from_=[m.elements["t"].x, m.elements["t"].y], to=[300, 300])
    r1 = mm.apply_command(m, flowchart_spec, cmd, check_stale=True)
    after = mm.model_to_dict(m)
    r2 = mm.apply_command(m, flowchart_spec, r1.inverse, check_stale=True)
    assert mm.models_equal(mm.model_from_dict(snapshot), m, ignore_versions=True)
    mm.apply_command(m, flowchart_spec, r2.inverse, check_stale=True)
    assert mm.models_equal(mm.model_from_dict(after), m, ignore_versions=True)


def test_interaction_commands_not_invertible():
    for cmd in (p.Click(id="x"), p.DoubleClick(id="x"),
                p.ContextMenu(id="x", actionId="a"), p.Routing()):
        with pytest.raises(NotInvertibleError):
            mm.invert(cmd)


def test_pure_invert_matches_applied_inverse(flowchart_spec):
    m = build_basic(flowchart_spec)
    el = m.elements["t"]
    cmd = p.ResizeNode(id="t", oldSize=[el.width, el.height], newSize=[123, 45])
    pure = mm.invert(cmd)
    r = mm.apply_command(m, flowchart_spec, cmd, check_stale=True)
    assert pure == r.inverse


# -- equality / serialization ------------------------------------------------


def test_models_equal_ignores_child_order(flowchart_spec):
    m1 = build_basic(flowchart_spec)
    m2 = mm.clone_model(m1)
    m2.rootChildren.reverse()
    assert mm.models_equal(m1, m2)


def test_model_dict_round_trip(flowchart_spec):
    m = build_basic(flowchart_spec)
    d = mm.model_to_dict(m)
    m2 = mm.model_from_dict(d)
    assert mm.models_equal(m, m2)
    assert mm.model_to_dict(m2) == d
