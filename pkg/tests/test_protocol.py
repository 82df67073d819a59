"""Codec canonicality, round-trips, and malformed-input behavior."""

import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from collabgraph import protocol as p
from collabgraph.errors import DecodeError, ProtocolError, UnknownCommandTypeError

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "protocol_vectors.json"

ident = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz0123456789_", min_size=1, max_size=12
)
coord = st.integers(min_value=-10_000, max_value=10_000)
point = st.tuples(coord, coord).map(list)
attr_values = st.dictionaries(
    ident, st.lists(st.one_of(st.integers(), st.text(max_size=8), st.booleans()),
                    max_size=3),
    max_size=3,
)


def commands():
    return st.one_of(
        st.builds(p.CreateNode, id=ident, typeName=ident, containerId=ident,
                  x=coord, y=coord, width=coord, height=coord,
                  initialAttributes=attr_values),
        st.builds(p.DeleteNode, id=ident, oldState=attr_values),
        st.builds(p.MoveNode, id=ident, fromContainerId=ident, toContainerId=ident,
                  from_=point, to=point),
        st.builds(p.ResizeNode, id=ident, oldSize=point, newSize=point),
        st.builds(p.CreateEdge, id=ident, typeName=ident, sourceId=ident,
                  targetId=ident, bendPoints=st.lists(point, max_size=4),
                  initialAttributes=attr_values),
        st.builds(p.DeleteEdge, id=ident, oldState=attr_values),
        st.builds(p.ReconnectEdge, id=ident, oldSource=ident, oldTarget=ident,
                  newSource=ident, newTarget=ident),
        st.builds(p.BendEdge, id=ident, oldBendPoints=st.lists(point, max_size=4),
                  newBendPoints=st.lists(point, max_size=4)),
        st.builds(p.SetAttributes, id=ident, oldAssignment=attr_values,
                  newAssignment=attr_values),
        st.builds(p.Routing, editorPreference=st.sampled_from(
            [{"algorithm": a, "connectorKind": "line"} for a in p.ROUTING_ALGORITHMS])),
    )


def edit_messages():
    return st.builds(
        p.Message,
        messageId=ident,
        graphModelId=ident,
        userId=ident,
        kind=st.just("edit"),
        commands=st.lists(commands(), min_size=1, max_size=5),
    )


@settings(max_examples=300, deadline=None)
@given(edit_messages())
def test_round_trip_structural_equality(msg):
    frame = p.encode_message(msg)
    decoded = p.decode_message(frame)
    assert p.message_to_dict(decoded) == p.message_to_dict(msg)


@settings(max_examples=200, deadline=None)
@given(edit_messages())
def test_encoding_is_canonical(msg):
    """Same message always encodes to identical bytes, and re-encoding a
    decoded frame reproduces the frame."""
    f1 = p.encode_message(msg)
    f2 = p.encode_message(p.decode_message(f1))
    assert f1 == f2
    length, _, body = f1.partition(b"\n")
    assert int(length) == len(body)
    assert body == p.canonical_json(p.message_to_dict(msg))


@settings(max_examples=200, deadline=None)
@given(edit_messages(), st.integers(min_value=0, max_value=400))
def test_truncation_yields_decode_error(msg, cut):
    frame = p.encode_message(msg)
    if cut >= len(frame):
        return
    with pytest.raises(DecodeError):
        p.decode_message(frame[:cut])


@settings(max_examples=200, deadline=None)
@given(edit_messages(), st.integers(min_value=0, max_value=100_000), st.binary(max_size=6))
def test_corruption_never_crashes(msg, pos, junk):
    frame = bytearray(p.encode_message(msg))
    pos %= len(frame)
    frame[pos:pos + len(junk)] = junk
    try:
        p.decode_message(bytes(frame))
    except (DecodeError, UnknownCommandTypeError, ProtocolError):
        pass


def test_unknown_command_type_rejected():
    raw = {"protocol": 1, "messageId": "m", "graphModelId": "g", "userId": "u",
           "kind": "edit", "commands": [{"type": "Teleport", "id": "n1"}]}
    with pytest.raises(UnknownCommandTypeError):
        p.message_from_dict(raw)


def test_unknown_message_field_rejected():
    raw = {"protocol": 1, "messageId": "m", "graphModelId": "g", "userId": "u",
           "kind": "edit", "commands": [], "color": "red"}
    with pytest.raises(DecodeError):
        p.message_from_dict(raw)


def test_wrong_protocol_version_rejected():
    raw = {"protocol": 2, "messageId": "m", "graphModelId": "g", "userId": "u",
           "kind": "edit", "commands": []}
    with pytest.raises(DecodeError):
        p.message_from_dict(raw)


def test_interaction_commands_only_in_interaction_messages():
    msg = p.Message(messageId="m", graphModelId="g", userId="u", kind="edit",
                    commands=[p.Click(id="n1")])
    with pytest.raises(ProtocolError):
        msg.validate()


def test_edit_requires_commands():
    msg = p.Message(messageId="m", graphModelId="g", userId="u", kind="edit")
    with pytest.raises(ProtocolError):
        msg.validate()


def test_affected_elements_cover_endpoints():
    msg = p.edit_message("g", "u", [
        p.CreateEdge(id="e1", typeName="Flow", sourceId="a", targetId="b"),
        p.DeleteEdge(id="e2", oldState={"sourceId": "c", "targetId": "d"}),
    ])
    assert p.affected_elements(msg) >= {"e1", "a", "b", "e2", "c", "d"}


# -- shared golden vectors ---------------------------------------------------


def _vectors():
    return json.loads(FIXTURES.read_text())["vectors"]


def test_golden_vectors_decode():
    for v in _vectors():
        msg = p.decode_message(v["frame"].encode("utf-8"))
        assert p.message_to_dict(msg) == v["message"], v["name"]


def test_golden_vectors_encode_byte_exact():
    for v in _vectors():
        msg = p.message_from_dict(v["message"])
        assert p.encode_message(msg).decode("utf-8") == v["frame"], v["name"]


def test_golden_vectors_cover_every_command_type():
    seen = set()
    for v in _vectors():
        for c in v["message"]["commands"]:
            seen.add(c["type"])
    assert seen == set(p._COMMAND_TYPES)
