"""Regenerate fixtures/protocol_vectors.json.

The vectors pin the canonical wire encoding (length header + sorted-key
JSON) for one example of every command type plus a revert and a
multi-command broadcast.  Both the Python tests and the browser client
test-suite consume this file, so regenerate it only when the protocol
changes on purpose.
"""

import json
from pathlib import Path

from collabgraph import protocol as p

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "protocol_vectors.json"
MID = "0123456789abcdef0123456789abcdef"


def base_message(kind, commands, **kw):
    return p.Message(
        messageId=MID, graphModelId="m1", userId="alice", kind=kind, commands=commands, **kw
    )


def build_vectors():
    cases = [
        ("create-node", base_message("edit", [p.CreateNode(
            id="n1", typeName="Task", containerId="m1", x=10, y=20, width=80, height=40,
            initialAttributes={"label": ["hello"]})])),
        ("delete-node", base_message("edit", [p.DeleteNode(id="n1", oldState={"x": 10, "y": 20})])),
        ("move-node", base_message("edit", [p.MoveNode(
            id="n1", fromContainerId="m1", toContainerId="m1", from_=[10, 20], to=[1, 1])])),
        ("resize-node", base_message("edit", [p.ResizeNode(
            id="n1", oldSize=[80, 40], newSize=[100, 60])])),
        ("create-edge", base_message("edit", [p.CreateEdge(
            id="e1", typeName="Flow", sourceId="n1", targetId="n2", bendPoints=[[5, 5]])])),
        ("delete-edge", base_message("edit", [p.DeleteEdge(
            id="e1", oldState={"sourceId": "n1", "targetId": "n2"})])),
        ("reconnect-edge", base_message("edit", [p.ReconnectEdge(
            id="e1", oldSource="n1", oldTarget="n2", newSource="n1", newTarget="n3")])),
        ("bend-edge", base_message("edit", [p.BendEdge(
            id="e1", oldBendPoints=[], newBendPoints=[[7, 8], [9, 10]])])),
        ("set-attributes", base_message("edit", [p.SetAttributes(
            id="n1", oldAssignment={"label": ["hello"]}, newAssignment={"label": ["world"]})])),
        ("routing", base_message("edit", [p.Routing(
            editorPreference={"algorithm": "manhattan", "connectorKind": "spline"})])),
        ("click", base_message("interaction", [p.Click(id="n1")])),
        ("double-click", base_message("interaction", [p.DoubleClick(id="n1")])),
        ("context-menu", base_message("interaction", [p.ContextMenu(id="n1", actionId="simulate")])),
        ("restore-element", p.Message(
            messageId=MID, graphModelId="m1", userId="server", kind="revert",
            commands=[
                p.RestoreElement(id="n1", state=None),
                p.RestoreElement(id="n2", state={
                    "meta": "node", "id": "n2", "typeName": "Task", "x": 1, "y": 2,
                    "width": 80, "height": 40, "containerId": "m1",
                    "attributes": {"label": ["x"]}, "version": 3}),
            ],
            modelVersion=7)),
        ("multi-command", base_message("edit", [
            p.MoveNode(id="n1", fromContainerId="m1", toContainerId="m1",
                       from_=[0, 0], to=[5, 5], version=4),
            p.ResizeNode(id="n1", oldSize=[80, 40], newSize=[90, 50], version=5),
        ], modelVersion=12)),
    ]
    vectors = []
    for name, msg in cases:
        frame = p.encode_message(msg)
        vectors.append({
            "name": name,
            "message": p.message_to_dict(msg),
            "canonicalJson": p.canonical_json(p.message_to_dict(msg)).decode("ascii"),
            "frame": frame.decode("utf-8"),
        })
    return vectors


def main():
    vectors = build_vectors()
    for v in vectors:
        decoded = p.decode_message(v["frame"].encode("utf-8"))
        assert p.message_to_dict(decoded) == v["message"], v["name"]
        assert p.encode_message(decoded).decode("utf-8") == v["frame"], v["name"]
    OUT.write_text(
        json.dumps({"protocol": 1, "vectors": vectors}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(vectors)} vectors to {OUT}")


if __name__ == "__main__":
    main()
