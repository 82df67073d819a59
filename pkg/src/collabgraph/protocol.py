"""Wire types for the replicated command protocol and their canonical codec.

Each frame is one length-delimited UTF-8 JSON object.  Encoding is
canonical: structurally equal messages always produce identical bytes
(sorted keys, fixed separators, all fields present).
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field, fields

from .errors import DecodeError, ProtocolError, UnknownCommandTypeError

PROTOCOL_VERSION = 1

MESSAGE_KINDS = ("edit", "revert", "init", "initRequest", "interaction")


def new_id():
    """128-bit random element/message identifier as lowercase hex."""
    return uuid.uuid4().hex


# ---------------------------------------------------------------------------
# Command variants
# ---------------------------------------------------------------------------


@dataclass
class CreateNode:
    id: str
    typeName: str
    containerId: str
    x: int = 0
    y: int = 0
    width: int = 10
    height: int = 10
    initialAttributes: dict = field(default_factory=dict)
    version: int | None = None  # server stamp on broadcast


@dataclass
class DeleteNode:
    id: str
    oldState: dict = field(default_factory=dict)
    version: int | None = None


@dataclass
class MoveNode:
    id: str
    fromContainerId: str = ""
    toContainerId: str = ""
    from_: list = field(default_factory=lambda: [0, 0])
    to: list = field(default_factory=lambda: [0, 0])
    version: int | None = None


@dataclass
class ResizeNode:
    id: str
    oldSize: list = field(default_factory=lambda: [10, 10])
    newSize: list = field(default_factory=lambda: [10, 10])
    version: int | None = None


@dataclass
class CreateEdge:
    id: str
    typeName: str
    sourceId: str
    targetId: str
    initialAttributes: dict = field(default_factory=dict)
    bendPoints: list = field(default_factory=list)
    version: int | None = None


@dataclass
class DeleteEdge:
    id: str
    oldState: dict = field(default_factory=dict)
    version: int | None = None


@dataclass
class ReconnectEdge:
    id: str
    oldSource: str = ""
    oldTarget: str = ""
    newSource: str = ""
    newTarget: str = ""
    version: int | None = None


@dataclass
class BendEdge:
    id: str
    oldBendPoints: list = field(default_factory=list)
    newBendPoints: list = field(default_factory=list)
    version: int | None = None


@dataclass
class SetAttributes:
    id: str
    oldAssignment: dict = field(default_factory=dict)
    newAssignment: dict = field(default_factory=dict)
    version: int | None = None


@dataclass
class Routing:
    editorPreference: dict = field(default_factory=lambda: {"algorithm": "direct", "connectorKind": "line"})
    version: int | None = None


@dataclass
class Click:
    id: str


@dataclass
class DoubleClick:
    id: str


@dataclass
class ContextMenu:
    id: str
    actionId: str


@dataclass
class RestoreElement:
    """Revert payload: authoritative element state (None = element absent)."""

    id: str
    state: dict | None = None


ELEMENT_COMMANDS = (
    CreateNode,
    DeleteNode,
    MoveNode,
    ResizeNode,
    CreateEdge,
    DeleteEdge,
    ReconnectEdge,
    BendEdge,
    SetAttributes,
)
INTERACTION_COMMANDS = (Click, DoubleClick, ContextMenu)
EDITOR_COMMANDS = (Routing,)

_COMMAND_TYPES = {
    cls.__name__: cls
    for cls in ELEMENT_COMMANDS + INTERACTION_COMMANDS + EDITOR_COMMANDS + (RestoreElement,)
}

ROUTING_ALGORITHMS = ("manhattan", "direct", "orthogonal")


@dataclass
class Message:
    messageId: str
    graphModelId: str
    userId: str
    kind: str
    commands: list = field(default_factory=list)
    snapshot: dict | None = None  # init only: full model state
    modelVersion: int | None = None

    def validate(self):
        if self.kind not in MESSAGE_KINDS:
            raise ProtocolError(f"unknown message kind {self.kind!r}")
        if self.kind == "edit" and not self.commands:
            raise ProtocolError("edit message must carry at least one command")
        if self.kind == "init" and self.snapshot is None:
            raise ProtocolError("init message must carry a snapshot")
        if self.kind == "edit":
            for cmd in self.commands:
                if isinstance(cmd, INTERACTION_COMMANDS):
                    raise ProtocolError("interaction commands travel in kind=interaction messages")
        if self.kind == "interaction":
            for cmd in self.commands:
                if not isinstance(cmd, INTERACTION_COMMANDS):
                    raise ProtocolError("interaction message may carry interaction commands only")


def edit_message(graph_model_id, user_id, commands, message_id=None):
    return Message(
        messageId=message_id or new_id(),
        graphModelId=graph_model_id,
        userId=user_id,
        kind="edit",
        commands=list(commands),
    )


# ---------------------------------------------------------------------------
# Command <-> dict
# ---------------------------------------------------------------------------

# "from" is a Python keyword; the wire field is called "from".
_WIRE_NAMES = {"from_": "from"}
_PY_NAMES = {"from": "from_"}


def command_to_dict(cmd):
    cls = type(cmd)
    if cls.__name__ not in _COMMAND_TYPES:
        raise ProtocolError(f"not a protocol command: {cls.__name__}")
    out = {"type": cls.__name__}
    for f in fields(cmd):
        value = getattr(cmd, f.name)
        if value is None and f.name == "version":
            continue  # server stamp absent until broadcast
        out[_WIRE_NAMES.get(f.name, f.name)] = value
    return out


def command_from_dict(raw, position=0):
    if not isinstance(raw, dict):
        raise DecodeError("command must be an object", position)
    tag = raw.get("type")
    cls = _COMMAND_TYPES.get(tag)
    if cls is None:
        raise UnknownCommandTypeError(tag, position)
    kwargs = {}
    known = {f.name for f in fields(cls)}
    for key, value in raw.items():
        if key == "type":
            continue
        name = _PY_NAMES.get(key, key)
        if name not in known:
            raise DecodeError(f"unknown field {key!r} on {tag}", position)
        kwargs[name] = value
    try:
        cmd = cls(**kwargs)
    except TypeError as exc:
        raise DecodeError(f"bad fields for {tag}: {exc}", position) from exc
    _validate_command(cmd, position)
    return cmd


def _validate_command(cmd, position=0):
    for f in fields(cmd):
        value = getattr(cmd, f.name)
        if f.name in ("id", "typeName", "containerId", "fromContainerId", "toContainerId",
                      "sourceId", "targetId", "oldSource", "oldTarget", "newSource",
                      "newTarget", "actionId"):
            if not isinstance(value, str):
                raise DecodeError(f"field {f.name!r} must be a string", position)
    if isinstance(cmd, (MoveNode,)):
        for name in ("from_", "to"):
            v = getattr(cmd, name)
            if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
                raise DecodeError(f"field {_WIRE_NAMES.get(name, name)!r} must be a coordinate pair", position)
    if isinstance(cmd, ResizeNode):
        for name in ("oldSize", "newSize"):
            v = getattr(cmd, name)
            if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
                raise DecodeError(f"field {name!r} must be a size pair", position)
    if isinstance(cmd, BendEdge):
        for name in ("oldBendPoints", "newBendPoints"):
            v = getattr(cmd, name)
            if not isinstance(v, list) or any(not (isinstance(p, list) and len(p) == 2) for p in v):
                raise DecodeError(f"field {name!r} must be a list of points", position)
    if isinstance(cmd, SetAttributes):
        for name in ("oldAssignment", "newAssignment"):
            v = getattr(cmd, name)
            if not isinstance(v, dict) or any(not isinstance(vals, list) for vals in v.values()):
                raise DecodeError(f"field {name!r} must map names to value lists", position)
    if isinstance(cmd, Routing):
        pref = cmd.editorPreference
        if not isinstance(pref, dict) or pref.get("algorithm") not in ROUTING_ALGORITHMS:
            raise DecodeError("editorPreference needs a known routing algorithm", position)


# ---------------------------------------------------------------------------
# Message codec
# ---------------------------------------------------------------------------


def message_to_dict(msg):
    out = {
        "protocol": PROTOCOL_VERSION,
        "messageId": msg.messageId,
        "graphModelId": msg.graphModelId,
        "userId": msg.userId,
        "kind": msg.kind,
        "commands": [command_to_dict(c) for c in msg.commands],
    }
    if msg.snapshot is not None:
        out["snapshot"] = msg.snapshot
    if msg.modelVersion is not None:
        out["modelVersion"] = msg.modelVersion
    return out


def message_from_dict(raw, position=0):
    if not isinstance(raw, dict):
        raise DecodeError("message must be an object", position)
    if raw.get("protocol") != PROTOCOL_VERSION:
        raise DecodeError(f"unsupported protocol version {raw.get('protocol')!r}", position)
    for key in ("messageId", "graphModelId", "userId", "kind"):
        if not isinstance(raw.get(key), str):
            raise DecodeError(f"field {key!r} must be a string", position)
    extra = set(raw) - {"protocol", "messageId", "graphModelId", "userId", "kind",
                        "commands", "snapshot", "modelVersion"}
    if extra:
        raise DecodeError(f"unknown message fields {sorted(extra)}", position)
    commands_raw = raw.get("commands", [])
    if not isinstance(commands_raw, list):
        raise DecodeError("commands must be a list", position)
    msg = Message(
        messageId=raw["messageId"],
        graphModelId=raw["graphModelId"],
        userId=raw["userId"],
        kind=raw["kind"],
        commands=[command_from_dict(c, position) for c in commands_raw],
        snapshot=raw.get("snapshot"),
        modelVersion=raw.get("modelVersion"),
    )
    if msg.kind not in MESSAGE_KINDS:
        raise DecodeError(f"unknown message kind {msg.kind!r}", position)
    return msg


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")


def encode_message(msg: Message) -> bytes:
    """Canonical frame: decimal payload length, newline, JSON payload."""
    payload = canonical_json(message_to_dict(msg))
    return str(len(payload)).encode("ascii") + b"\n" + payload


def decode_message(octets: bytes) -> Message:
    if not isinstance(octets, (bytes, bytearray)):
        raise DecodeError("frame must be bytes")
    header, sep, rest = bytes(octets).partition(b"\n")
    if not sep:
        raise DecodeError("missing length header", 0)
    try:
        length = int(header.decode("ascii"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise DecodeError(f"bad length header: {exc}", 0) from exc
    if length < 0:
        raise DecodeError("negative length", 0)
    if len(rest) != length:
        raise DecodeError(f"payload length {len(rest)} does not match header {length}", len(header) + 1)
    try:
        raw = json.loads(rest.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"invalid JSON payload: {exc}", len(header) + 1) from exc
    return message_from_dict(raw, len(header) + 1)


def decode_json_message(text):
    """Decode an unframed JSON message object (the socket service sends one per frame)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"invalid JSON payload: {exc}") from exc
    return message_from_dict(raw)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


def affected_elements(msg: Message) -> set:
    """Element ids named by the message's commands, endpoints included."""
    out = set()
    for cmd in msg.commands:
        if isinstance(cmd, Routing):
            continue
        out.add(cmd.id)
        if isinstance(cmd, CreateEdge):
            out.update((cmd.sourceId, cmd.targetId))
        elif isinstance(cmd, ReconnectEdge):
            out.update((cmd.oldSource, cmd.oldTarget, cmd.newSource, cmd.newTarget))
        elif isinstance(cmd, DeleteEdge):
            state = cmd.oldState or {}
            for key in ("sourceId", "targetId"):
                if state.get(key):
                    out.add(state[key])
    return out


def strip_stamps(cmd):
    """Copy of a command without the server version stamp (value identity)."""
    d = command_to_dict(cmd)
    d.pop("version", None)
    d["type"] = type(cmd).__name__
    return command_from_dict(d)


def commands_equal(a, b):
    da, db = command_to_dict(a), command_to_dict(b)
    da.pop("version", None)
    db.pop("version", None)
    return da == db
