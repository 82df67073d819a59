"""Headless client: mirror replica, optimistic local editing, server-priority sync.

The mirror applies a local edit immediately when the (shared) constraint
guard accepts it on the replica, sends the command to the server, and
keeps the message pending until the server echoes it back (commit) or
reverts it (write repair).  Inbound server messages always win: pending
local state touching the same elements is discarded and overwritten.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import model as model_mod
from . import protocol as proto
from .errors import DesyncDetectedError, NotConnectedError
from .model import apply_command, force_apply, validate_model

MAX_PENDING = 32


@dataclass
class LocalEditOutcome:
    status: str  # sent | rejectedLocal
    messageId: str | None = None
    rule_id: str | None = None


@dataclass
class ApplyReport:
    kind: str  # init | self-echo | foreign | revert | desync
    applied_commands: int = 0
    discarded_pending: list = field(default_factory=list)


class MirrorModel:
    """A client's complete local replica plus its unconfirmed outbound messages."""

    def __init__(self, spec, user_id, transport=None, max_pending=MAX_PENDING):
        self.spec = spec
        self.user_id = user_id
        self.transport = transport  # needs .send(frame: bytes)
        self.replica = None
        self.pending = []  # sent-but-unconfirmed Messages, send order
        self.max_pending = max_pending
        self.connected = False
        self.desync = False
        # messageIds discarded locally whose server revert/echo is still due;
        # their optimistic effects may linger in the replica until it arrives
        self._awaiting_repair = set()

    # -- local editing --------------------------------------------------

    def local_edit(self, cmd) -> LocalEditOutcome:
        if not self.connected or self.replica is None:
            raise NotConnectedError("not connected to a model")
        if isinstance(cmd, proto.INTERACTION_COMMANDS):
            msg = proto.Message(
                messageId=proto.new_id(),
                graphModelId=self.replica.id,
                userId=self.user_id,
                kind="interaction",
                commands=[cmd],
            )
            self._send(msg)
            return LocalEditOutcome(status="sent", messageId=msg.messageId)
        return self.local_edit_many([cmd])

    def local_edit_many(self, commands) -> LocalEditOutcome:
        """One atomic multi-command edit (e.g. a compound container delete)."""
        if not self.connected or self.replica is None:
            raise NotConnectedError("not connected to a model")
        if len(self.pending) >= self.max_pending:
            raise NotConnectedError("too many unconfirmed messages in flight")
        log = model_mod.TransactionLog(self.replica)
        for cmd in commands:
            result = apply_command(self.replica, self.spec, cmd, check_stale=False, log=log)
            if not result.applied:
                log.rollback()
                return LocalEditOutcome(status="rejectedLocal", rule_id=result.rule_id)
        msg = proto.edit_message(self.replica.id, self.user_id, commands)
        self.pending.append(msg)
        self._send(msg)
        return LocalEditOutcome(status="sent", messageId=msg.messageId)

    def delete_element(self, element_id) -> LocalEditOutcome:
        """Compound delete: subtree and incident edges in one atomic message."""
        return self.local_edit_many(model_mod.delete_commands_for(self.replica, element_id))

    def _send(self, msg):
        if self.transport is not None:
            self.transport.send(proto.encode_message(msg))

    # -- inbound ---------------------------------------------------------

    def on_server_frame(self, frame: bytes) -> ApplyReport:
        return self.on_server_message(proto.decode_message(frame))

    def on_server_message(self, msg: proto.Message) -> ApplyReport:
        if msg.kind == "init":
            self.replica = model_mod.model_from_dict(msg.snapshot)
            self.pending.clear()
            self.connected = True
            self.desync = False
            return ApplyReport(kind="init")
        if msg.kind == "revert":
            return self._on_revert(msg)
        if msg.kind == "edit":
            return self._on_edit(msg)
        raise DesyncDetectedError(f"unexpected server message kind {msg.kind!r}")

    def _pending_index(self, message_id):
        for i, pending in enumerate(self.pending):
            if pending.messageId == message_id:
                return i
        return None

    def _pending_elements(self):
        out = set()
        for pending in self.pending:
            out |= proto.affected_elements(pending)
        return out

    def _on_edit(self, msg) -> ApplyReport:
        idx = self._pending_index(msg.messageId)
        if idx is not None:
            # self-echo: commit confirmation.  Re-apply every command
            # absolutely — an intervening revert for an older rejected
            # message may have clobbered this message's optimistic effect,
            # and hook-appended tail commands are new either way
            own = self.pending.pop(idx)
            originals = len(own.commands)
            for cmd in msg.commands:
                force_apply(self.replica, self.spec, cmd)
            if msg.modelVersion is not None:
                self.replica.modelVersion = msg.modelVersion
            return ApplyReport(kind="self-echo", applied_commands=len(msg.commands) - originals)

        # foreign edit (or the echo of an already-discarded local message)
        touched = proto.affected_elements(msg)
        discarded = []
        # the echo of a message we already discarded is handled like any
        # foreign edit: it still preempts pending edits on the same elements
        own_discarded = msg.messageId in self._awaiting_repair
        self._awaiting_repair.discard(msg.messageId)
        if touched & self._pending_elements():
            # server priority: drop all conflicting pending local messages;
            # the server will reject them and send reverts
            keep = []
            for pending in self.pending:
                if proto.affected_elements(pending) & touched:
                    discarded.append(pending.messageId)
                    self._awaiting_repair.add(pending.messageId)
                else:
                    keep.append(pending)
            self.pending = keep
        if not own_discarded and not discarded and not self.pending and not self._awaiting_repair:
            # only a clean replica can assert old-state agreement
            self._detect_desync(msg, touched)
        applied = 0
        for cmd in msg.commands:
            if force_apply(self.replica, self.spec, cmd):
                applied += 1
        if msg.modelVersion is not None:
            self.replica.modelVersion = msg.modelVersion
        return ApplyReport(kind="foreign", applied_commands=applied, discarded_pending=discarded)

    def _detect_desync(self, msg, touched):
        """Old-state mismatch outside any pending edit means the replica drifted."""
        for cmd in msg.commands:
            el = self.replica.elements.get(getattr(cmd, "id", None))
            if el is None:
                continue
            mismatch = False
            if isinstance(cmd, proto.MoveNode):
                mismatch = [el.x, el.y] != list(cmd.from_) or el.containerId != cmd.fromContainerId
            elif isinstance(cmd, proto.ResizeNode):
                mismatch = [el.width, el.height] != list(cmd.oldSize)
            elif isinstance(cmd, proto.ReconnectEdge):
                mismatch = el.sourceId != cmd.oldSource or el.targetId != cmd.oldTarget
            elif isinstance(cmd, proto.BendEdge):
                mismatch = [list(p) for p in el.bendPoints] != [list(p) for p in cmd.oldBendPoints]
            if mismatch:
                self.desync = True
                self._request_init()
                raise DesyncDetectedError(f"replica state mismatch on element {cmd.id!r}")

    def _request_init(self):
        if self.transport is None or self.replica is None:
            return
        req = proto.Message(
            messageId=proto.new_id(),
            graphModelId=self.replica.id,
            userId=self.user_id,
            kind="initRequest",
        )
        self.transport.send(proto.encode_message(req))

    def _on_revert(self, msg) -> ApplyReport:
        idx = self._pending_index(msg.messageId)
        if idx is not None:
            self.pending.pop(idx)
        self._awaiting_repair.discard(msg.messageId)
        for cmd in msg.commands:
            model_mod.apply_restore(self.replica, self.spec, cmd)
        if msg.modelVersion is not None:
            self.replica.modelVersion = msg.modelVersion
        return ApplyReport(kind="revert", applied_commands=len(msg.commands))

    # -- validation view -------------------------------------------------

    def validation(self):
        return validate_model(self.replica, self.spec)


# ---------------------------------------------------------------------------
# View model projection (pure function of replica + styles)
# ---------------------------------------------------------------------------


@dataclass
class DrawableShape:
    kind: str
    x: float
    y: float
    width: float
    height: float
    points: list = field(default_factory=list)
    text: str = ""
    appearance: object = None
    children: list = field(default_factory=list)


@dataclass
class CanvasNode:
    elementId: str
    typeName: str
    shape: DrawableShape = None
    selected: bool = False


@dataclass
class CanvasEdge:
    elementId: str
    typeName: str
    path: list = field(default_factory=list)  # source anchor, bends, target anchor
    decorators: list = field(default_factory=list)  # (x, y, graphic)
    appearance: object = None


@dataclass
class PaletteEntry:
    typeName: str
    container: bool


@dataclass
class PropertyField:
    name: str
    valueType: str
    lower: int
    upper: int
    literals: tuple = ()


@dataclass
class ViewModel:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    palette: list = field(default_factory=list)
    propertyForms: dict = field(default_factory=dict)  # typeName -> [PropertyField]
    diagnostics: list = field(default_factory=list)


def _anchor(parent_x, parent_y, parent_w, parent_h, child_w, child_h, position):
    if position.hAlign == "left":
        x = parent_x
    elif position.hAlign == "right":
        x = parent_x + parent_w - child_w
    else:
        x = parent_x + (parent_w - child_w) / 2
    if position.vAlign == "top":
        y = parent_y
    elif position.vAlign == "bottom":
        y = parent_y + parent_h - child_h
    else:
        y = parent_y + (parent_h - child_h) / 2
    return x + position.dx, y + position.dy


def _bind_text(template, attributes):
    out = template
    for name, values in attributes.items():
        out = out.replace("${" + name + "}", str(values[0]) if values else "")
    return out


def resolve_shape(shape, x, y, width, height, attributes):
    """Instantiate a style shape tree at concrete element geometry."""
    if shape.kind == "polyline":
        drawn = DrawableShape(
            kind="polyline",
            x=x,
            y=y,
            width=width,
            height=height,
            points=[[x + px, y + py] for px, py in shape.points],
            appearance=shape.appearance,
        )
    elif shape.kind == "text":
        drawn = DrawableShape(
            kind="text",
            x=x,
            y=y,
            width=0,
            height=0,
            text=_bind_text(shape.value, attributes),
            appearance=shape.appearance,
        )
    else:
        drawn = DrawableShape(
            kind=shape.kind, x=x, y=y, width=width, height=height, appearance=shape.appearance
        )
    for inner in shape.innerShapes:
        iw = inner.width if inner.width is not None else 0
        ih = inner.height if inner.height is not None else 0
        ix, iy = _anchor(drawn.x, drawn.y, width, height, iw, ih, inner.position)
        drawn.children.append(resolve_shape(inner, ix, iy, iw, ih, attributes))
    return drawn


def _edge_path(model, edge):
    src = model.elements[edge.sourceId]
    tgt = model.elements[edge.targetId]
    start = [src.x + src.width / 2, src.y + src.height / 2]
    end = [tgt.x + tgt.width / 2, tgt.y + tgt.height / 2]
    return [start] + [list(p) for p in edge.bendPoints] + [end]


def point_along(path, fraction):
    """Point at a fraction of the polyline's total length."""
    total = 0.0
    segments = []
    for a, b in zip(path, path[1:]):
        length = ((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2) ** 0.5
        segments.append((a, b, length))
        total += length
    if total == 0:
        return list(path[0])
    target = max(0.0, min(1.0, fraction)) * total
    walked = 0.0
    for a, b, length in segments:
        if walked + length >= target or (a, b, length) == segments[-1]:
            t = 0.0 if length == 0 else (target - walked) / length
            return [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
        walked += length
    return list(path[-1])


def render_state(mirror_or_model, spec=None) -> ViewModel:
    """Deterministic projection of a replica into drawable items."""
    if spec is None:
        model = mirror_or_model.replica
        spec = mirror_or_model.spec
    else:
        model = mirror_or_model
    vm = ViewModel()
    for t in sorted(spec.concrete_node_types(), key=lambda t: t.name):
        vm.palette.append(PaletteEntry(typeName=t.name, container=spec.is_container_type(t.name)))
    for t in sorted(spec.all_types(), key=lambda t: t.name):
        vm.propertyForms[t.name] = [
            PropertyField(a.name, a.valueType, a.lower, a.upper, a.literals)
            for a in model_mod.cached_attributes(spec, t.name)
        ]
    if model is None:
        return vm
    for eid in sorted(model.elements):
        el = model.elements[eid]
        if isinstance(el, model_mod.Edge):
            style = spec.styles.edgeStyles.get(el.typeName)
            path = _edge_path(model, el)
            decorators = []
            if style:
                for d in style.decorators:
                    px, py = point_along(path, d.location)
                    graphic = d.arrowHead if d.arrowHead is not None else resolve_shape(
                        d.shape, px, py, d.shape.width or 0, d.shape.height or 0, el.attributes
                    )
                    decorators.append((px, py, graphic))
            vm.edges.append(
                CanvasEdge(
                    elementId=el.id,
                    typeName=el.typeName,
                    path=path,
                    decorators=decorators,
                    appearance=style.appearance if style else None,
                )
            )
        else:
            style = spec.styles.nodeStyles.get(el.typeName)
            shape = None
            if style:
                shape = resolve_shape(style.mainShape, el.x, el.y, el.width, el.height, el.attributes)
            vm.nodes.append(CanvasNode(elementId=el.id, typeName=el.typeName, shape=shape))
    vm.diagnostics = validate_model(model, spec)
    return vm
