"""Controller layer: session registry, transactions, hooks and broadcast.

All mutation of one model funnels through handle_edit / handle_interaction,
which run a guarded transaction, push applied commands onto a command
stack, fire post hooks (whose commands join the same stack), and on commit
broadcast the stack to every subscribed session, the sender included.  A
stale or constraint rejection rolls the whole transaction back and sends a
write-repair revert (authoritative element states) to the sender only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import model as model_mod
from . import protocol as proto
from .errors import (
    DecodeError,
    MalformedCommandError,
    ProtocolError,
    UnknownActionError,
    UnknownElementError,
    UnknownModelError,
    UnknownTypeError,
)
from .model import TransactionLog, apply_command, cached_subtypes, element_to_dict
from .schema import TableStore, store_snapshot

HOOK_POINTS = (
    "postCreate",
    "postMove",
    "postResize",
    "postDelete",
    "postAttributeChange",
    "onClick",
    "onDoubleClick",
    "onContextMenu",
)

_POST_HOOK_FOR_COMMAND = {
    proto.CreateNode: "postCreate",
    proto.CreateEdge: "postCreate",
    proto.MoveNode: "postMove",
    proto.ResizeNode: "postResize",
    proto.DeleteNode: "postDelete",
    proto.DeleteEdge: "postDelete",
    proto.SetAttributes: "postAttributeChange",
}


@dataclass
class Session:
    sessionId: str
    userId: str
    subscribedModelId: str | None = None
    outbound: deque = field(default_factory=deque)
    alive: bool = True
    notify: object = None  # optional callable fired after each enqueue

    def enqueue(self, frame: bytes):
        self.outbound.append(frame)
        if self.notify is not None:
            self.notify()


class HookRegistry:
    """Hooks keyed by (hook point, element type); dispatch is inheritance-aware."""

    def __init__(self, spec):
        self.spec = spec
        self._hooks = {}  # (point, type or action key) -> list of callables

    def register(self, hook_point, element_type_name, hook, action_id=None):
        if hook_point not in HOOK_POINTS:
            raise ValueError(f"unknown hook point {hook_point!r}")
        if not self.spec.has_type(element_type_name):
            raise UnknownTypeError(element_type_name)
        key = (hook_point, element_type_name, action_id)
        self._hooks.setdefault(key, []).append(hook)

    def matching(self, hook_point, element_type_name, action_id=None):
        """Hooks whose registered type covers the element's type, registration order."""
        out = []
        for (point, reg_type, reg_action), hooks in self._hooks.items():
            if point != hook_point or reg_action != action_id:
                continue
            if element_type_name in cached_subtypes(self.spec, reg_type):
                out.extend(hooks)
        return out

    def has_action(self, action_id):
        return any(point == "onContextMenu" and action == action_id for (point, _, action) in self._hooks)


class HookRejected(Exception):
    def __init__(self, result):
        super().__init__(f"hook command rejected: {result.status}")
        self.result = result


class HookApi:
    """The only surface a hook gets: guarded command application on the open transaction."""

    def __init__(self, transaction, trigger=None):
        self._txn = transaction
        self.trigger = trigger
        self.model = transaction.model
        self.spec = transaction.spec

    def apply(self, cmd):
        result = self._txn.apply(cmd, check_stale=False, fire_hooks=False)
        if not result.applied:
            raise HookRejected(result)
        return result


class Transaction:
    """Atomic multi-command application with first-touch rollback."""

    def __init__(self, server, model):
        self.server = server
        self.model = model
        self.spec = server.spec
        self.log = TransactionLog(model)
        self.stack = []  # stamped commands, application order
        self.status = "open"

    def apply(self, cmd, check_stale, fire_hooks=True):
        result = apply_command(self.model, self.spec, cmd, check_stale, log=self.log)
        if not result.applied:
            return result
        stamped = proto.command_from_dict(proto.command_to_dict(cmd))
        if hasattr(stamped, "version"):
            stamped.version = result.version
        self.stack.append(stamped)
        if fire_hooks:
            self._fire_post_hook(cmd)
        return result

    def _fire_post_hook(self, cmd):
        point = _POST_HOOK_FOR_COMMAND.get(type(cmd))
        if point is None:
            return
        type_name = self._type_name_for(cmd)
        if type_name is None:
            return
        api = HookApi(self, trigger=cmd)
        element = self.model.elements.get(cmd.id)
        for hook in self.server.hooks.matching(point, type_name):
            hook(api, element)

    def _type_name_for(self, cmd):
        el = self.model.elements.get(cmd.id)
        if el is not None:
            return el.typeName
        state = getattr(cmd, "oldState", None)
        if state:
            return state.get("typeName")
        return getattr(cmd, "typeName", None)

    def rollback(self):
        self.log.rollback()
        self.stack.clear()
        self.status = "rolledBack"

    def commit(self):
        self.status = "committed"
        return list(self.stack)


class GraphServer:
    """In-process authoritative server for all models of one metamodel."""

    def __init__(self, spec, auto_create=True, store: TableStore | None = None):
        self.spec = spec
        self.auto_create = auto_create
        self.store = store  # None disables snapshot persistence
        self.models = {}  # modelId -> GraphModelInstance
        self.sessions = {}  # sessionId -> Session
        self.registry = {}  # modelId -> list of sessionIds
        self.hooks = HookRegistry(spec)
        self.committed_stacks = {}  # modelId -> list of stamped command lists
        self.counters = {"committed": 0, "rejected": 0, "reverted": 0, "broadcasts": 0}

    # -- model lifecycle ----------------------------------------------

    def create_model(self, model_id=None):
        m = model_mod.new_model(self.spec, model_id)
        self.models[m.id] = m
        self.committed_stacks[m.id] = []
        self._persist(m)
        return m

    def get_model(self, model_id):
        if model_id not in self.models:
            if not self.auto_create:
                raise UnknownModelError(model_id)
            self.create_model(model_id)
        return self.models[model_id]

    def _persist(self, model):
        if self.store is not None:
            store_snapshot(self.store, model)

    # -- registry -----------------------------------------------------

    def register_hook(self, hook_point, element_type_name, hook, action_id=None):
        self.hooks.register(hook_point, element_type_name, hook, action_id)

    def connect(self, user_id, model_id) -> Session:
        """Create a fresh session and subscribe it; the init frame is enqueued."""
        session = Session(sessionId=proto.new_id(), userId=user_id)
        self.handle_connect(session, model_id)
        return session

    def handle_connect(self, session: Session, model_id) -> proto.Message:
        model = self.get_model(model_id)
        if session.subscribedModelId is not None:
            self._unsubscribe(session)
        session.subscribedModelId = model_id
        self.sessions[session.sessionId] = session
        self.registry.setdefault(model_id, [])
        if session.sessionId not in self.registry[model_id]:
            self.registry[model_id].append(session.sessionId)
        init = proto.Message(
            messageId=proto.new_id(),
            graphModelId=model_id,
            userId=session.userId,
            kind="init",
            snapshot=model_mod.model_to_dict(model),
            modelVersion=model.modelVersion,
        )
        session.enqueue(proto.encode_message(init))
        return init

    def handle_disconnect(self, session: Session):
        session.alive = False
        self._unsubscribe(session)
        self.sessions.pop(session.sessionId, None)

    def _unsubscribe(self, session):
        if session.subscribedModelId is not None:
            subs = self.registry.get(session.subscribedModelId, [])
            if session.sessionId in subs:
                subs.remove(session.sessionId)
        session.subscribedModelId = None

    # -- editing ------------------------------------------------------

    def handle_frame(self, session, frame: bytes):
        """Decode and route one inbound frame; protocol errors go back to the sender."""
        try:
            msg = proto.decode_message(frame)
            msg.validate()
            return self.handle_message(session, msg)
        except (ProtocolError, DecodeError, UnknownModelError, UnknownActionError) as exc:
            self._send_error(session, str(exc))
            return "error"

    def handle_message(self, session, msg: proto.Message):
        if msg.kind == "edit":
            return self.handle_edit(session, msg)
        if msg.kind == "interaction":
            return self.handle_interaction(session, msg)
        if msg.kind == "initRequest":
            self.handle_connect(session, msg.graphModelId)
            return "init"
        raise ProtocolError(f"clients may not send kind={msg.kind!r}")

    def handle_edit(self, session, msg: proto.Message):
        msg.validate()
        if msg.kind != "edit":
            raise ProtocolError("handle_edit expects an edit message")
        if session.subscribedModelId != msg.graphModelId:
            raise ProtocolError("session is not subscribed to this model")
        model = self.get_model(msg.graphModelId)
        affected_before = {
            eid: (element_to_dict(model.elements[eid]) if eid in model.elements else None)
            for eid in proto.affected_elements(msg)
        }
        txn = Transaction(self, model)
        try:
            for cmd in msg.commands:
                result = txn.apply(cmd, check_stale=True)
                if not result.applied:
                    txn.rollback()
                    self.counters["rejected"] += 1
                    self._send_revert(session, msg, affected_before, model)
                    return "revert"
        except (HookRejected, UnknownElementError, MalformedCommandError):
            # structurally inapplicable against current central state (e.g. a
            # compound delete raced a concurrent edge creation) — write repair
            txn.rollback()
            self.counters["rejected"] += 1
            self._send_revert(session, msg, affected_before, model)
            return "revert"
        stack = txn.commit()
        self.counters["committed"] += 1
        self.committed_stacks.setdefault(msg.graphModelId, []).append(stack)
        self._persist(model)
        broadcast_msg = proto.Message(
            messageId=msg.messageId,
            graphModelId=msg.graphModelId,
            userId=msg.userId,
            kind="edit",
            commands=stack,
            modelVersion=model.modelVersion,
        )
        self.broadcast(msg.graphModelId, broadcast_msg)
        return "broadcast"

    def handle_interaction(self, session, msg: proto.Message):
        msg.validate()
        if msg.kind != "interaction":
            raise ProtocolError("handle_interaction expects an interaction message")
        model = self.get_model(msg.graphModelId)
        hooks_to_run = []
        for cmd in msg.commands:
            element = model.elements.get(cmd.id)
            type_name = element.typeName if element is not None else None
            if type_name is None:
                continue
            if isinstance(cmd, proto.Click):
                hooks_to_run += [(h, cmd) for h in self.hooks.matching("onClick", type_name)]
            elif isinstance(cmd, proto.DoubleClick):
                hooks_to_run += [(h, cmd) for h in self.hooks.matching("onDoubleClick", type_name)]
            elif isinstance(cmd, proto.ContextMenu):
                if not self.hooks.has_action(cmd.actionId):
                    raise UnknownActionError(cmd.actionId)
                hooks_to_run += [
                    (h, cmd) for h in self.hooks.matching("onContextMenu", type_name, cmd.actionId)
                ]
        if not hooks_to_run:
            return "noop"
        txn = Transaction(self, model)
        try:
            for hook, trigger in hooks_to_run:
                api = HookApi(txn, trigger=trigger)
                hook(api, model.elements.get(trigger.id))
        except HookRejected:
            txn.rollback()
            self.counters["rejected"] += 1
            self._send_revert(session, msg, {}, model)
            return "revert"
        stack = txn.commit()
        if not stack:
            return "noop"
        self.counters["committed"] += 1
        self.committed_stacks.setdefault(msg.graphModelId, []).append(stack)
        self._persist(model)
        broadcast_msg = proto.Message(
            messageId=proto.new_id(),
            graphModelId=msg.graphModelId,
            userId=msg.userId,
            kind="edit",
            commands=stack,
            modelVersion=model.modelVersion,
        )
        self.broadcast(msg.graphModelId, broadcast_msg)
        return "broadcast"

    # -- outbound -----------------------------------------------------

    def _send_revert(self, session, offending_msg, affected_before, model):
        """Write repair: current central state of every element the message named."""
        commands = []
        for eid in sorted(affected_before):
            if eid == model.id:
                commands.append(
                    proto.RestoreElement(
                        id=eid,
                        state={"attributes": model_mod._normalize_attrs(model.attributes),
                               "routing": dict(model.routing)},
                    )
                )
                continue
            current = model.elements.get(eid)
            commands.append(
                proto.RestoreElement(id=eid, state=element_to_dict(current) if current else None)
            )
        revert = proto.Message(
            messageId=offending_msg.messageId,
            graphModelId=offending_msg.graphModelId,
            userId=offending_msg.userId,
            kind="revert",
            commands=commands,
            modelVersion=model.modelVersion,
        )
        self.counters["reverted"] += 1
        session.enqueue(proto.encode_message(revert))

    def _send_error(self, session, reason):
        err = proto.Message(
            messageId=proto.new_id(),
            graphModelId=session.subscribedModelId or "",
            userId=session.userId,
            kind="revert",
            commands=[],
            modelVersion=None,
        )
        # error frames reuse the revert kind with no repair commands; the
        # reason travels out of band for transports that support it
        session.enqueue(proto.encode_message(err))
        session.last_error = reason

    def broadcast(self, model_id, message: proto.Message):
        """Enqueue identical bytes to every subscribed session in one registry pass."""
        frame = proto.encode_message(message)
        self.counters["broadcasts"] += 1
        dropped = []
        for session_id in list(self.registry.get(model_id, [])):
            session = self.sessions.get(session_id)
            if session is None or not session.alive:
                dropped.append(session_id)
                continue
            session.enqueue(frame)
        for session_id in dropped:
            self.registry[model_id].remove(session_id)
