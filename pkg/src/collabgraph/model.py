"""Runtime graph model instances, the constraint guard and command application.

Shared by the server (authoritative model) and the client (mirror replica):
both sides run the same guard and the same mutation engine, which is what
makes local rejection equivalent to server rejection.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from . import protocol as proto
from .errors import MalformedCommandError, NotInvertibleError, UnknownElementError
from .metamodel import Diagnostic, flatten_attributes, subtypes_of

DEFAULT_ROUTING = {"algorithm": "direct", "connectorKind": "line"}


@dataclass
class Node:
    id: str
    typeName: str
    x: int = 0
    y: int = 0
    width: int = 10
    height: int = 10
    containerId: str = ""
    attributes: dict = field(default_factory=dict)
    version: int = 0


@dataclass
class Container(Node):
    children: list = field(default_factory=list)


@dataclass
class Edge:
    id: str
    typeName: str
    sourceId: str = ""
    targetId: str = ""
    bendPoints: list = field(default_factory=list)
    attributes: dict = field(default_factory=dict)
    version: int = 0


@dataclass
class GraphModelInstance:
    id: str
    typeName: str
    attributes: dict = field(default_factory=dict)
    elements: dict = field(default_factory=dict)
    rootChildren: list = field(default_factory=list)
    modelVersion: int = 0
    routing: dict = field(default_factory=lambda: dict(DEFAULT_ROUTING))

    def element(self, element_id):
        if element_id not in self.elements:
            raise UnknownElementError(element_id)
        return self.elements[element_id]

    def children_of(self, container_id):
        if container_id == self.id:
            return self.rootChildren
        el = self.element(container_id)
        if not isinstance(el, Container):
            raise MalformedCommandError(f"{container_id!r} is not a container")
        return el.children

    def edges(self):
        return [e for e in self.elements.values() if isinstance(e, Edge)]

    def nodes(self):
        return [n for n in self.elements.values() if isinstance(n, Node)]


def new_model(spec, model_id=None):
    """Fresh empty model instance with default root attributes."""
    attrs = default_attributes(spec, spec.graphModel.name)
    return GraphModelInstance(
        id=model_id or proto.new_id(),
        typeName=spec.graphModel.name,
        attributes=attrs,
    )


def default_attributes(spec, type_name):
    out = {}
    for a in flatten_attributes(spec, type_name):
        if a.defaultValue is not None:
            out[a.name] = [a.defaultValue]
        else:
            out[a.name] = []
    return out


# ---------------------------------------------------------------------------
# Cached spec queries (the guard runs on every command)
# ---------------------------------------------------------------------------


def _spec_cache(spec):
    cache = spec.__dict__.get("_query_cache")
    if cache is None:
        cache = {"subtypes": {}, "flat": {}, "embeds": {}, "conns": {}}
        spec.__dict__["_query_cache"] = cache
    return cache


def cached_subtypes(spec, type_name):
    cache = _spec_cache(spec)["subtypes"]
    if type_name not in cache:
        cache[type_name] = frozenset(subtypes_of(spec, type_name))
    return cache[type_name]


def cached_attributes(spec, type_name):
    cache = _spec_cache(spec)["flat"]
    if type_name not in cache:
        cache[type_name] = tuple(flatten_attributes(spec, type_name))
    return cache[type_name]


def cached_embeddings(spec, type_name):
    cache = _spec_cache(spec)["embeds"]
    if type_name not in cache:
        cache[type_name] = tuple(spec.embeddings_of(type_name))
    return cache[type_name]


def cached_connections(spec, type_name, direction):
    cache = _spec_cache(spec)["conns"]
    key = (type_name, direction)
    if key not in cache:
        cache[key] = tuple(spec.connections_of(type_name, direction))
    return cache[key]


# ---------------------------------------------------------------------------
# Constraint guard
# ---------------------------------------------------------------------------

OK = ("ok", None)


def _violation(rule_id):
    return ("violation", rule_id)


def check_embedding(model, spec, container_id, node_type_name, delta):
    """Upper-bound check for placing (or removing) a node in a container."""
    if delta < 0:
        return OK
    if container_id == model.id:
        container_type = model.typeName
        children = model.rootChildren
    else:
        el = model.element(container_id)
        if not isinstance(el, Container):
            return _violation("NoEmbedding")
        container_type = el.typeName
        children = el.children
    matched = False
    for constraint in cached_embeddings(spec, container_type):
        group = cached_subtypes(spec, constraint.nodeTypeName)
        if node_type_name not in group:
            continue
        matched = True
        if constraint.upper != -1:
            count = sum(1 for cid in children if model.elements[cid].typeName in group)
            if count + delta > constraint.upper:
                return _violation("EmbeddingUpper")
    if not matched:
        return _violation("NoEmbedding")
    return OK


def _connection_ok(model, spec, node_id, direction, edge_type_name, delta, ignore_edge=None):
    node = model.element(node_id)
    matched = False
    for constraint in cached_connections(spec, node.typeName, direction):
        group = cached_subtypes(spec, constraint.edgeTypeName)
        if edge_type_name not in group:
            continue
        matched = True
        if constraint.upper != -1:
            endpoint = "sourceId" if direction == "outgoing" else "targetId"
            count = sum(
                1
                for e in model.elements.values()
                if isinstance(e, Edge)
                and e.id != ignore_edge
                and getattr(e, endpoint) == node_id
                and e.typeName in group
            )
            if count + delta > constraint.upper:
                return _violation("ConnectionUpper")
    if not matched:
        return _violation("NoConnection")
    return OK


def check_connection(model, spec, source_id, target_id, edge_type_name, delta, ignore_edge=None):
    """Upper-bound check for drawing (or removing) an edge between two nodes."""
    if delta < 0:
        return OK
    out = _connection_ok(model, spec, source_id, "outgoing", edge_type_name, delta, ignore_edge)
    if out[0] != "ok":
        return out
    return _connection_ok(model, spec, target_id, "incoming", edge_type_name, delta, ignore_edge)


def _check_attribute_values(spec, type_name, assignment):
    defs = {a.name: a for a in cached_attributes(spec, type_name)}
    for name, values in assignment.items():
        adef = defs.get(name)
        if adef is None:
            return _violation("UnknownAttribute")
        if adef.upper != -1 and len(values) > adef.upper:
            return _violation("AttributeUpper")
        for v in values:
            if not _literal_matches(adef, v):
                return _violation("AttributeType")
    return OK


def _literal_matches(adef, value):
    vt = adef.valueType
    if vt == "string":
        return isinstance(value, str)
    if vt == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if vt == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if vt == "boolean":
        return isinstance(value, bool)
    if vt == "enum":
        return value in adef.literals
    return False


# ---------------------------------------------------------------------------
# Transaction backup log
# ---------------------------------------------------------------------------

_MISSING = object()


class TransactionLog:
    """First-touch backups so a rejected transaction can be rolled back exactly."""

    def __init__(self, model):
        self.model = model
        self._elements = {}
        self._meta = None

    def note_element(self, element_id):
        if element_id not in self._elements:
            current = self.model.elements.get(element_id, _MISSING)
            self._elements[element_id] = _MISSING if current is _MISSING else copy.deepcopy(current)

    def note_meta(self):
        if self._meta is None:
            self._meta = (
                list(self.model.rootChildren),
                self.model.modelVersion,
                dict(self.model.routing),
                copy.deepcopy(self.model.attributes),
            )

    def rollback(self):
        for element_id, backup in self._elements.items():
            if backup is _MISSING:
                self.model.elements.pop(element_id, None)
            else:
                self.model.elements[element_id] = backup
        if self._meta is not None:
            children, version, routing, attrs = self._meta
            self.model.rootChildren[:] = children
            self.model.modelVersion = version
            self.model.routing = routing
            self.model.attributes = attrs
        self._elements.clear()
        self._meta = None


# ---------------------------------------------------------------------------
# Command application
# ---------------------------------------------------------------------------


@dataclass
class CommandResult:
    status: str  # applied | rejectedConstraint | rejectedStale
    rule_id: str | None = None
    element_id: str | None = None
    inverse: object = None
    version: int | None = None  # post-apply version of the touched element

    @property
    def applied(self):
        return self.status == "applied"


def _stale(element_id):
    return CommandResult(status="rejectedStale", element_id=element_id)


def _rejected(rule_id):
    return CommandResult(status="rejectedConstraint", rule_id=rule_id)


def _applied(inverse, version=None):
    return CommandResult(status="applied", inverse=inverse, version=version)


def _touch(log, model, element_id):
    if log is not None:
        log.note_element(element_id)


def _touch_meta(log):
    if log is not None:
        log.note_meta()


def apply_command(model, spec, cmd, check_stale, log=None):
    """Apply one command to the model under the constraint guard.

    check_stale compares the command's old-state payload against the
    model (the server does this; a client editing its own replica does
    not).  A rejected command leaves the model untouched.  When a
    TransactionLog is passed, every mutation is backed up first so a
    multi-command transaction can be rolled back.
    """
    handler = _HANDLERS.get(type(cmd))
    if handler is None:
        raise MalformedCommandError(f"{type(cmd).__name__} cannot be applied to a model")
    return handler(model, spec, cmd, check_stale, log)


def _missing(model, cmd_id, check_stale):
    if check_stale:
        return _stale(cmd_id)
    raise UnknownElementError(cmd_id)


def _resolve_container(model, container_id):
    if container_id == model.id:
        return model.rootChildren
    el = model.elements.get(container_id)
    if el is None or not isinstance(el, Container):
        return None
    return el.children


def _apply_create_node(model, spec, cmd, check_stale, log):
    if cmd.id in model.elements:
        if check_stale:
            return _stale(cmd.id)
        raise MalformedCommandError(f"element {cmd.id!r} already exists")
    if not spec.is_node_like(cmd.typeName) or spec.type_named(cmd.typeName).abstract:
        return _rejected("AbstractType")
    if cmd.width <= 0 or cmd.height <= 0:
        raise MalformedCommandError("width and height must be positive")
    children = _resolve_container(model, cmd.containerId)
    if children is None:
        return _missing(model, cmd.containerId, check_stale)
    verdict = check_embedding(model, spec, cmd.containerId, cmd.typeName, +1)
    if verdict[0] != "ok":
        return _rejected(verdict[1])
    attrs = default_attributes(spec, cmd.typeName)
    attrs.update({k: list(v) for k, v in (cmd.initialAttributes or {}).items()})
    verdict = _check_attribute_values(spec, cmd.typeName, attrs)
    if verdict[0] != "ok":
        return _rejected(verdict[1])

    _touch(log, model, cmd.id)
    cls = Container if spec.is_container_type(cmd.typeName) else Node
    element = cls(
        id=cmd.id,
        typeName=cmd.typeName,
        x=cmd.x,
        y=cmd.y,
        width=cmd.width,
        height=cmd.height,
        containerId=cmd.containerId,
        attributes=attrs,
        version=1,
    )
    model.elements[cmd.id] = element
    if cmd.containerId == model.id:
        _touch_meta(log)
    else:
        _touch(log, model, cmd.containerId)
    _resolve_container(model, cmd.containerId).append(cmd.id)
    _touch_meta(log)
    model.modelVersion += 1
    inverse = proto.DeleteNode(id=cmd.id, oldState=element_to_dict(element))
    return _applied(inverse, element.version)


def _incident_edges(model, node_id):
    return [e for e in model.edges() if e.sourceId == node_id or e.targetId == node_id]


def _apply_delete_node(model, spec, cmd, check_stale, log):
    element = model.elements.get(cmd.id)
    if element is None or isinstance(element, Edge):
        return _missing(model, cmd.id, check_stale)
    if isinstance(element, Container) and element.children:
        raise MalformedCommandError("container still has children; delete them first")
    if _incident_edges(model, cmd.id):
        raise MalformedCommandError("node still has incident edges; delete them first")
    inverse = proto.CreateNode(
        id=element.id,
        typeName=element.typeName,
        containerId=element.containerId,
        x=element.x,
        y=element.y,
        width=element.width,
        height=element.height,
        initialAttributes={k: list(v) for k, v in element.attributes.items()},
    )
    _touch(log, model, cmd.id)
    if element.containerId == model.id:
        _touch_meta(log)
    else:
        _touch(log, model, element.containerId)
    container_children = _resolve_container(model, element.containerId)
    if container_children is not None and cmd.id in container_children:
        container_children.remove(cmd.id)
    del model.elements[cmd.id]
    _touch_meta(log)
    model.modelVersion += 1
    return _applied(inverse, None)


def _subtree_ids(model, root_id):
    out = [root_id]
    el = model.elements.get(root_id)
    if isinstance(el, Container):
        for child in el.children:
            out.extend(_subtree_ids(model, child))
    return out


def _apply_move_node(model, spec, cmd, check_stale, log):
    element = model.elements.get(cmd.id)
    if element is None or isinstance(element, Edge):
        return _missing(model, cmd.id, check_stale)
    if check_stale:
        if [element.x, element.y] != list(cmd.from_) or element.containerId != cmd.fromContainerId:
            return _stale(cmd.id)
    to_children = _resolve_container(model, cmd.toContainerId)
    if to_children is None:
        return _missing(model, cmd.toContainerId, check_stale)
    if isinstance(element, Container) and cmd.toContainerId in _subtree_ids(model, cmd.id):
        return _rejected("ContainmentCycle")
    if cmd.toContainerId != element.containerId:
        verdict = check_embedding(model, spec, cmd.toContainerId, element.typeName, +1)
        if verdict[0] != "ok":
            return _rejected(verdict[1])

    dx = cmd.to[0] - cmd.from_[0]
    dy = cmd.to[1] - cmd.from_[1]
    inverse = proto.MoveNode(
        id=cmd.id,
        fromContainerId=cmd.toContainerId,
        toContainerId=cmd.fromContainerId,
        from_=list(cmd.to),
        to=list(cmd.from_),
    )
    for sub_id in _subtree_ids(model, cmd.id):
        _touch(log, model, sub_id)
        sub = model.elements[sub_id]
        sub.x += dx
        sub.y += dy
    if element.containerId != cmd.toContainerId:
        for cid in (element.containerId, cmd.toContainerId):
            if cid == model.id:
                _touch_meta(log)
            else:
                _touch(log, model, cid)
        old_children = _resolve_container(model, element.containerId)
        if old_children is not None and cmd.id in old_children:
            old_children.remove(cmd.id)
        to_children = _resolve_container(model, cmd.toContainerId)
        to_children.append(cmd.id)
        element.containerId = cmd.toContainerId
    element.version += 1
    _touch_meta(log)
    model.modelVersion += 1
    return _applied(inverse, element.version)


def _apply_resize_node(model, spec, cmd, check_stale, log):
    element = model.elements.get(cmd.id)
    if element is None or isinstance(element, Edge):
        return _missing(model, cmd.id, check_stale)
    if check_stale and [element.width, element.height] != list(cmd.oldSize):
        return _stale(cmd.id)
    if cmd.newSize[0] <= 0 or cmd.newSize[1] <= 0:
        raise MalformedCommandError("size must stay positive")
    _touch(log, model, cmd.id)
    inverse = proto.ResizeNode(id=cmd.id, oldSize=list(cmd.newSize), newSize=list(cmd.oldSize))
    element.width, element.height = cmd.newSize
    element.version += 1
    _touch_meta(log)
    model.modelVersion += 1
    return _applied(inverse, element.version)


def _apply_create_edge(model, spec, cmd, check_stale, log):
    if cmd.id in model.elements:
        if check_stale:
            return _stale(cmd.id)
        raise MalformedCommandError(f"element {cmd.id!r} already exists")
    if not spec.is_edge_type(cmd.typeName) or spec.type_named(cmd.typeName).abstract:
        return _rejected("AbstractType")
    for endpoint in (cmd.sourceId, cmd.targetId):
        el = model.elements.get(endpoint)
        if el is None or isinstance(el, Edge):
            return _missing(model, endpoint, check_stale)
    verdict = check_connection(model, spec, cmd.sourceId, cmd.targetId, cmd.typeName, +1)
    if verdict[0] != "ok":
        return _rejected(verdict[1])
    attrs = default_attributes(spec, cmd.typeName)
    attrs.update({k: list(v) for k, v in (cmd.initialAttributes or {}).items()})
    verdict = _check_attribute_values(spec, cmd.typeName, attrs)
    if verdict[0] != "ok":
        return _rejected(verdict[1])

    _touch(log, model, cmd.id)
    edge = Edge(
        id=cmd.id,
        typeName=cmd.typeName,
        sourceId=cmd.sourceId,
        targetId=cmd.targetId,
        bendPoints=[list(p) for p in (cmd.bendPoints or [])],
        attributes=attrs,
        version=1,
    )
    model.elements[cmd.id] = edge
    _touch_meta(log)
    model.modelVersion += 1
    inverse = proto.DeleteEdge(id=cmd.id, oldState=element_to_dict(edge))
    return _applied(inverse, edge.version)


def _apply_delete_edge(model, spec, cmd, check_stale, log):
    element = model.elements.get(cmd.id)
    if element is None or not isinstance(element, Edge):
        return _missing(model, cmd.id, check_stale)
    inverse = proto.CreateEdge(
        id=element.id,
        typeName=element.typeName,
        sourceId=element.sourceId,
        targetId=element.targetId,
        initialAttributes={k: list(v) for k, v in element.attributes.items()},
        bendPoints=[list(p) for p in element.bendPoints],
    )
    _touch(log, model, cmd.id)
    del model.elements[cmd.id]
    _touch_meta(log)
    model.modelVersion += 1
    return _applied(inverse, None)


def _apply_reconnect_edge(model, spec, cmd, check_stale, log):
    element = model.elements.get(cmd.id)
    if element is None or not isinstance(element, Edge):
        return _missing(model, cmd.id, check_stale)
    if check_stale and (element.sourceId != cmd.oldSource or element.targetId != cmd.oldTarget):
        return _stale(cmd.id)
    for endpoint in (cmd.newSource, cmd.newTarget):
        el = model.elements.get(endpoint)
        if el is None or isinstance(el, Edge):
            return _missing(model, endpoint, check_stale)
    verdict = check_connection(
        model, spec, cmd.newSource, cmd.newTarget, element.typeName, +1, ignore_edge=cmd.id
    )
    if verdict[0] != "ok":
        return _rejected(verdict[1])
    _touch(log, model, cmd.id)
    inverse = proto.ReconnectEdge(
        id=cmd.id,
        oldSource=cmd.newSource,
        oldTarget=cmd.newTarget,
        newSource=cmd.oldSource,
        newTarget=cmd.oldTarget,
    )
    element.sourceId = cmd.newSource
    element.targetId = cmd.newTarget
    element.version += 1
    _touch_meta(log)
    model.modelVersion += 1
    return _applied(inverse, element.version)


def _apply_bend_edge(model, spec, cmd, check_stale, log):
    element = model.elements.get(cmd.id)
    if element is None or not isinstance(element, Edge):
        return _missing(model, cmd.id, check_stale)
    if check_stale and [list(p) for p in element.bendPoints] != [list(p) for p in cmd.oldBendPoints]:
        return _stale(cmd.id)
    _touch(log, model, cmd.id)
    inverse = proto.BendEdge(
        id=cmd.id,
        oldBendPoints=[list(p) for p in cmd.newBendPoints],
        newBendPoints=[list(p) for p in cmd.oldBendPoints],
    )
    element.bendPoints = [list(p) for p in cmd.newBendPoints]
    element.version += 1
    _touch_meta(log)
    model.modelVersion += 1
    return _applied(inverse, element.version)


def _apply_set_attributes(model, spec, cmd, check_stale, log):
    if cmd.id == model.id:
        target = model
        type_name = model.typeName
    else:
        target = model.elements.get(cmd.id)
        if target is None:
            return _missing(model, cmd.id, check_stale)
        type_name = target.typeName
    if check_stale and _normalize_attrs(target.attributes) != _normalize_attrs(cmd.oldAssignment):
        return _stale(cmd.id)
    verdict = _check_attribute_values(spec, type_name, cmd.newAssignment)
    if verdict[0] != "ok":
        return _rejected(verdict[1])
    inverse = proto.SetAttributes(
        id=cmd.id,
        oldAssignment={k: list(v) for k, v in cmd.newAssignment.items()},
        newAssignment={k: list(v) for k, v in target.attributes.items()},
    )
    if target is model:
        _touch_meta(log)
        model.attributes = {k: list(v) for k, v in cmd.newAssignment.items()}
    else:
        _touch(log, model, cmd.id)
        target.attributes = {k: list(v) for k, v in cmd.newAssignment.items()}
        target.version += 1
    _touch_meta(log)
    model.modelVersion += 1
    version = None if target is model else target.version
    return _applied(inverse, version)


def _apply_routing(model, spec, cmd, check_stale, log):
    _touch_meta(log)
    inverse = proto.Routing(editorPreference=dict(model.routing))
    model.routing = dict(cmd.editorPreference)
    model.modelVersion += 1
    return _applied(inverse, None)


_HANDLERS = {
    proto.CreateNode: _apply_create_node,
    proto.DeleteNode: _apply_delete_node,
    proto.MoveNode: _apply_move_node,
    proto.ResizeNode: _apply_resize_node,
    proto.CreateEdge: _apply_create_edge,
    proto.DeleteEdge: _apply_delete_edge,
    proto.ReconnectEdge: _apply_reconnect_edge,
    proto.BendEdge: _apply_bend_edge,
    proto.SetAttributes: _apply_set_attributes,
    proto.Routing: _apply_routing,
}


def invert(cmd):
    """Inverse command; applying cmd then invert(cmd) restores the model."""
    if isinstance(cmd, (proto.Click, proto.DoubleClick, proto.ContextMenu, proto.Routing)):
        raise NotInvertibleError(f"{type(cmd).__name__} has no inverse")
    if isinstance(cmd, proto.CreateNode):
        node = Node(
            id=cmd.id,
            typeName=cmd.typeName,
            x=cmd.x,
            y=cmd.y,
            width=cmd.width,
            height=cmd.height,
            containerId=cmd.containerId,
            attributes={k: list(v) for k, v in (cmd.initialAttributes or {}).items()},
            version=1,
        )
        return proto.DeleteNode(id=cmd.id, oldState=element_to_dict(node))
    if isinstance(cmd, proto.DeleteNode):
        s = cmd.oldState
        return proto.CreateNode(
            id=cmd.id,
            typeName=s["typeName"],
            containerId=s["containerId"],
            x=s["x"],
            y=s["y"],
            width=s["width"],
            height=s["height"],
            initialAttributes={k: list(v) for k, v in s.get("attributes", {}).items()},
        )
    if isinstance(cmd, proto.MoveNode):
        return proto.MoveNode(
            id=cmd.id,
            fromContainerId=cmd.toContainerId,
            toContainerId=cmd.fromContainerId,
            from_=list(cmd.to),
            to=list(cmd.from_),
        )
    if isinstance(cmd, proto.ResizeNode):
        return proto.ResizeNode(id=cmd.id, oldSize=list(cmd.newSize), newSize=list(cmd.oldSize))
    if isinstance(cmd, proto.CreateEdge):
        edge = Edge(
            id=cmd.id,
            typeName=cmd.typeName,
            sourceId=cmd.sourceId,
            targetId=cmd.targetId,
            bendPoints=[list(p) for p in (cmd.bendPoints or [])],
            attributes={k: list(v) for k, v in (cmd.initialAttributes or {}).items()},
            version=1,
        )
        return proto.DeleteEdge(id=cmd.id, oldState=element_to_dict(edge))
    if isinstance(cmd, proto.DeleteEdge):
        s = cmd.oldState
        return proto.CreateEdge(
            id=cmd.id,
            typeName=s["typeName"],
            sourceId=s["sourceId"],
            targetId=s["targetId"],
            initialAttributes={k: list(v) for k, v in s.get("attributes", {}).items()},
            bendPoints=[list(p) for p in s.get("bendPoints", [])],
        )
    if isinstance(cmd, proto.ReconnectEdge):
        return proto.ReconnectEdge(
            id=cmd.id,
            oldSource=cmd.newSource,
            oldTarget=cmd.newTarget,
            newSource=cmd.oldSource,
            newTarget=cmd.oldTarget,
        )
    if isinstance(cmd, proto.BendEdge):
        return proto.BendEdge(
            id=cmd.id,
            oldBendPoints=[list(p) for p in cmd.newBendPoints],
            newBendPoints=[list(p) for p in cmd.oldBendPoints],
        )
    if isinstance(cmd, proto.SetAttributes):
        return proto.SetAttributes(
            id=cmd.id,
            oldAssignment={k: list(v) for k, v in cmd.newAssignment.items()},
            newAssignment={k: list(v) for k, v in cmd.oldAssignment.items()},
        )
    if isinstance(cmd, proto.RestoreElement):
        raise NotInvertibleError("RestoreElement has no inverse")
    raise NotInvertibleError(f"cannot invert {type(cmd).__name__}")


# ---------------------------------------------------------------------------
# Forced application (client overwrite of replica state by server commands)
# ---------------------------------------------------------------------------


def force_apply(model, spec, cmd):
    """Overwrite replica state with a server command's new-state fields.

    No guard, no stale check.  Commands on elements missing locally are
    skipped; later authoritative messages resolve the gap.  Element
    versions are taken from the server's stamp when present.
    """
    if isinstance(cmd, proto.RestoreElement):
        apply_restore(model, spec, cmd)
        return True
    if isinstance(cmd, (proto.Click, proto.DoubleClick, proto.ContextMenu)):
        return False
    if isinstance(cmd, proto.Routing):
        model.routing = dict(cmd.editorPreference)
        return True
    if isinstance(cmd, proto.CreateNode):
        model.elements.pop(cmd.id, None)
        _detach_everywhere(model, cmd.id)
        attrs = default_attributes(spec, cmd.typeName)
        attrs.update({k: list(v) for k, v in (cmd.initialAttributes or {}).items()})
        cls = Container if spec.is_container_type(cmd.typeName) else Node
        element = cls(
            id=cmd.id,
            typeName=cmd.typeName,
            x=cmd.x,
            y=cmd.y,
            width=cmd.width,
            height=cmd.height,
            containerId=cmd.containerId,
            attributes=attrs,
            version=1,
        )
        model.elements[cmd.id] = element
        # container may be locally absent (discarded optimistic delete);
        # the upcoming revert restores it with the authoritative child list
        children = _resolve_container(model, cmd.containerId)
        if children is not None:
            children.append(cmd.id)
        model.modelVersion += 1
        result = CommandResult(status="applied", version=element.version)
    elif isinstance(cmd, proto.CreateEdge):
        model.elements.pop(cmd.id, None)
        # endpoints may be locally absent for the same reason; a dangling
        # edge here is always transient — the server serialized this create
        # after the endpoints existed centrally
        attrs = default_attributes(spec, cmd.typeName)
        attrs.update({k: list(v) for k, v in (cmd.initialAttributes or {}).items()})
        edge = Edge(
            id=cmd.id,
            typeName=cmd.typeName,
            sourceId=cmd.sourceId,
            targetId=cmd.targetId,
            bendPoints=[list(p) for p in (cmd.bendPoints or [])],
            attributes=attrs,
            version=1,
        )
        model.elements[cmd.id] = edge
        model.modelVersion += 1
        result = CommandResult(status="applied", version=edge.version)
    elif isinstance(cmd, (proto.DeleteNode, proto.DeleteEdge)):
        el = model.elements.get(cmd.id)
        if el is None:
            return False
        _remove_element(model, cmd.id)
        model.modelVersion += 1
        return True
    elif isinstance(cmd, proto.MoveNode):
        el = model.elements.get(cmd.id)
        if el is None or isinstance(el, Edge):
            return False
        dx = cmd.to[0] - el.x
        dy = cmd.to[1] - el.y
        for sub_id in _subtree_ids(model, cmd.id):
            sub = model.elements[sub_id]
            sub.x += dx
            sub.y += dy
        if el.containerId != cmd.toContainerId:
            old = _resolve_container(model, el.containerId)
            if old is not None and cmd.id in old:
                old.remove(cmd.id)
            new = _resolve_container(model, cmd.toContainerId)
            if new is not None:
                new.append(cmd.id)
            el.containerId = cmd.toContainerId
        el.version += 1
        model.modelVersion += 1
        result = CommandResult(status="applied", version=el.version)
    elif isinstance(cmd, proto.ResizeNode):
        el = model.elements.get(cmd.id)
        if el is None or isinstance(el, Edge):
            return False
        el.width, el.height = cmd.newSize
        el.version += 1
        model.modelVersion += 1
        result = CommandResult(status="applied", version=el.version)
    elif isinstance(cmd, proto.ReconnectEdge):
        el = model.elements.get(cmd.id)
        if el is None or not isinstance(el, Edge):
            return False
        el.sourceId = cmd.newSource
        el.targetId = cmd.newTarget
        el.version += 1
        model.modelVersion += 1
        result = CommandResult(status="applied", version=el.version)
    elif isinstance(cmd, proto.BendEdge):
        el = model.elements.get(cmd.id)
        if el is None or not isinstance(el, Edge):
            return False
        el.bendPoints = [list(p) for p in cmd.newBendPoints]
        el.version += 1
        model.modelVersion += 1
        result = CommandResult(status="applied", version=el.version)
    elif isinstance(cmd, proto.SetAttributes):
        if cmd.id == model.id:
            model.attributes = {k: list(v) for k, v in cmd.newAssignment.items()}
            model.modelVersion += 1
            return True
        el = model.elements.get(cmd.id)
        if el is None:
            return False
        el.attributes = {k: list(v) for k, v in cmd.newAssignment.items()}
        el.version += 1
        model.modelVersion += 1
        result = CommandResult(status="applied", version=el.version)
    else:
        raise MalformedCommandError(f"cannot force-apply {type(cmd).__name__}")
    if result.applied and cmd.version is not None and cmd.id in model.elements:
        model.elements[cmd.id].version = cmd.version
    return result.applied


def apply_restore(model, spec, cmd):
    """Overwrite one element with the server's authoritative state (or absence)."""
    if cmd.id == model.id:
        if cmd.state is not None:
            model.attributes = {k: list(v) for k, v in cmd.state.get("attributes", {}).items()}
            model.routing = dict(cmd.state.get("routing", model.routing))
        return
    _remove_element(model, cmd.id)
    if cmd.state is None:
        return
    element = element_from_dict(cmd.state)
    model.elements[element.id] = element
    if not isinstance(element, Edge):
        children = _resolve_container(model, element.containerId)
        if children is not None and element.id not in children:
            children.append(element.id)


def _detach_everywhere(model, element_id):
    if element_id in model.rootChildren:
        model.rootChildren.remove(element_id)
    for el in model.elements.values():
        if isinstance(el, Container) and element_id in el.children:
            el.children.remove(element_id)


def _remove_element(model, element_id):
    el = model.elements.pop(element_id, None)
    if el is None:
        return
    if not isinstance(el, Edge):
        _detach_everywhere(model, element_id)


# ---------------------------------------------------------------------------
# Model validation (lower bounds; upper bounds hold by construction)
# ---------------------------------------------------------------------------


def validate_model(model, spec, validators=()):
    diags = []
    containers = [(model.id, model.typeName, model.rootChildren)]
    for el in model.elements.values():
        if isinstance(el, Container):
            containers.append((el.id, el.typeName, el.children))
    for cid, ctype, children in containers:
        for constraint in cached_embeddings(spec, ctype):
            if constraint.lower <= 0:
                continue
            group = cached_subtypes(spec, constraint.nodeTypeName)
            count = sum(1 for c in children if model.elements[c].typeName in group)
            if count < constraint.lower:
                diags.append(
                    Diagnostic(
                        "LowerBound",
                        cid,
                        f"needs at least {constraint.lower} contained {constraint.nodeTypeName}, has {count}",
                    )
                )
    for el in model.elements.values():
        if isinstance(el, Edge):
            continue
        for direction, endpoint in (("outgoing", "sourceId"), ("incoming", "targetId")):
            for constraint in cached_connections(spec, el.typeName, direction):
                if constraint.lower <= 0:
                    continue
                group = cached_subtypes(spec, constraint.edgeTypeName)
                count = sum(
                    1
                    for e in model.elements.values()
                    if isinstance(e, Edge) and getattr(e, endpoint) == el.id and e.typeName in group
                )
                if count < constraint.lower:
                    diags.append(
                        Diagnostic(
                            "LowerBound",
                            el.id,
                            f"needs at least {constraint.lower} {direction} {constraint.edgeTypeName}, has {count}",
                        )
                    )
    targets = [(model.id, model.typeName, model.attributes)]
    targets += [(el.id, el.typeName, el.attributes) for el in model.elements.values()]
    for eid, type_name, attrs in targets:
        for adef in cached_attributes(spec, type_name):
            values = attrs.get(adef.name, [])
            if len(values) < adef.lower:
                diags.append(Diagnostic("MissingAttribute", eid, f"attribute {adef.name!r} needs {adef.lower} values"))
    for validator in validators:
        diags.extend(validator(model, spec))
    return diags


# ---------------------------------------------------------------------------
# Serialization and structural equality
# ---------------------------------------------------------------------------


def _normalize_attrs(attrs):
    return {k: list(v) for k, v in attrs.items()}


def element_to_dict(el):
    if isinstance(el, Edge):
        return {
            "meta": "edge",
            "id": el.id,
            "typeName": el.typeName,
            "sourceId": el.sourceId,
            "targetId": el.targetId,
            "bendPoints": [list(p) for p in el.bendPoints],
            "attributes": _normalize_attrs(el.attributes),
            "version": el.version,
        }
    out = {
        "meta": "container" if isinstance(el, Container) else "node",
        "id": el.id,
        "typeName": el.typeName,
        "x": el.x,
        "y": el.y,
        "width": el.width,
        "height": el.height,
        "containerId": el.containerId,
        "attributes": _normalize_attrs(el.attributes),
        "version": el.version,
    }
    if isinstance(el, Container):
        out["children"] = list(el.children)
    return out


def element_from_dict(d):
    meta = d.get("meta")
    if meta == "edge":
        return Edge(
            id=d["id"],
            typeName=d["typeName"],
            sourceId=d["sourceId"],
            targetId=d["targetId"],
            bendPoints=[list(p) for p in d.get("bendPoints", [])],
            attributes=_normalize_attrs(d.get("attributes", {})),
            version=d.get("version", 0),
        )
    cls = Container if meta == "container" else Node
    el = cls(
        id=d["id"],
        typeName=d["typeName"],
        x=d["x"],
        y=d["y"],
        width=d["width"],
        height=d["height"],
        containerId=d["containerId"],
        attributes=_normalize_attrs(d.get("attributes", {})),
        version=d.get("version", 0),
    )
    if meta == "container":
        el.children = list(d.get("children", []))
    return el


def model_to_dict(model):
    return {
        "id": model.id,
        "typeName": model.typeName,
        "attributes": _normalize_attrs(model.attributes),
        "rootChildren": list(model.rootChildren),
        "modelVersion": model.modelVersion,
        "routing": dict(model.routing),
        "elements": [element_to_dict(model.elements[k]) for k in sorted(model.elements)],
    }


def model_from_dict(d):
    model = GraphModelInstance(
        id=d["id"],
        typeName=d["typeName"],
        attributes=_normalize_attrs(d.get("attributes", {})),
        rootChildren=list(d.get("rootChildren", [])),
        modelVersion=d.get("modelVersion", 0),
        routing=dict(d.get("routing", DEFAULT_ROUTING)),
    )
    for raw in d.get("elements", []):
        el = element_from_dict(raw)
        model.elements[el.id] = el
    return model


def clone_model(model):
    return model_from_dict(model_to_dict(model))


def _canonical(d, ignore_versions):
    out = copy.deepcopy(d)
    out["rootChildren"] = sorted(out["rootChildren"])
    for el in out["elements"]:
        if "children" in el:
            el["children"] = sorted(el["children"])
        if ignore_versions:
            el.pop("version", None)
    if ignore_versions:
        out.pop("modelVersion", None)
    return out


def models_equal(a, b, ignore_versions=False):
    """Structural equality; containment order is not significant."""
    return _canonical(model_to_dict(a), ignore_versions) == _canonical(model_to_dict(b), ignore_versions)


def diff_models(a, b, ignore_versions=False):
    """Human-readable list of differences between two models."""
    da = _canonical(model_to_dict(a), ignore_versions)
    db = _canonical(model_to_dict(b), ignore_versions)
    diffs = []
    for key in ("id", "typeName", "attributes", "rootChildren", "modelVersion", "routing"):
        if key in da and da.get(key) != db.get(key):
            diffs.append(f"{key}: {da.get(key)!r} != {db.get(key)!r}")
    ea = {e["id"]: e for e in da["elements"]}
    eb = {e["id"]: e for e in db["elements"]}
    for eid in sorted(set(ea) | set(eb)):
        if eid not in ea:
            diffs.append(f"element {eid}: missing on left")
        elif eid not in eb:
            diffs.append(f"element {eid}: missing on right")
        elif ea[eid] != eb[eid]:
            fields = {k for k in set(ea[eid]) | set(eb[eid]) if ea[eid].get(k) != eb[eid].get(k)}
            diffs.append(f"element {eid}: differs in {sorted(fields)}")
    return diffs


# ---------------------------------------------------------------------------
# Compound deletion (containers take their subtree and incident edges along)
# ---------------------------------------------------------------------------


def delete_commands_for(model, element_id):
    """Ordered command list deleting an element, its subtree and incident edges.

    Edges go first, then nodes leaf-to-root, so each single DeleteNode
    applies to an element without remaining children or edges.  The list
    forms one atomic multi-command message with self-contained old state.
    """
    el = model.element(element_id)
    if isinstance(el, Edge):
        return [proto.DeleteEdge(id=el.id, oldState=element_to_dict(el))]
    node_ids = _subtree_ids(model, element_id)
    node_set = set(node_ids)
    commands = []
    for edge in model.edges():
        if edge.sourceId in node_set or edge.targetId in node_set:
            commands.append(proto.DeleteEdge(id=edge.id, oldState=element_to_dict(edge)))
    for nid in reversed(node_ids):
        commands.append(proto.DeleteNode(id=nid, oldState=element_to_dict(model.elements[nid])))
    return commands
