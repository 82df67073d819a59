"""Parsing, validation and queries for the declarative metamodel document.

A metamodel document is one YAML file with the sections ``graphModel``,
``nodes``, ``containers``, ``edges``, ``styles`` and ``uiProfiles``.  It
defines a graph DSL's abstract syntax (element types, constraints,
attributes), concrete syntax (shape styles) and UI profiles.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field

import jsonschema
import yaml

from .errors import (
    DuplicateNameError,
    ParseError,
    UnknownTypeError,
    UnresolvedReferenceError,
)

VALUE_TYPES = ("string", "integer", "float", "boolean", "enum")
SHAPE_KINDS = ("rectangle", "ellipse", "roundedRectangle", "polyline", "text")
H_ALIGNS = ("left", "center", "right")
V_ALIGNS = ("top", "middle", "bottom")
LINE_STYLES = ("solid", "dash", "dot", "dashdot")
COMPONENTS = ("CANVAS", "PALETTE", "PROPERTIES", "VALIDATION", "EXPLORER", "HISTORY")
GRID_COLUMNS = 12


@dataclass
class AttributeDef:
    name: str
    valueType: str = "string"
    lower: int = 0
    upper: int = 1  # -1 = unbounded
    defaultValue: object = None
    literals: tuple = ()  # enum only


@dataclass
class EmbeddingConstraint:
    nodeTypeName: str
    lower: int = 0
    upper: int = -1


@dataclass
class ConnectionConstraint:
    direction: str  # incoming | outgoing
    edgeTypeName: str
    lower: int = 0
    upper: int = -1


@dataclass
class Position:
    hAlign: str = "center"
    vAlign: str = "middle"
    dx: int = 0
    dy: int = 0


@dataclass
class Font:
    family: str = "sans-serif"
    size: int = 12
    bold: bool = False
    italic: bool = False


@dataclass
class Appearance:
    background: str = "#ffffff"
    foreground: str = "#000000"
    lineWidth: int = 1
    lineStyle: str = "solid"
    font: Font | None = None


@dataclass
class Shape:
    kind: str
    width: int | None = None
    height: int | None = None
    points: list = field(default_factory=list)  # polyline only
    value: str = ""  # text only; "${attr}" binds an attribute
    position: Position = field(default_factory=Position)
    appearance: Appearance = field(default_factory=Appearance)
    innerShapes: list = field(default_factory=list)


@dataclass
class NodeStyle:
    mainShape: Shape


@dataclass
class ArrowHead:
    width: int = 8
    length: int = 12
    filled: bool = True


@dataclass
class Decorator:
    location: float
    arrowHead: ArrowHead | None = None
    shape: Shape | None = None


@dataclass
class EdgeStyle:
    decorators: list = field(default_factory=list)
    appearance: Appearance = field(default_factory=Appearance)


@dataclass
class StyleSet:
    nodeStyles: dict = field(default_factory=dict)  # type name -> NodeStyle
    edgeStyles: dict = field(default_factory=dict)  # type name -> EdgeStyle


@dataclass
class WidgetStyle:
    background: str = "#ffffff"
    foreground: str = "#000000"


@dataclass
class Widget:
    component: str
    columns: int = GRID_COLUMNS
    movable: bool = False
    resizable: bool = False
    style: WidgetStyle | None = None


@dataclass
class UIProfile:
    name: str
    roles: list = field(default_factory=list)
    rows: list = field(default_factory=list)  # list of list of Widget


@dataclass
class GraphModelType:
    name: str
    abstract: bool = False
    attributes: list = field(default_factory=list)
    embeddings: list = field(default_factory=list)


@dataclass
class NodeType:
    name: str
    abstract: bool = False
    superType: str | None = None
    attributes: list = field(default_factory=list)
    connections: list = field(default_factory=list)


@dataclass
class ContainerType(NodeType):
    embeddings: list = field(default_factory=list)


@dataclass
class EdgeType:
    name: str
    abstract: bool = False
    superType: str | None = None
    attributes: list = field(default_factory=list)


@dataclass
class MetamodelSpec:
    graphModel: GraphModelType
    nodeTypes: list = field(default_factory=list)
    containerTypes: list = field(default_factory=list)
    edgeTypes: list = field(default_factory=list)
    styles: StyleSet = field(default_factory=StyleSet)
    uiProfiles: list = field(default_factory=list)

    # -- lookups -------------------------------------------------------

    def node_like_types(self):
        """All node and container types (one inheritance hierarchy)."""
        return list(self.nodeTypes) + list(self.containerTypes)

    def all_types(self):
        return [self.graphModel] + self.node_like_types() + list(self.edgeTypes)

    def type_named(self, name):
        for t in self.all_types():
            if t.name == name:
                return t
        raise UnknownTypeError(name)

    def has_type(self, name):
        return any(t.name == name for t in self.all_types())

    def is_container_type(self, name):
        return any(t.name == name for t in self.containerTypes)

    def is_edge_type(self, name):
        return any(t.name == name for t in self.edgeTypes)

    def is_node_like(self, name):
        return any(t.name == name for t in self.node_like_types())

    def concrete_node_types(self):
        return [t for t in self.node_like_types() if not t.abstract]

    def concrete_container_types(self):
        """Concrete element containers: the graph model plus concrete containers."""
        return [self.graphModel] + [t for t in self.containerTypes if not t.abstract]

    def concrete_edge_types(self):
        return [t for t in self.edgeTypes if not t.abstract]

    def embeddings_of(self, container_type_name):
        """Embedding constraints declared on the type and its ancestors."""
        out = []
        for name in ancestry(self, container_type_name):
            t = self.type_named(name)
            out.extend(getattr(t, "embeddings", []))
        return out

    def connections_of(self, node_type_name, direction):
        out = []
        for name in ancestry(self, node_type_name):
            t = self.type_named(name)
            for c in getattr(t, "connections", []):
                if c.direction == direction:
                    out.append(c)
        return out


@dataclass
class Diagnostic:
    rule: str
    element: str
    message: str

    def __str__(self):
        return f"[{self.rule}] {self.element}: {self.message}"


# ---------------------------------------------------------------------------
# Inheritance queries
# ---------------------------------------------------------------------------


def ancestry(spec, type_name):
    """Type name followed by its superType chain, nearest first."""
    chain = []
    seen = set()
    cur = type_name
    while cur is not None and cur not in seen:
        if not spec.has_type(cur):
            raise UnknownTypeError(cur)
        chain.append(cur)
        seen.add(cur)
        cur = getattr(spec.type_named(cur), "superType", None)
    return chain


def subtypes_of(spec, type_name):
    """Reflexive-transitive closure of the inverse superType relation."""
    if not spec.has_type(type_name):
        raise UnknownTypeError(type_name)
    result = {type_name}
    changed = True
    candidates = spec.node_like_types() + list(spec.edgeTypes)
    while changed:
        changed = False
        for t in candidates:
            if t.superType in result and t.name not in result:
                result.add(t.name)
                changed = True
    return result


def flatten_attributes(spec, type_name):
    """Own plus inherited attributes, ancestor-first, first occurrence wins."""
    chain = ancestry(spec, type_name)
    out = []
    seen = set()
    for name in reversed(chain):
        for attr in spec.type_named(name).attributes:
            if attr.name not in seen:
                seen.add(attr.name)
                out.append(attr)
    return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _schema():
    path = importlib.resources.files("collabgraph.schemas") / "metamodel.schema.json"
    return json.loads(path.read_text("utf-8"))


def _attr(raw):
    vt = raw.get("valueType", "string")
    return AttributeDef(
        name=raw["name"],
        valueType=vt,
        lower=int(raw.get("lower", 0)),
        upper=int(raw.get("upper", 1)),
        defaultValue=raw.get("defaultValue"),
        literals=tuple(raw.get("literals", ())),
    )


def _embedding(raw):
    return EmbeddingConstraint(
        nodeTypeName=raw["nodeTypeName"],
        lower=int(raw.get("lower", 0)),
        upper=int(raw.get("upper", -1)),
    )


def _connection(raw):
    return ConnectionConstraint(
        direction=raw["direction"],
        edgeTypeName=raw["edgeTypeName"],
        lower=int(raw.get("lower", 0)),
        upper=int(raw.get("upper", -1)),
    )


def _position(raw):
    raw = raw or {}
    return Position(
        hAlign=raw.get("hAlign", "center"),
        vAlign=raw.get("vAlign", "middle"),
        dx=int(raw.get("dx", 0)),
        dy=int(raw.get("dy", 0)),
    )


def _appearance(raw):
    raw = raw or {}
    font = None
    if raw.get("font"):
        f = raw["font"]
        font = Font(
            family=f.get("family", "sans-serif"),
            size=int(f.get("size", 12)),
            bold=bool(f.get("bold", False)),
            italic=bool(f.get("italic", False)),
        )
    return Appearance(
        background=raw.get("background", "#ffffff"),
        foreground=raw.get("foreground", "#000000"),
        lineWidth=int(raw.get("lineWidth", 1)),
        lineStyle=raw.get("lineStyle", "solid"),
        font=font,
    )


def _shape(raw):
    return Shape(
        kind=raw["kind"],
        width=raw.get("width"),
        height=raw.get("height"),
        points=[list(p) for p in raw.get("points", [])],
        value=raw.get("value", ""),
        position=_position(raw.get("position")),
        appearance=_appearance(raw.get("appearance")),
        innerShapes=[_shape(s) for s in raw.get("innerShapes", [])],
    )


def _decorator(raw):
    arrow = None
    shape = None
    if raw.get("arrowHead") is not None:
        a = raw["arrowHead"]
        arrow = ArrowHead(
            width=int(a.get("width", 8)),
            length=int(a.get("length", 12)),
            filled=bool(a.get("filled", True)),
        )
    if raw.get("shape") is not None:
        shape = _shape(raw["shape"])
    return Decorator(location=float(raw["location"]), arrowHead=arrow, shape=shape)


def _widget(raw):
    style = None
    if raw.get("style"):
        s = raw["style"]
        style = WidgetStyle(
            background=s.get("background", "#ffffff"),
            foreground=s.get("foreground", "#000000"),
        )
    return Widget(
        component=raw["component"],
        columns=int(raw.get("columns", GRID_COLUMNS)),
        movable=bool(raw.get("movable", False)),
        resizable=bool(raw.get("resizable", False)),
        style=style,
    )


def parse_metamodel(document: str) -> MetamodelSpec:
    """Parse a metamodel document into a fully resolved MetamodelSpec.

    Raises ParseError for malformed text, DuplicateNameError for clashing
    type names and UnresolvedReferenceError for unknown or cyclic
    superType references.
    """
    try:
        raw = yaml.safe_load(document)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ParseError(
            exc.problem or "invalid document",
            line=mark.line + 1 if mark else None,
            col=mark.column + 1 if mark else None,
        ) from exc
    except yaml.YAMLError as exc:
        raise ParseError(str(exc)) from exc
    if not isinstance(raw, dict):
        raise ParseError("document root must be a mapping")
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ParseError(f"{exc.message} (at {path or 'root'})") from exc

    gm_raw = raw["graphModel"]
    graph_model = GraphModelType(
        name=gm_raw["name"],
        abstract=False,
        attributes=[_attr(a) for a in gm_raw.get("attributes", [])],
        embeddings=[_embedding(e) for e in gm_raw.get("embeddings", [])],
    )
    node_types = [
        NodeType(
            name=n["name"],
            abstract=bool(n.get("abstract", False)),
            superType=n.get("superType"),
            attributes=[_attr(a) for a in n.get("attributes", [])],
            connections=[_connection(c) for c in n.get("connections", [])],
        )
        for n in raw.get("nodes", [])
    ]
    container_types = [
        ContainerType(
            name=c["name"],
            abstract=bool(c.get("abstract", False)),
            superType=c.get("superType"),
            attributes=[_attr(a) for a in c.get("attributes", [])],
            connections=[_connection(x) for x in c.get("connections", [])],
            embeddings=[_embedding(e) for e in c.get("embeddings", [])],
        )
        for c in raw.get("containers", [])
    ]
    edge_types = [
        EdgeType(
            name=e["name"],
            abstract=bool(e.get("abstract", False)),
            superType=e.get("superType"),
            attributes=[_attr(a) for a in e.get("attributes", [])],
        )
        for e in raw.get("edges", [])
    ]

    styles_raw = raw.get("styles", {})
    styles = StyleSet(
        nodeStyles={
            name: NodeStyle(mainShape=_shape(s["mainShape"]))
            for name, s in (styles_raw.get("nodes") or {}).items()
        },
        edgeStyles={
            name: EdgeStyle(
                decorators=[_decorator(d) for d in s.get("decorators", [])],
                appearance=_appearance(s.get("appearance")),
            )
            for name, s in (styles_raw.get("edges") or {}).items()
        },
    )
    profiles = [
        UIProfile(
            name=p["name"],
            roles=list(p.get("roles", [])),
            rows=[[_widget(w) for w in row] for row in p.get("rows", [])],
        )
        for p in raw.get("uiProfiles", [])
    ]

    spec = MetamodelSpec(
        graphModel=graph_model,
        nodeTypes=node_types,
        containerTypes=container_types,
        edgeTypes=edge_types,
        styles=styles,
        uiProfiles=profiles,
    )
    _bind_references(spec)
    return spec


def _bind_references(spec):
    names = [t.name for t in spec.all_types()]
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateNameError(name)
        seen.add(name)
    node_like = {t.name for t in spec.node_like_types()}
    edge_names = {t.name for t in spec.edgeTypes}
    for t in spec.node_like_types():
        if t.superType is not None and t.superType not in node_like:
            raise UnresolvedReferenceError(t.superType, f"superType of {t.name}")
    for t in spec.edgeTypes:
        if t.superType is not None and t.superType not in edge_names:
            raise UnresolvedReferenceError(t.superType, f"superType of {t.name}")
    for t in spec.node_like_types() + list(spec.edgeTypes):
        if _has_cycle(spec, t.name):
            raise UnresolvedReferenceError(t.name, "superType cycle")
    for t in [spec.graphModel] + list(spec.containerTypes):
        for emb in t.embeddings:
            if emb.nodeTypeName not in node_like:
                raise UnresolvedReferenceError(emb.nodeTypeName, f"embedding in {t.name}")
    for t in spec.node_like_types():
        for conn in t.connections:
            if conn.edgeTypeName not in edge_names:
                raise UnresolvedReferenceError(conn.edgeTypeName, f"connection on {t.name}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _check_bounds(diags, owner, what, lower, upper):
    if lower < 0 or (upper != -1 and upper < lower):
        diags.append(Diagnostic("BadCardinality", owner, f"{what} has bounds [{lower},{upper}]"))


def validate_metamodel(spec: MetamodelSpec) -> list[Diagnostic]:
    """Check every MetamodelSpec invariant; returns one Diagnostic per violation."""
    diags: list[Diagnostic] = []

    names = [t.name for t in spec.all_types()]
    dupes = {n for n in names if names.count(n) > 1}
    for n in sorted(dupes):
        diags.append(Diagnostic("DuplicateName", n, "type name used more than once"))

    node_like = {t.name for t in spec.node_like_types()}
    edge_names = {t.name for t in spec.edgeTypes}
    for t in spec.node_like_types():
        if t.superType is not None and t.superType not in node_like:
            diags.append(Diagnostic("UnresolvedReference", t.name, f"superType {t.superType!r}"))
    for t in spec.edgeTypes:
        if t.superType is not None and t.superType not in edge_names:
            diags.append(Diagnostic("UnresolvedReference", t.name, f"superType {t.superType!r}"))
    for t in spec.node_like_types() + list(spec.edgeTypes):
        if _has_cycle(spec, t.name):
            diags.append(Diagnostic("InheritanceCycle", t.name, "superType chain is cyclic"))
            # further inheritance-dependent checks would not terminate
            return diags

    for t in spec.all_types():
        flat = flatten_attributes(spec, t.name)
        attr_names = [a.name for a in flat]
        for n in sorted({n for n in attr_names if attr_names.count(n) > 1}):
            diags.append(Diagnostic("DuplicateAttribute", t.name, f"attribute {n!r}"))
        for a in flat:
            _check_bounds(diags, t.name, f"attribute {a.name!r}", a.lower, a.upper)
            if a.valueType not in VALUE_TYPES:
                diags.append(Diagnostic("BadValueType", t.name, f"attribute {a.name!r}: {a.valueType!r}"))
            if a.valueType == "enum" and not a.literals:
                diags.append(Diagnostic("BadValueType", t.name, f"enum attribute {a.name!r} has no literals"))

    # constraint references and bounds
    for t in [spec.graphModel] + list(spec.containerTypes):
        for e in t.embeddings:
            if e.nodeTypeName not in node_like:
                diags.append(Diagnostic("UnresolvedReference", t.name, f"embedding of {e.nodeTypeName!r}"))
            _check_bounds(diags, t.name, f"embedding of {e.nodeTypeName!r}", e.lower, e.upper)
    for t in spec.node_like_types():
        for c in t.connections:
            if c.edgeTypeName not in edge_names:
                diags.append(Diagnostic("UnresolvedReference", t.name, f"connection to {c.edgeTypeName!r}"))
            if c.direction not in ("incoming", "outgoing"):
                diags.append(Diagnostic("BadDirection", t.name, f"connection direction {c.direction!r}"))
            _check_bounds(diags, t.name, f"{c.direction} {c.edgeTypeName!r}", c.lower, c.upper)

    # style coverage: exactly one style per concrete type, none for unknown types
    for t in spec.node_like_types():
        if not t.abstract and t.name not in spec.styles.nodeStyles:
            diags.append(Diagnostic("MissingStyle", t.name, "non-abstract node type has no NodeStyle"))
    for t in spec.edgeTypes:
        if not t.abstract and t.name not in spec.styles.edgeStyles:
            diags.append(Diagnostic("MissingStyle", t.name, "non-abstract edge type has no EdgeStyle"))
    for name in spec.styles.nodeStyles:
        if name not in node_like:
            diags.append(Diagnostic("UnresolvedReference", name, "node style for unknown type"))
    for name in spec.styles.edgeStyles:
        if name not in edge_names:
            diags.append(Diagnostic("UnresolvedReference", name, "edge style for unknown type"))

    for name, style in spec.styles.nodeStyles.items():
        _validate_shape(diags, name, style.mainShape)
    for name, style in spec.styles.edgeStyles.items():
        for d in style.decorators:
            if not 0.0 <= d.location <= 1.0:
                diags.append(Diagnostic("BadDecorator", name, f"location {d.location} outside [0,1]"))
            if (d.arrowHead is None) == (d.shape is None):
                diags.append(Diagnostic("BadDecorator", name, "decorator needs exactly one graphic"))
            if d.shape is not None:
                _validate_shape(diags, name, d.shape)

    for p in spec.uiProfiles:
        canvases = 0
        for row in p.rows:
            total = sum(w.columns for w in row)
            if total > GRID_COLUMNS:
                diags.append(Diagnostic("BadUIProfile", p.name, f"row occupies {total} of {GRID_COLUMNS} columns"))
            for w in row:
                if w.component not in COMPONENTS:
                    diags.append(Diagnostic("BadUIProfile", p.name, f"unknown component {w.component!r}"))
                if not 1 <= w.columns <= GRID_COLUMNS:
                    diags.append(Diagnostic("BadUIProfile", p.name, f"widget columns {w.columns}"))
                if w.component == "CANVAS":
                    canvases += 1
        if canvases != 1:
            diags.append(Diagnostic("BadUIProfile", p.name, f"{canvases} CANVAS widgets, need exactly 1"))

    return diags


def _has_cycle(spec, type_name):
    seen = set()
    cur = type_name
    while cur is not None:
        if cur in seen:
            return True
        seen.add(cur)
        t = spec.type_named(cur) if spec.has_type(cur) else None
        cur = getattr(t, "superType", None) if t else None
    return False


def _validate_shape(diags, owner, shape):
    if shape.kind not in SHAPE_KINDS:
        diags.append(Diagnostic("BadShape", owner, f"unknown shape kind {shape.kind!r}"))
        return
    if shape.kind == "text" and shape.innerShapes:
        diags.append(Diagnostic("BadShape", owner, "text shape may not contain inner shapes"))
    if shape.kind == "polyline" and len(shape.points) < 2:
        diags.append(Diagnostic("BadShape", owner, "polyline needs at least 2 points"))
    if shape.position.hAlign not in H_ALIGNS or shape.position.vAlign not in V_ALIGNS:
        diags.append(Diagnostic("BadShape", owner, "bad anchor alignment"))
    if shape.appearance.lineStyle not in LINE_STYLES:
        diags.append(Diagnostic("BadShape", owner, f"bad line style {shape.appearance.lineStyle!r}"))
    if shape.appearance.lineWidth < 0:
        diags.append(Diagnostic("BadShape", owner, "negative line width"))
    for inner in shape.innerShapes:
        _validate_shape(diags, owner, inner)


# ---------------------------------------------------------------------------
# Serialization (parse/serialize round-trip)
# ---------------------------------------------------------------------------


def _attr_out(a):
    out = {"name": a.name, "valueType": a.valueType, "lower": a.lower, "upper": a.upper}
    if a.defaultValue is not None:
        out["defaultValue"] = a.defaultValue
    if a.literals:
        out["literals"] = list(a.literals)
    return out


def _shape_out(s):
    out = {"kind": s.kind}
    if s.width is not None:
        out["width"] = s.width
    if s.height is not None:
        out["height"] = s.height
    if s.points:
        out["points"] = [list(p) for p in s.points]
    if s.value:
        out["value"] = s.value
    out["position"] = {
        "hAlign": s.position.hAlign,
        "vAlign": s.position.vAlign,
        "dx": s.position.dx,
        "dy": s.position.dy,
    }
    out["appearance"] = _appearance_out(s.appearance)
    if s.innerShapes:
        out["innerShapes"] = [_shape_out(i) for i in s.innerShapes]
    return out


def _appearance_out(a):
    out = {
        "background": a.background,
        "foreground": a.foreground,
        "lineWidth": a.lineWidth,
        "lineStyle": a.lineStyle,
    }
    if a.font is not None:
        out["font"] = {
            "family": a.font.family,
            "size": a.font.size,
            "bold": a.font.bold,
            "italic": a.font.italic,
        }
    return out


def metamodel_to_dict(spec: MetamodelSpec) -> dict:
    def node_out(t, container=False):
        out = {"name": t.name}
        if t.abstract:
            out["abstract"] = True
        if t.superType:
            out["superType"] = t.superType
        if t.attributes:
            out["attributes"] = [_attr_out(a) for a in t.attributes]
        if t.connections:
            out["connections"] = [
                {"direction": c.direction, "edgeTypeName": c.edgeTypeName, "lower": c.lower, "upper": c.upper}
                for c in t.connections
            ]
        if container and t.embeddings:
            out["embeddings"] = [
                {"nodeTypeName": e.nodeTypeName, "lower": e.lower, "upper": e.upper} for e in t.embeddings
            ]
        return out

    gm = {"name": spec.graphModel.name}
    if spec.graphModel.attributes:
        gm["attributes"] = [_attr_out(a) for a in spec.graphModel.attributes]
    if spec.graphModel.embeddings:
        gm["embeddings"] = [
            {"nodeTypeName": e.nodeTypeName, "lower": e.lower, "upper": e.upper}
            for e in spec.graphModel.embeddings
        ]
    doc = {"graphModel": gm}
    if spec.nodeTypes:
        doc["nodes"] = [node_out(t) for t in spec.nodeTypes]
    if spec.containerTypes:
        doc["containers"] = [node_out(t, container=True) for t in spec.containerTypes]
    if spec.edgeTypes:
        edges = []
        for t in spec.edgeTypes:
            out = {"name": t.name}
            if t.abstract:
                out["abstract"] = True
            if t.superType:
                out["superType"] = t.superType
            if t.attributes:
                out["attributes"] = [_attr_out(a) for a in t.attributes]
            edges.append(out)
        doc["edges"] = edges
    styles = {}
    if spec.styles.nodeStyles:
        styles["nodes"] = {
            name: {"mainShape": _shape_out(s.mainShape)} for name, s in spec.styles.nodeStyles.items()
        }
    if spec.styles.edgeStyles:
        styles["edges"] = {
            name: {
                "appearance": _appearance_out(s.appearance),
                "decorators": [
                    {
                        "location": d.location,
                        **(
                            {"arrowHead": {"width": d.arrowHead.width, "length": d.arrowHead.length, "filled": d.arrowHead.filled}}
                            if d.arrowHead
                            else {"shape": _shape_out(d.shape)}
                        ),
                    }
                    for d in s.decorators
                ],
            }
            for name, s in spec.styles.edgeStyles.items()
        }
    if styles:
        doc["styles"] = styles
    if spec.uiProfiles:
        doc["uiProfiles"] = [
            {
                "name": p.name,
                "roles": list(p.roles),
                "rows": [
                    [
                        {
                            "component": w.component,
                            "columns": w.columns,
                            "movable": w.movable,
                            "resizable": w.resizable,
                            **(
                                {"style": {"background": w.style.background, "foreground": w.style.foreground}}
                                if w.style
                                else {}
                            ),
                        }
                        for w in row
                    ]
                    for row in p.rows
                ],
            }
            for p in spec.uiProfiles
        ]
    return doc


def serialize_metamodel(spec: MetamodelSpec) -> str:
    """Render a spec back to document text; reparsing yields an equal spec."""
    return yaml.safe_dump(metamodel_to_dict(spec), sort_keys=False)
