"""Table-per-class mapping of a metamodel to a relational schema.

Every concrete type gets its own table carrying all inherited attribute
columns; abstract types get none.  Polymorphic associations (a node's
container, an edge's endpoints, a bend point's edge) are rolled out into
one nullable foreign-key column per concrete target type, with at most one
of them non-null per row.  A small in-memory table store backs snapshots.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field

from . import model as model_mod
from .errors import SchemaMismatchError, UnknownModelError
from .metamodel import flatten_attributes

BEND_POINT_TABLE = "bend_point"

_FIXED_NODE_COLUMNS = ("id", "model_id", "x", "y", "width", "height", "version", "container_index")
_FIXED_EDGE_COLUMNS = ("id", "model_id", "version")


def snake(name):
    s = re.sub(r"(?<=[A-Z])(?=[A-Z][a-z])", "_", name)
    s = re.sub(r"(?<=[a-z0-9])([A-Z])", r"_\1", s)
    return s.lower()


@dataclass
class Column:
    name: str
    columnType: str  # TEXT | INTEGER | REAL
    nullable: bool = True


@dataclass
class ForeignKey:
    column: str
    targetTable: str


@dataclass
class Table:
    name: str
    columns: list = field(default_factory=list)
    primaryKey: str = "id"
    foreignKeys: list = field(default_factory=list)

    def column_names(self):
        return [c.name for c in self.columns]


@dataclass
class RelationalSchema:
    tables: list = field(default_factory=list)

    def table(self, name):
        for t in self.tables:
            if t.name == name:
                return t
        raise SchemaMismatchError(f"no table {name!r} in schema")

    def has_table(self, name):
        return any(t.name == name for t in self.tables)


_SQL_TYPES = {"string": "TEXT", "enum": "TEXT", "integer": "INTEGER", "boolean": "INTEGER", "float": "REAL"}


def _attr_column_name(attr_name, taken):
    name = snake(attr_name)
    return f"attr_{name}" if name in taken else name


def generate_schema(spec) -> RelationalSchema:
    """Relational schema for a validated spec, table-per-class strategy."""
    tables = []
    side_tables = []
    root_table = snake(spec.graphModel.name)
    container_targets = [t.name for t in spec.concrete_container_types()]
    node_targets = [t.name for t in spec.concrete_node_types()]
    edge_targets = [t.name for t in spec.concrete_edge_types()]

    def attr_columns(table, type_name, fixed):
        taken = set(fixed)
        for a in flatten_attributes(spec, type_name):
            col = _attr_column_name(a.name, taken)
            if a.upper == 1:
                table.columns.append(Column(col, _SQL_TYPES[a.valueType], nullable=a.lower == 0))
            else:
                side = Table(
                    name=f"{table.name}_{col}",
                    columns=[
                        Column("owner_id", "TEXT", nullable=False),
                        Column("idx", "INTEGER", nullable=False),
                        Column("value", _SQL_TYPES[a.valueType], nullable=False),
                    ],
                    primaryKey="",  # keyed by (owner_id, idx)
                    foreignKeys=[ForeignKey("owner_id", table.name)],
                )
                side_tables.append(side)

    root = Table(
        name=root_table,
        columns=[
            Column("id", "TEXT", nullable=False),
            Column("model_version", "INTEGER", nullable=False),
            Column("routing_algorithm", "TEXT", nullable=False),
            Column("routing_connector", "TEXT", nullable=False),
        ],
    )
    attr_columns(root, spec.graphModel.name, ("id", "model_version", "routing_algorithm", "routing_connector"))
    tables.append(root)

    for t in spec.concrete_node_types():
        table = Table(
            name=snake(t.name),
            columns=[
                Column("id", "TEXT", nullable=False),
                Column("model_id", "TEXT", nullable=False),
                Column("x", "INTEGER", nullable=False),
                Column("y", "INTEGER", nullable=False),
                Column("width", "INTEGER", nullable=False),
                Column("height", "INTEGER", nullable=False),
                Column("version", "INTEGER", nullable=False),
                Column("container_index", "INTEGER", nullable=False),
            ],
            foreignKeys=[ForeignKey("model_id", root_table)],
        )
        for target in container_targets:
            col = f"container_{snake(target)}"
            table.columns.append(Column(col, "TEXT", nullable=True))
            table.foreignKeys.append(ForeignKey(col, snake(target)))
        attr_columns(table, t.name, _FIXED_NODE_COLUMNS + tuple(f"container_{snake(c)}" for c in container_targets))
        tables.append(table)

    for t in spec.concrete_edge_types():
        table = Table(
            name=snake(t.name),
            columns=[
                Column("id", "TEXT", nullable=False),
                Column("model_id", "TEXT", nullable=False),
                Column("version", "INTEGER", nullable=False),
            ],
            foreignKeys=[ForeignKey("model_id", root_table)],
        )
        endpoint_cols = []
        for role in ("source", "target"):
            for target in node_targets:
                col = f"{role}_{snake(target)}"
                endpoint_cols.append(col)
                table.columns.append(Column(col, "TEXT", nullable=True))
                table.foreignKeys.append(ForeignKey(col, snake(target)))
        attr_columns(table, t.name, _FIXED_EDGE_COLUMNS + tuple(endpoint_cols))
        tables.append(table)

    bend = Table(
        name=BEND_POINT_TABLE,
        columns=[
            Column("id", "TEXT", nullable=False),
            Column("model_id", "TEXT", nullable=False),
            Column("idx", "INTEGER", nullable=False),
            Column("x", "INTEGER", nullable=False),
            Column("y", "INTEGER", nullable=False),
        ],
        foreignKeys=[ForeignKey("model_id", root_table)],
    )
    for target in edge_targets:
        col = f"edge_{snake(target)}"
        bend.columns.append(Column(col, "TEXT", nullable=True))
        bend.foreignKeys.append(ForeignKey(col, snake(target)))
    tables.append(bend)

    tables.extend(side_tables)
    return RelationalSchema(tables=tables)


# ---------------------------------------------------------------------------
# DDL emission
# ---------------------------------------------------------------------------


def _topo_sorted(schema):
    """Tables ordered so foreign-key targets come first; ties broken by name."""
    remaining = {t.name: t for t in schema.tables}
    emitted = []
    emitted_names = set()
    while remaining:
        ready = sorted(
            name
            for name, t in remaining.items()
            if all(fk.targetTable in emitted_names or fk.targetTable == name for fk in t.foreignKeys)
        )
        if not ready:  # FK cycle: fall back to name order for the rest
            ready = sorted(remaining)
        for name in ready:
            emitted.append(remaining.pop(name))
            emitted_names.add(name)
    return emitted


def emit_ddl(schema: RelationalSchema) -> str:
    """Deterministic CREATE TABLE statements; identical bytes across runs.

    Identifiers are double-quoted so type names that collide with SQL
    keywords (e.g. an "End" node type) stay executable.
    """
    statements = []
    for table in _topo_sorted(schema):
        lines = []
        for col in table.columns:
            null = "" if col.nullable else " NOT NULL"
            pk = " PRIMARY KEY" if col.name == table.primaryKey else ""
            lines.append(f'    "{col.name}" {col.columnType}{null}{pk}')
        for fk in table.foreignKeys:
            lines.append(
                f'    FOREIGN KEY ("{fk.column}") REFERENCES "{fk.targetTable}" ("id")'
            )
        body = ",\n".join(lines)
        statements.append(f'CREATE TABLE "{table.name}" (\n{body}\n);')
    return "\n\n".join(statements) + ("\n" if statements else "")


# ---------------------------------------------------------------------------
# In-memory store
# ---------------------------------------------------------------------------


class TableStore:
    """In-memory tables honoring a generated schema."""

    def __init__(self, spec, schema=None):
        self.spec = spec
        self.schema = schema or generate_schema(spec)
        self.rows = {t.name: [] for t in self.schema.tables}

    def insert(self, table_name, cells):
        table = self.schema.table(table_name)
        expected = set(table.column_names())
        if set(cells) != expected:
            missing = expected - set(cells)
            extra = set(cells) - expected
            raise SchemaMismatchError(f"row for {table_name}: missing {sorted(missing)}, extra {sorted(extra)}")
        self.rows[table_name].append(dict(cells))

    def delete_model(self, model_id):
        for name, rows in self.rows.items():
            table = self.schema.table(name)
            if "model_id" in table.column_names():
                self.rows[name] = [r for r in rows if r["model_id"] != model_id]
        root = snake(self.spec.graphModel.name)
        self.rows[root] = [r for r in self.rows[root] if r["id"] != model_id]
        # side tables: drop rows whose owner row is gone
        owner_ids = {r["id"] for rows in self.rows.values() for r in rows if "id" in r}
        for table in self.schema.tables:
            if "owner_id" in table.column_names():
                self.rows[table.name] = [r for r in self.rows[table.name] if r["owner_id"] in owner_ids]

    def export_csv(self, directory):
        """One CSV per table, header row, RFC-4180 quoting, schema column order."""
        import pathlib

        directory = pathlib.Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for table in self.schema.tables:
            with open(directory / f"{table.name}.csv", "w", newline="", encoding="utf-8") as fh:
                fh.write(self.csv_text(table.name))

    def csv_text(self, table_name):
        table = self.schema.table(table_name)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(table.column_names())
        for row in self.rows[table_name]:
            writer.writerow(["" if row[c] is None else row[c] for c in table.column_names()])
        return buf.getvalue()


def _encode_value(adef, value):
    if adef.valueType == "boolean":
        return 1 if value else 0
    return value


def _decode_value(adef, value):
    if adef.valueType == "boolean":
        return bool(value)
    if adef.valueType == "integer":
        return int(value)
    if adef.valueType == "float":
        return float(value)
    return value


def _attr_cells(spec, store, table, type_name, owner_id, attributes, fixed):
    """Single-valued attribute cells; multi-valued ones go to side tables."""
    cells = {}
    taken = set(fixed)
    for adef in flatten_attributes(spec, type_name):
        col = _attr_column_name(adef.name, taken)
        values = attributes.get(adef.name, [])
        if adef.upper == 1:
            cells[col] = _encode_value(adef, values[0]) if values else None
        else:
            side_name = f"{table}_{col}"
            for idx, v in enumerate(values):
                store.insert(side_name, {"owner_id": owner_id, "idx": idx, "value": _encode_value(adef, v)})
    return cells


def store_snapshot(store: TableStore, model) -> None:
    """Replace all persisted rows of this model with the model's current state."""
    spec = store.spec
    store.delete_model(model.id)
    root_table = snake(spec.graphModel.name)
    cells = {
        "id": model.id,
        "model_version": model.modelVersion,
        "routing_algorithm": model.routing.get("algorithm"),
        "routing_connector": model.routing.get("connectorKind"),
    }
    cells.update(
        _attr_cells(spec, store, root_table, spec.graphModel.name, model.id, model.attributes,
                    ("id", "model_version", "routing_algorithm", "routing_connector"))
    )
    store.insert(root_table, cells)

    container_targets = [t.name for t in spec.concrete_container_types()]
    node_targets = [t.name for t in spec.concrete_node_types()]
    edge_targets = [t.name for t in spec.concrete_edge_types()]

    def container_index(el):
        if el.containerId == model.id:
            return model.rootChildren.index(el.id)
        return model.elements[el.containerId].children.index(el.id)

    for el in model.elements.values():
        if isinstance(el, model_mod.Edge):
            table = snake(el.typeName)
            if not store.schema.has_table(table):
                raise SchemaMismatchError(f"no table for edge type {el.typeName!r}")
            cells = {"id": el.id, "model_id": model.id, "version": el.version}
            for role, endpoint in (("source", el.sourceId), ("target", el.targetId)):
                endpoint_type = model.elements[endpoint].typeName
                for target in node_targets:
                    col = f"{role}_{snake(target)}"
                    cells[col] = endpoint if target == endpoint_type else None
            fixed = _FIXED_EDGE_COLUMNS + tuple(
                f"{role}_{snake(t)}" for role in ("source", "target") for t in node_targets
            )
            cells.update(_attr_cells(spec, store, table, el.typeName, el.id, el.attributes, fixed))
            store.insert(table, cells)
            for idx, (bx, by) in enumerate(el.bendPoints):
                bcells = {"id": f"{el.id}:{idx}", "model_id": model.id, "idx": idx, "x": bx, "y": by}
                for target in edge_targets:
                    col = f"edge_{snake(target)}"
                    bcells[col] = el.id if target == el.typeName else None
                store.insert(BEND_POINT_TABLE, bcells)
        else:
            table = snake(el.typeName)
            if not store.schema.has_table(table):
                raise SchemaMismatchError(f"no table for node type {el.typeName!r}")
            cells = {
                "id": el.id,
                "model_id": model.id,
                "x": el.x,
                "y": el.y,
                "width": el.width,
                "height": el.height,
                "version": el.version,
                "container_index": container_index(el),
            }
            container_type = (
                spec.graphModel.name if el.containerId == model.id else model.elements[el.containerId].typeName
            )
            for target in container_targets:
                col = f"container_{snake(target)}"
                cells[col] = el.containerId if target == container_type else None
            fixed = _FIXED_NODE_COLUMNS + tuple(f"container_{snake(c)}" for c in container_targets)
            cells.update(_attr_cells(spec, store, table, el.typeName, el.id, el.attributes, fixed))
            store.insert(table, cells)


def load_snapshot(store: TableStore, model_id):
    """Rebuild a GraphModelInstance from the store; inverse of store_snapshot."""
    spec = store.spec
    root_table = snake(spec.graphModel.name)
    root_rows = [r for r in store.rows[root_table] if r["id"] == model_id]
    if not root_rows:
        raise UnknownModelError(model_id)
    root = root_rows[0]

    def load_attrs(table, type_name, owner_id, row, fixed):
        attrs = {}
        taken = set(fixed)
        for adef in flatten_attributes(spec, type_name):
            col = _attr_column_name(adef.name, taken)
            if adef.upper == 1:
                attrs[adef.name] = [] if row[col] is None else [_decode_value(adef, row[col])]
            else:
                side = f"{table}_{col}"
                rows = sorted(
                    (r for r in store.rows[side] if r["owner_id"] == owner_id), key=lambda r: r["idx"]
                )
                attrs[adef.name] = [_decode_value(adef, r["value"]) for r in rows]
        return attrs

    model = model_mod.GraphModelInstance(
        id=model_id,
        typeName=spec.graphModel.name,
        modelVersion=root["model_version"],
        routing={"algorithm": root["routing_algorithm"], "connectorKind": root["routing_connector"]},
        attributes=load_attrs(root_table, spec.graphModel.name, model_id, root,
                              ("id", "model_version", "routing_algorithm", "routing_connector")),
    )

    container_targets = [t.name for t in spec.concrete_container_types()]
    node_targets = [t.name for t in spec.concrete_node_types()]
    edge_targets = [t.name for t in spec.concrete_edge_types()]

    ordering = {}  # containerId -> list of (index, node id)
    for t in spec.concrete_node_types():
        table = snake(t.name)
        fixed = _FIXED_NODE_COLUMNS + tuple(f"container_{snake(c)}" for c in container_targets)
        for row in store.rows[table]:
            if row["model_id"] != model_id:
                continue
            container_id = None
            for target in container_targets:
                v = row[f"container_{snake(target)}"]
                if v is not None:
                    container_id = v
            cls = model_mod.Container if spec.is_container_type(t.name) else model_mod.Node
            el = cls(
                id=row["id"],
                typeName=t.name,
                x=row["x"],
                y=row["y"],
                width=row["width"],
                height=row["height"],
                containerId=container_id,
                version=row["version"],
                attributes=load_attrs(table, t.name, row["id"], row, fixed),
            )
            model.elements[el.id] = el
            ordering.setdefault(container_id, []).append((row["container_index"], el.id))

    bend_points = {}  # edge id -> list of (idx, [x, y])
    for row in store.rows[BEND_POINT_TABLE]:
        if row["model_id"] != model_id:
            continue
        edge_id = None
        for target in edge_targets:
            v = row[f"edge_{snake(target)}"]
            if v is not None:
                edge_id = v
        bend_points.setdefault(edge_id, []).append((row["idx"], [row["x"], row["y"]]))

    for t in spec.concrete_edge_types():
        table = snake(t.name)
        fixed = _FIXED_EDGE_COLUMNS + tuple(
            f"{role}_{snake(n)}" for role in ("source", "target") for n in node_targets
        )
        for row in store.rows[table]:
            if row["model_id"] != model_id:
                continue
            source = target_id = None
            for n in node_targets:
                sv = row[f"source_{snake(n)}"]
                tv = row[f"target_{snake(n)}"]
                if sv is not None:
                    source = sv
                if tv is not None:
                    target_id = tv
            el = model_mod.Edge(
                id=row["id"],
                typeName=t.name,
                sourceId=source,
                targetId=target_id,
                version=row["version"],
                bendPoints=[p for _, p in sorted(bend_points.get(row["id"], []))],
                attributes=load_attrs(table, t.name, row["id"], row, fixed),
            )
            model.elements[el.id] = el

    for container_id, entries in ordering.items():
        ordered = [eid for _, eid in sorted(entries)]
        if container_id == model_id:
            model.rootChildren = ordered
        else:
            model.elements[container_id].children = ordered
    return model
