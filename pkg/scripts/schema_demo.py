#!/usr/bin/env python3
"""Generate the relational schema for a metamodel and round-trip a model.

Prints the CREATE TABLE statements, executes them in an in-memory sqlite
database as a sanity check, then stores and reloads a small demo model.

Usage:
    python3 scripts/schema_demo.py [metamodel.yaml]
"""

import importlib.resources as ir
import sqlite3
import sys

from collabgraph import model as mm
from collabgraph import protocol as p
from collabgraph.metamodel import parse_metamodel
from collabgraph.schema import (
    TableStore,
    emit_ddl,
    generate_schema,
    load_snapshot,
    store_snapshot,
)


def main():
    if len(sys.argv) > 1:
        text = open(sys.argv[1], encoding="utf-8").read()
    else:
        text = (ir.files("collabgraph") / "samples" / "flowchart.yaml").read_text()
    spec = parse_metamodel(text)

    ddl = emit_ddl(generate_schema(spec))
    print(ddl)

    sqlite3.connect(":memory:").executescript(ddl)
    print("-- DDL accepted by sqlite3")

    model = mm.new_model(spec, "demo")
    for cmd in (
        p.CreateNode(id="s", typeName="Start", containerId="demo", x=10, y=10),
        p.CreateNode(id="t", typeName="Task", containerId="demo", x=120, y=10,
                     initialAttributes={"label": ["work"]}),
        p.CreateEdge(id="f", typeName="Flow", sourceId="s", targetId="t",
                     bendPoints=[[80, 30]]),
    ):
        result = mm.apply_command(model, spec, cmd, check_stale=True)
        assert result.applied, result

    store = TableStore(spec)
    store_snapshot(store, model)
    loaded = load_snapshot(store, "demo")
    assert mm.models_equal(model, loaded), mm.diff_models(model, loaded)
    rows = sum(len(r) for r in store.rows.values())
    print(f"-- stored and reloaded demo model ({rows} rows) without loss")


if __name__ == "__main__":
    main()
