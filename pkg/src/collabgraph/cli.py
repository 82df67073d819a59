"""Command-line entry points.

Exit codes:
  0  success
  1  validation failed / scenario did not converge / interpreter fault
  2  usage or input error (unreadable file, malformed document)
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import harness as harness_mod
from . import interpreter as interp_mod
from . import metamodel as metamodel_mod
from . import model as model_mod
from . import schema as schema_mod
from .errors import CollabGraphError, InterpreterError


def _read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise click.ClickException(str(exc)) from exc


def _emit(data, fmt):
    if fmt == "structured":
        click.echo(json.dumps(data, indent=2, sort_keys=True))
        return True
    return False


@click.group()
def main():
    """Collaborative graph modeling toolkit."""


@main.command()
@click.argument("metamodel_file", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="text")
def validate(metamodel_file, fmt):
    """Check a metamodel document; exit 1 when diagnostics are found."""
    text = _read(metamodel_file)
    try:
        spec = metamodel_mod.parse_metamodel(text)
    except CollabGraphError as exc:
        if not _emit({"ok": False, "error": str(exc)}, fmt):
            click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    diags = metamodel_mod.validate_metamodel(spec)
    payload = {
        "ok": not diags,
        "diagnostics": [
            {"rule": d.rule, "element": d.element, "message": d.message} for d in diags
        ],
    }
    if not _emit(payload, fmt):
        for d in diags:
            click.echo(str(d))
        click.echo("ok" if not diags else f"{len(diags)} problem(s)")
    sys.exit(0 if not diags else 1)


@main.command()
@click.argument("metamodel_file", type=click.Path(exists=True))
@click.option("--ddl", "ddl_out", type=click.Path(), help="write CREATE TABLE statements here")
@click.option("--csv", "csv_dir", type=click.Path(), help="export empty per-table CSV files here")
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="text")
def schema(metamodel_file, ddl_out, csv_dir, fmt):
    """Derive the relational schema for a metamodel."""
    try:
        spec = metamodel_mod.parse_metamodel(_read(metamodel_file))
    except CollabGraphError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    rel = schema_mod.generate_schema(spec)
    ddl = schema_mod.emit_ddl(rel)
    if ddl_out:
        Path(ddl_out).write_text(ddl, encoding="utf-8")
    if csv_dir:
        store = schema_mod.TableStore(spec, rel)
        out = Path(csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        for table in rel.tables:
            (out / f"{table.name}.csv").write_text(
                store.csv_text(table.name), encoding="utf-8"
            )
    payload = {
        "tables": [
            {"name": t.name, "columns": [c.name for c in t.columns]} for t in rel.tables
        ]
    }
    if not _emit(payload, fmt):
        if not ddl_out:
            click.echo(ddl, nl=False)
        else:
            click.echo(f"wrote {ddl_out}")
    sys.exit(0)


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True), help="YAML service config")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--metamodel", "metamodel_file", type=click.Path(exists=True), default=None)
def serve(config_file, host, port, metamodel_file):
    """Run the websocket/HTTP service."""
    from .service import ServiceConfig, load_config, run_service

    config = load_config(config_file) if config_file else ServiceConfig()
    if host:
        config.host = host
    if port:
        config.port = port
    if metamodel_file:
        config.metamodel_path = metamodel_file
    run_service(config)


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="text")
def simulate(scenario_file, fmt):
    """Run a deterministic multi-client scenario; exit 1 on divergence."""
    try:
        scenario = harness_mod.load_scenario(_read(scenario_file))
        report = harness_mod.run_scenario(scenario)
    except CollabGraphError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    payload = dataclasses.asdict(report)
    if not _emit(payload, fmt):
        click.echo(f"converged: {report.converged}")
        click.echo(
            f"committed={report.committed} rejected={report.rejected} "
            f"reverted={report.reverted} broadcasts={report.broadcasts}"
        )
        click.echo(f"virtual time: {report.virtualTime}")
        for idx, diffs in sorted(report.perClientDiff.items()):
            for d in diffs:
                click.echo(f"client {idx}: {d}")
    sys.exit(0 if report.converged and report.replayMatches else 1)


@main.command()
@click.argument("metamodel_file", type=click.Path(exists=True))
@click.argument("model_file", type=click.Path(exists=True))
@click.option("--interpreter", "interp_name", default="flowchart", show_default=True)
@click.option("--max-steps", type=int, default=10_000, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="text")
def interpret(metamodel_file, model_file, interp_name, max_steps, fmt):
    """Execute a model with a named interpreter and print the trace."""
    try:
        spec = metamodel_mod.parse_metamodel(_read(metamodel_file))
        model = model_mod.model_from_dict(json.loads(_read(model_file)))
        definition = interp_mod.get_interpreter(interp_name, max_steps)
    except (CollabGraphError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    try:
        ctx = interp_mod.run(definition, model, spec)
    except InterpreterError as exc:
        if not _emit({"ok": False, "error": str(exc)}, fmt):
            click.echo(f"fault: {exc}", err=True)
        sys.exit(1)
    payload = {
        "ok": True,
        "steps": ctx.steps,
        "trace": [
            {"step": t.step, "element": t.elementId, "type": t.typeName,
             "dispatched": t.dispatchedType}
            for t in ctx.trace
        ],
        "skips": [{"element": e, "type": t} for e, t in ctx.skips],
        "bindings": {
            k: sorted(v) if isinstance(v, set) else v for k, v in ctx.bindings.items()
        },
    }
    if not _emit(payload, fmt):
        for t in ctx.trace:
            click.echo(f"{t.step:4d}  {t.elementId}  ({t.typeName} via {t.dispatchedType})")
        if ctx.skips:
            click.echo(f"skipped: {', '.join(e for e, _ in ctx.skips)}")
    sys.exit(0)


if __name__ == "__main__":
    main()
