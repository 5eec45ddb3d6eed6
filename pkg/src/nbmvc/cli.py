"""The nbmvc command line: serve the workbench or drive it headless.

Everything the browser UI can do is reachable from here: `apply-event`
replays scripted raw events (plus wizard answers, undo/redo, save and code
export) through the same session engine the service uses.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .aslt import trees_equal
from .codegen import compile_task, evaluate_task
from .domains import validate_model
from .errors import CannotGenerate, WorkbenchError
from .service import ProjectStore, SessionManager, export_artifacts

DEFAULT_DATA_DIR = str(Path.home() / ".nbmvc")


def _store(data_dir: str) -> ProjectStore:
    return ProjectStore(data_dir)


data_dir_option = click.option(
    "--data-dir",
    envvar="NBMVC_DATA_DIR",
    default=DEFAULT_DATA_DIR,
    show_default=True,
    help="Project storage directory (env: NBMVC_DATA_DIR).",
)


@click.group()
def main() -> None:
    """Model, validate, generate and serve nbmvc projects."""


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--session-timeout", default=1800.0, show_default=True, help="Idle seconds before flush.")
@data_dir_option
def serve(port: int, host: str, session_timeout: float, data_dir: str) -> None:
    """Run the HTTP/WebSocket service."""
    import uvicorn

    from .service import create_app

    manager = SessionManager(_store(data_dir), session_timeout=session_timeout)
    uvicorn.run(create_app(manager), host=host, port=port, log_level="info")


@main.command()
@click.option("--domain", type=click.Choice(["io", "macro", "task"]), required=True)
@click.option("--name", required=True)
@data_dir_option
def new(domain: str, name: str, data_dir: str) -> None:
    """Create a project with an empty model."""
    try:
        project = _store(data_dir).create(name, domain)
    except WorkbenchError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"created {project.domain} project {project.id!r}")


@main.command(name="apply-event")
@click.option("--project", "project_id", required=True)
@click.option("--file", "script", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--strict", is_flag=True, help="Exit non-zero if any event is rejected.")
@data_dir_option
def apply_event(project_id: str, script: str, strict: bool, data_dir: str) -> None:
    """Replay a JSONL script of raw events and session actions."""
    manager = SessionManager(_store(data_dir))
    try:
        managed = manager.open(project_id)
    except WorkbenchError as exc:
        raise click.ClickException(str(exc))
    session = managed.session
    rejected = 0
    try:
        for lineno, line in enumerate(Path(script).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise click.ClickException(f"{script}:{lineno}: not JSON: {exc}")
            kind = doc.get("type") or ("raw_event" if "source" in doc else None)
            try:
                if kind == "raw_event":
                    from .engine import RawEvent

                    raw = RawEvent.from_json(doc.get("event", doc))
                    trace = session.run_cycle(raw)
                    note = trace.outcome
                    if trace.wizard_id:
                        note = f"needs-wizard {trace.wizard_id}"
                    if trace.outcome == "rejected":
                        rejected += 1
                        note += ": " + "; ".join(d.message for d in trace.diagnostics)
                    click.echo(f"{lineno} {note} version={session.tree.version}")
                elif kind == "wizard_answers":
                    event = session.wizard_complete(doc["wizard_id"], doc.get("answers", {}))
                    trace = session.run_model_event(event)
                    if trace.outcome == "rejected":
                        rejected += 1
                    click.echo(f"{lineno} {trace.outcome} version={session.tree.version}")
                elif kind == "undo":
                    session.undo()
                    click.echo(f"{lineno} undone version={session.tree.version}")
                elif kind == "redo":
                    session.redo()
                    click.echo(f"{lineno} redone version={session.tree.version}")
                elif kind == "fold_selection":
                    composite = session.fold_selection(doc.get("name", ""), doc.get("selection"))
                    click.echo(f"{lineno} folded {composite}")
                elif kind == "save":
                    managed.save()
                    click.echo(f"{lineno} saved version={session.tree.version}")
                elif kind == "export_code":
                    artifacts = export_artifacts(manager.store, managed.project)
                    click.echo(f"{lineno} exported {len(artifacts)} artifacts")
                else:
                    raise click.ClickException(f"{script}:{lineno}: unknown action {kind!r}")
            except WorkbenchError as exc:
                rejected += 1
                click.echo(f"{lineno} error {exc.code}: {exc}")
    finally:
        manager.close(session.id, save=True)
    if strict and rejected:
        raise click.ClickException(f"{rejected} events rejected")


@main.command()
@click.option("--project", "project_id", required=True)
@data_dir_option
def validate(project_id: str, data_dir: str) -> None:
    """Print validation diagnostics; exit 1 on errors."""
    store = _store(data_dir)
    try:
        project = store.get(project_id)
        tree = store.load_tree(project)
        profile = store.profile_for(project)
    except WorkbenchError as exc:
        raise click.ClickException(str(exc))
    diagnostics = validate_model(tree, profile)
    for diag in diagnostics:
        click.echo(f"{diag.severity}: [{diag.rule}] {diag.message} (node {diag.node})")
    if not diagnostics:
        click.echo("ok: no diagnostics")
    if any(d.severity == "error" for d in diagnostics):
        sys.exit(1)


@main.command(name="export-code")
@click.option("--project", "project_id", required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@data_dir_option
def export_code(project_id: str, out_dir: str, data_dir: str) -> None:
    """Generate NDL artifacts into a directory (nothing on validation errors)."""
    store = _store(data_dir)
    try:
        project = store.get(project_id)
        artifacts = export_artifacts(store, project)
    except CannotGenerate as exc:
        for diag in exc.diagnostics:
            click.echo(f"error: [{diag.rule}] {diag.message} (node {diag.node})")
        raise click.ClickException("model has validation errors; nothing written")
    except WorkbenchError as exc:
        raise click.ClickException(str(exc))
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    for artifact in artifacts:
        (target / artifact.path).write_text(artifact.content, encoding="utf-8")
        click.echo(f"wrote {target / artifact.path}")


def _parse_inputs(text: str) -> dict:
    values = {}
    if not text:
        return values
    for pair in text.split(","):
        if not pair.strip():
            continue
        key, _, raw = pair.partition("=")
        raw = raw.strip()
        if raw.lower() in ("true", "false"):
            value = raw.lower() == "true"
        else:
            try:
                value = int(raw)
            except ValueError:
                try:
                    value = float(raw)
                except ValueError:
                    value = raw
        values[key.strip()] = value
    return values


@main.command(name="eval-task")
@click.option("--project", "project_id", required=True)
@click.option("--inputs", default="", help="Comma-separated pin=value pairs.")
@data_dir_option
def eval_task(project_id: str, inputs: str, data_dir: str) -> None:
    """Compile a task project and run one synchronous evaluation sweep."""
    store = _store(data_dir)
    try:
        project = store.get(project_id)
        if project.domain != "task":
            raise click.ClickException("eval-task needs a task project")
        tree = store.load_tree(project)
        program = compile_task(tree, store.catalog_for(project))
        outputs = evaluate_task(program, _parse_inputs(inputs))
    except WorkbenchError as exc:
        raise click.ClickException(str(exc))
    for key in sorted(outputs):
        click.echo(f"{key}={json.dumps(outputs[key])}")


@main.command()
@click.option("--project", "project_id", required=True)
@data_dir_option
def replay(project_id: str, data_dir: str) -> None:
    """Fold the event log over the genesis snapshot and compare to the model."""
    store = _store(data_dir)
    try:
        project = store.get(project_id)
        replayed = store.replay(project)
        saved = store.load_tree(project)
    except WorkbenchError as exc:
        raise click.ClickException(str(exc))
    if trees_equal(replayed, saved):
        click.echo(f"replay ok: {len(store.read_events(project))} events -> version {saved.version}")
    else:
        raise click.ClickException("replay mismatch: log does not reproduce the saved model")


if __name__ == "__main__":
    main()
