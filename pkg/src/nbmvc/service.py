"""Project persistence, session lifecycle, and the wire protocol.

A project lives in its own directory: ``project.json`` (metadata), the
``genesis.nbm`` snapshot taken at creation, the current ``model.nbm``, and
``events.jsonl`` holding every committed change event since genesis. Replaying
the log over the genesis snapshot must reproduce the saved model exactly;
that property backs both crash recovery and the test oracles.

Clients speak JSON messages over one WebSocket per session (plus plain HTTP
for project CRUD and code download). Message envelopes carry per-direction
sequence numbers that must ascend contiguously; within a session everything
is processed strictly first-in, first-out.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .aslt import AsltTree, ChangeEvent, create_tree
from .codegen import generate_application, generate_component_code
from .domains import (
    BUILTIN_PROFILES,
    ComponentCatalog,
    DomainProfile,
    catalog_from_trees,
    load_profile,
)
from .engine import RawEvent, Session
from .errors import (
    CannotGenerate,
    InvalidArgument,
    NotFound,
    ParseError,
    ProfileMismatch,
    SequenceGap,
    SessionGone,
    WorkbenchError,
)
from .scene import scene_hash

ROOT_KINDS = {"io": "io.project", "macro": "macro", "task": "task.app"}

_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(name: str) -> str:
    slug = _SLUG_RE.sub("-", name.lower()).strip("-")
    if not slug:
        raise InvalidArgument("project name must contain letters or digits", name=name)
    return slug


def seed_for(project_id: str) -> int:
    digest = hashlib.blake2b(project_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") << 64


@dataclass
class Project:
    id: str
    name: str
    domain: str
    created: float
    modified: float
    seed: int

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "domain": self.domain,
            "created": self.created,
            "modified": self.modified,
        }


class ProjectStore:
    """Filesystem-backed project registry with event-log persistence."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        (self.data_dir / "projects").mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _dir(self, project_id: str) -> Path:
        return self.data_dir / "projects" / project_id

    # --------------------------------------------------------------- crud

    def create(self, name: str, domain: str) -> Project:
        if domain not in ROOT_KINDS:
            raise InvalidArgument(f"unknown domain {domain!r}", supported=sorted(ROOT_KINDS))
        project_id = slugify(name)
        with self._lock:
            directory = self._dir(project_id)
            if directory.exists():
                raise InvalidArgument(f"project {project_id!r} already exists")
            directory.mkdir(parents=True)
            now = time.time()
            project = Project(
                id=project_id, name=name, domain=domain,
                created=now, modified=now, seed=seed_for(project_id),
            )
            tree = create_tree(ROOT_KINDS[domain], id_seed=project.seed)
            tree.set_value(tree.root, name)
            (directory / "genesis.nbm").write_bytes(tree.serialize())
            (directory / "model.nbm").write_bytes(tree.serialize())
            (directory / "events.jsonl").write_text("", encoding="utf-8")
            self._write_meta(project)
            return project

    def _write_meta(self, project: Project) -> None:
        doc = {**project.to_json(), "seed": project.seed}
        (self._dir(project.id) / "project.json").write_text(
            json.dumps(doc, indent=1), encoding="utf-8"
        )

    def get(self, project_id: str) -> Project:
        path = self._dir(project_id) / "project.json"
        if not path.is_file():
            raise NotFound(f"no project {project_id!r}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        return Project(
            id=doc["id"], name=doc["name"], domain=doc["domain"],
            created=doc["created"], modified=doc["modified"],
            seed=doc.get("seed", seed_for(doc["id"])),
        )

    def list_projects(self) -> list[Project]:
        out = []
        for path in sorted((self.data_dir / "projects").iterdir()):
            if (path / "project.json").is_file():
                out.append(self.get(path.name))
        return out

    def delete(self, project_id: str) -> None:
        directory = self._dir(project_id)
        if not directory.is_dir():
            raise NotFound(f"no project {project_id!r}")
        for item in sorted(directory.rglob("*"), reverse=True):
            item.unlink() if item.is_file() else item.rmdir()
        directory.rmdir()

    # --------------------------------------------------------- model files

    def load_tree(self, project: Project) -> AsltTree:
        data = (self._dir(project.id) / "model.nbm").read_bytes()
        return AsltTree.deserialize(data, id_seed=project.seed)

    def load_genesis(self, project: Project) -> AsltTree:
        data = (self._dir(project.id) / "genesis.nbm").read_bytes()
        return AsltTree.deserialize(data, id_seed=project.seed)

    def save_tree(self, project: Project, tree: AsltTree) -> None:
        (self._dir(project.id) / "model.nbm").write_bytes(tree.serialize())
        project.modified = time.time()
        self._write_meta(project)

    def append_event(self, project: Project, event: ChangeEvent) -> None:
        self.append_events(project, [event])

    def append_events(self, project: Project, events) -> None:
        lines = [
            json.dumps(event.to_json(), ensure_ascii=False, separators=(",", ":"))
            for event in events
        ]
        if not lines:
            return
        with (self._dir(project.id) / "events.jsonl").open("a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    def read_events(self, project: Project) -> list[ChangeEvent]:
        path = self._dir(project.id) / "events.jsonl"
        if not path.is_file():
            return []
        events = []
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                events.append(ChangeEvent.from_json(json.loads(line)))
            except (json.JSONDecodeError, ParseError) as exc:
                raise ParseError(
                    f"corrupt event log: {exc}", file=str(path), line=lineno
                ) from exc
        return events

    def replay(self, project: Project) -> AsltTree:
        """Fold the event log over the genesis snapshot."""
        tree = self.load_genesis(project)
        for event in self.read_events(project):
            if event.seq <= tree.version:
                continue
            tree.apply_change(event)
        tree.check_shape()
        return tree

    # ------------------------------------------------------------ profiles

    def catalog_for(self, project: Project) -> ComponentCatalog:
        trees = []
        for other in self.list_projects():
            if other.domain in ("io", "macro") and other.id != project.id:
                trees.append(self.load_tree(other))
        return catalog_from_trees(trees)

    def profile_for(self, project: Project, override: str | None = None) -> DomainProfile:
        catalog = self.catalog_for(project) if project.domain == "task" else None
        if override and override not in BUILTIN_PROFILES:
            profile = load_profile(override, catalog=catalog)
        else:
            profile = load_profile(override or project.domain, catalog=catalog)
        expected = ROOT_KINDS.get(project.domain, profile.root_kind)
        if profile.root_kind != expected:
            raise ProfileMismatch(
                f"profile {profile.name!r} does not fit a {project.domain!r} project",
                expected=expected,
                got=profile.root_kind,
            )
        return profile


def export_artifacts(store: ProjectStore, project: Project, node: str | None = None):
    """Code artifacts for a project, honouring its domain."""
    tree = store.load_tree(project)
    profile = store.profile_for(project)
    if project.domain == "task":
        return generate_application(tree, profile)
    if project.domain == "macro":
        return [generate_component_code(tree, tree.root, profile)]
    devices = [
        child
        for child in tree.node(tree.root).children
        if tree.node(child).kind == "io.device"
    ]
    if node is not None:
        devices = [d for d in devices if d == node]
        if not devices:
            raise NotFound(f"no device node {node!r}")
    artifacts = [generate_component_code(tree, device, profile) for device in devices]
    return sorted(artifacts, key=lambda a: a.path)


def entry_public_json(entry) -> dict:
    return {
        "item": entry.item,
        "glyph": entry.glyph,
        "kind": entry.kind,
        "label": entry.label,
        "wizard": entry.wizard.to_json() if entry.wizard else None,
    }


class ManagedSession:
    """A live session bound to its project and event-log subscription."""

    def __init__(self, manager: "SessionManager", session: Session, project: Project):
        self.manager = manager
        self.session = session
        self.project = project
        self.last_activity = time.time()
        self._log_subscription = session.tree.subscribe(
            lambda event: manager.store.append_event(project, event)
        )

    def touch(self) -> None:
        self.last_activity = time.time()

    def save(self) -> None:
        self.manager.store.save_tree(self.project, self.session.tree)

    def snapshot(self) -> dict:
        session = self.session
        return {
            "session": session.id,
            "project": self.project.id,
            "domain": self.project.domain,
            "tree": json.loads(session.tree.serialize().decode("utf-8")),
            "version": session.tree.version,
            "scene": session.scene.to_json(),
            "scene_hash": scene_hash(session.scene),
            "palette": [entry_public_json(e) for e in session.palette],
            "wizards": [w.to_json() for w in session.profile.wizards],
            "undo": {"can_undo": session.undo_stack.can_undo, "can_redo": session.undo_stack.can_redo},
        }

    def close(self) -> None:
        self.session.tree.unsubscribe(self._log_subscription)
        self.session.closed = True


class SessionManager:
    """Open sessions, strictly one event at a time each."""

    def __init__(self, store: ProjectStore, *, session_timeout: float = 1800.0):
        self.store = store
        self.session_timeout = session_timeout
        self._sessions: dict[str, ManagedSession] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def open(self, project_id: str, profile_override: str | None = None) -> ManagedSession:
        project = self.store.get(project_id)
        profile = self.store.profile_for(project, profile_override)
        tree = self.store.load_tree(project)
        with self._lock:
            self._counter += 1
            session_id = f"s{self._counter}"
        session = Session(tree, profile, session_id=session_id)
        managed = ManagedSession(self, session, project)
        with self._lock:
            self._sessions[session_id] = managed
        return managed

    def get(self, session_id: str) -> ManagedSession:
        self.sweep()
        managed = self._sessions.get(session_id)
        if managed is None:
            raise SessionGone(f"no open session {session_id!r}")
        managed.touch()
        return managed

    def close(self, session_id: str, *, save: bool = True) -> None:
        managed = self._sessions.pop(session_id, None)
        if managed is None:
            return
        if save:
            managed.save()
        managed.close()

    def sweep(self) -> None:
        """Flush and drop sessions idle past the timeout."""
        deadline = time.time() - self.session_timeout
        for session_id, managed in list(self._sessions.items()):
            if managed.last_activity < deadline:
                self.close(session_id, save=True)

    def close_all(self) -> None:
        for session_id in list(self._sessions):
            self.close(session_id, save=True)


# ------------------------------------------------------------------ fastapi


def create_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="nbmvc", version="0.1.0")
    app.state.manager = manager

    def error_response(exc: WorkbenchError, status: int):
        return JSONResponse(
            status_code=status,
            content={"error": exc.code, "message": str(exc)},
        )

    @app.get("/api/domains")
    def get_domains():
        return {"domains": sorted(ROOT_KINDS)}

    @app.get("/api/projects")
    def get_projects():
        return {"projects": [p.to_json() for p in manager.store.list_projects()]}

    @app.post("/api/projects")
    def post_project(body: dict):
        try:
            project = manager.store.create(str(body.get("name", "")), str(body.get("domain", "")))
        except InvalidArgument as exc:
            return error_response(exc, 400)
        return JSONResponse(status_code=201, content=project.to_json())

    @app.delete("/api/projects/{project_id}")
    def delete_project(project_id: str):
        try:
            manager.store.delete(project_id)
        except NotFound as exc:
            return error_response(exc, 404)
        return JSONResponse(status_code=200, content={"deleted": project_id})

    @app.get("/api/projects/{project_id}/code")
    def get_code(project_id: str):
        try:
            project = manager.store.get(project_id)
            artifacts = export_artifacts(manager.store, project)
        except NotFound as exc:
            return error_response(exc, 404)
        except CannotGenerate as exc:
            return JSONResponse(
                status_code=409,
                content={
                    "error": exc.code,
                    "diagnostics": [d.to_json() for d in exc.diagnostics],
                },
            )
        return {"artifacts": [a.to_json() for a in artifacts]}

    @app.websocket("/ws")
    async def websocket_channel(ws: WebSocket):
        await ws.accept()
        channel = Channel(manager)
        try:
            while True:
                text = await ws.receive_text()
                for reply in channel.handle_text(text):
                    await ws.send_text(json.dumps(reply, ensure_ascii=False))
        except WebSocketDisconnect:
            channel.disconnect()

    return app


class Channel:
    """One protocol channel: envelope sequencing plus message dispatch.

    Transport-agnostic so the CLI and tests drive it without sockets.
    """

    def __init__(self, manager: SessionManager):
        self.manager = manager
        self.session_id: str | None = None
        self.client_seq = 0
        self.server_seq = 0

    # -------------------------------------------------------------- plumbing

    def _envelope(self, type_: str, body: dict) -> dict:
        self.server_seq += 1
        return {
            "type": type_,
            "session": self.session_id,
            "seq": self.server_seq,
            "body": body,
        }

    def _error(self, exc: WorkbenchError) -> dict:
        return self._envelope("error", {"code": exc.code, "message": str(exc)})

    def handle_text(self, text: str) -> list[dict]:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            return [self._error(ParseError(f"message is not JSON: {exc}"))]
        return self.handle(doc)

    def handle(self, doc: dict) -> list[dict]:
        if not isinstance(doc, dict) or "type" not in doc:
            return [self._error(ParseError("messages need a 'type' field"))]
        seq = doc.get("seq")
        if seq != self.client_seq + 1:
            return [self._error(SequenceGap("client sequence must ascend contiguously",
                                            expected=self.client_seq + 1, got=seq))]
        self.client_seq = seq
        handler = getattr(self, f"_on_{doc['type']}", None)
        if handler is None:
            return [self._error(InvalidArgument(f"unknown message type {doc['type']!r}"))]
        body = doc.get("body") or {}
        try:
            return handler(body)
        except WorkbenchError as exc:
            return [self._error(exc)]

    def _session(self) -> ManagedSession:
        if self.session_id is None:
            raise SessionGone("no session opened on this channel")
        return self.manager.get(self.session_id)

    def disconnect(self) -> None:
        if self.session_id is not None:
            self.manager.close(self.session_id, save=True)
            self.session_id = None

    # -------------------------------------------------------------- messages

    def _on_open_session(self, body: dict) -> list[dict]:
        if self.session_id is not None:
            raise InvalidArgument("this channel already has a session")
        managed = self.manager.open(str(body.get("project", "")), body.get("profile"))
        self.session_id = managed.session.id
        return [self._envelope("snapshot", managed.snapshot())]

    def _trace_reply(self, managed: ManagedSession, trace) -> dict:
        session = managed.session
        if trace.outcome == "applied":
            return self._envelope(
                "applied",
                {
                    "change_events": [e.to_json() for e in trace.change_events],
                    "view_patch": trace.view_patch.to_json() if trace.view_patch else [],
                    "version": session.tree.version,
                    "scene_hash": scene_hash(session.scene),
                    "steps": [s.to_json() for s in trace.steps],
                },
            )
        if trace.wizard is not None:
            return self._envelope(
                "needs_wizard",
                {"wizard_id": trace.wizard_id, "spec": trace.wizard.to_json()},
            )
        if trace.outcome == "rejected":
            return self._envelope(
                "rejected", {"diagnostics": [d.to_json() for d in trace.diagnostics]}
            )
        return self._envelope("noop", {"steps": [s.to_json() for s in trace.steps]})

    def _on_raw_event(self, body: dict) -> list[dict]:
        managed = self._session()
        raw = RawEvent.from_json(body.get("event") or {})
        trace = managed.session.run_cycle(raw)
        return [self._trace_reply(managed, trace)]

    def _on_wizard_answers(self, body: dict) -> list[dict]:
        managed = self._session()
        event = managed.session.wizard_complete(
            str(body.get("wizard_id", "")), body.get("answers") or {}
        )
        trace = managed.session.run_model_event(event)
        return [self._trace_reply(managed, trace)]

    def _undo_redo(self, action: str) -> list[dict]:
        managed = self._session()
        session = managed.session
        events = session.undo() if action == "undo" else session.redo()
        return [
            self._envelope(
                "applied",
                {
                    "change_events": [e.to_json() for e in events],
                    "view_patch": session.last_patch.to_json(),
                    "version": session.tree.version,
                    "scene_hash": scene_hash(session.scene),
                    "steps": [],
                },
            )
        ]

    def _on_undo(self, body: dict) -> list[dict]:
        return self._undo_redo("undo")

    def _on_redo(self, body: dict) -> list[dict]:
        return self._undo_redo("redo")

    def _on_save(self, body: dict) -> list[dict]:
        managed = self._session()
        managed.save()
        return [self._envelope("noop", {"saved": True, "version": managed.session.tree.version})]

    def _on_export_code(self, body: dict) -> list[dict]:
        managed = self._session()
        managed.save()
        try:
            artifacts = export_artifacts(
                self.manager.store, managed.project, body.get("node")
            )
        except CannotGenerate as exc:
            return [
                self._envelope(
                    "error",
                    {
                        "code": exc.code,
                        "message": str(exc),
                        "diagnostics": [d.to_json() for d in exc.diagnostics],
                    },
                )
            ]
        return [self._envelope("code", {"artifacts": [a.to_json() for a in artifacts]})]

    def _on_fold_selection(self, body: dict) -> list[dict]:
        managed = self._session()
        session = managed.session
        selection = body.get("selection")
        composite = session.fold_selection(str(body.get("name", "")), selection)
        events = session.undo_stack.entries[session.undo_stack.cursor - 1].forward
        return [
            self._envelope(
                "applied",
                {
                    "change_events": [e.to_json() for e in events],
                    "view_patch": session.last_patch.to_json(),
                    "version": session.tree.version,
                    "scene_hash": scene_hash(session.scene),
                    "composite": composite,
                    "steps": [],
                },
            )
        ]
