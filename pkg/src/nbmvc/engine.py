"""The event engine: raw gestures in, classified events, processors, view out.

One session owns one model tree, one profile and one scene, and processes raw
events strictly one at a time through the numbered cycle:

1. a raw event arrives from the view,
2. the view classifies it into a complex model event (or drops it),
3. the controller decides: resolve the processor, consult wizards and rules,
4. the processor mutates the model transactionally,
5. the model publishes its change events,
6. the view constructor refreshes the scene,
7. the produced view patch reaches the view subscribers.

Every cycle returns a :class:`CycleTrace` recording exactly the steps it
reached. Rejected and no-op cycles leave the model version and the scene
untouched; applied cycles push exactly one undo entry.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

from .aslt import AsltTree, ChangeEvent, NodeId, Scalar, decode_value, is_node_id
from .domains import (
    ComponentCatalog,
    Diagnostic,
    DomainProfile,
    Endpoint,
    PaletteEntry,
    PortType,
    WizardSpec,
    _ScopeChecker,
    derive_extended_element,
    display_name,
    palette_entry_for_composite,
    parse_endpoint,
    wire_meta_keys,
)
from .errors import (
    InvalidAnswer,
    InvalidArgument,
    MalformedRawEvent,
    NoProcessor,
    NotFound,
    TransactionRolledBack,
    WorkbenchError,
)
from .processors import (
    DomainProcessor,
    InstructionRecorder,
    UndoStack,
    run_transaction,
)
from .scene import (
    Filter,
    Scene,
    ViewPatch,
    construct_scene,
    diff_scenes,
    next_group_id,
)

log = logging.getLogger(__name__)


class RawSource(Enum):
    MODELLING_PANE = "ModellingPane"
    TOOLBAR = "Toolbar"
    PROPERTY_INSPECTOR = "PropertyInspector"
    EXTERNAL = "External"


class RawKind(Enum):
    DROP = "Drop"
    CLICK = "Click"
    DRAG_END = "DragEnd"
    FIELD_EDIT = "FieldEdit"
    KEY_COMMAND = "KeyCommand"


@dataclass(frozen=True)
class RawEvent:
    source: RawSource
    kind: RawKind
    position: tuple[float, float] | None = None
    payload: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "source": self.source.value,
            "kind": self.kind.value,
            "position": list(self.position) if self.position else None,
            "payload": dict(self.payload),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RawEvent":
        try:
            source = RawSource(doc["source"])
            kind = RawKind(doc["kind"])
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedRawEvent(f"malformed raw event: {exc}") from exc
        position = doc.get("position")
        if position is not None:
            if not isinstance(position, (list, tuple)) or len(position) != 2:
                raise MalformedRawEvent("position must be a pair")
            position = (float(position[0]), float(position[1]))
        payload = doc.get("payload") or {}
        if not isinstance(payload, dict):
            raise MalformedRawEvent("payload must be a map")
        return cls(source=source, kind=kind, position=position, payload=dict(payload))


class ModelEventKind(Enum):
    ELEMENT_DROPPED = "ElementDropped"
    ELEMENT_REMOVED = "ElementRemoved"
    BINDING_CREATED = "BindingCreated"
    BINDING_REMOVED = "BindingRemoved"
    PROPERTY_EDITED = "PropertyEdited"
    ELEMENT_MOVED = "ElementMoved"
    FILTER_TOGGLED = "FilterToggled"
    GROUP_CREATED = "GroupCreated"
    SUBMODEL_TOGGLED = "SubmodelToggled"


@dataclass(frozen=True)
class ModelEvent:
    kind: ModelEventKind
    subject: NodeId | None
    payload: dict

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "subject": self.subject, "payload": dict(self.payload)}


@dataclass(frozen=True)
class TraceStep:
    step: int
    description: str
    seq_refs: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {"step": self.step, "description": self.description, "seq_refs": list(self.seq_refs)}


@dataclass
class CycleTrace:
    steps: list[TraceStep] = field(default_factory=list)
    outcome: str = "no-op"
    diagnostics: list[Diagnostic] = field(default_factory=list)
    wizard: WizardSpec | None = None
    wizard_id: str | None = None
    change_events: tuple[ChangeEvent, ...] = ()
    view_patch: ViewPatch | None = None

    def add(self, step: int, description: str, seq_refs: tuple[int, ...] = ()) -> None:
        if self.steps and step <= self.steps[-1].step:
            raise InvalidArgument("trace steps must ascend", step=step)
        self.steps.append(TraceStep(step, description, seq_refs))

    def step_numbers(self) -> list[int]:
        return [s.step for s in self.steps]

    def to_json(self) -> dict:
        return {
            "steps": [s.to_json() for s in self.steps],
            "outcome": self.outcome,
            "diagnostics": [d.to_json() for d in self.diagnostics],
            "wizard": self.wizard.to_json() if self.wizard else None,
            "wizard_id": self.wizard_id,
            "change_events": [e.to_json() for e in self.change_events],
            "view_patch": self.view_patch.to_json() if self.view_patch is not None else None,
        }


@dataclass(frozen=True)
class ControllerResult:
    status: str  # applied | needs-wizard | rejected
    events: tuple[ChangeEvent, ...] = ()
    wizard: WizardSpec | None = None
    wizard_id: str | None = None
    diagnostics: tuple[Diagnostic, ...] = ()
    processor: str | None = None
    scene_only: bool = False
    filter_change: Filter | None = None


def _coerce_number(value: float) -> Scalar:
    return int(value) if float(value).is_integer() else float(value)


class Session:
    """One open model with its scene, selection, undo history and listeners."""

    def __init__(
        self,
        tree: AsltTree,
        profile: DomainProfile,
        *,
        session_id: str = "local",
    ):
        self.id = session_id
        self.tree = tree
        self.profile = profile
        self.registry = profile.build_registry()
        self.undo_stack = UndoStack()
        self.extra_palette: list[PaletteEntry] = []
        self.scene: Scene = construct_scene(tree, profile)
        self.selection: list[NodeId] = []
        self._view_subscribers: dict[int, object] = {}
        self._subscriber_counter = 0
        self._pending_wizards: dict[str, tuple[WizardSpec, ModelEvent]] = {}
        self._wizard_counter = 0
        self.closed = False

    # ------------------------------------------------------------- palette

    @property
    def palette(self) -> list[PaletteEntry]:
        return list(self.profile.palette) + list(self.extra_palette)

    def palette_entry(self, item: str) -> PaletteEntry | None:
        for entry in self.palette:
            if entry.item == item:
                return entry
        return None

    # ------------------------------------------------------ classification

    def ingest_raw(self, raw: RawEvent) -> ModelEvent | None:
        """Steps 1-2: classify a raw event; None when nothing classifies."""
        handler = {
            RawKind.DROP: self._classify_drop,
            RawKind.DRAG_END: self._classify_drag_end,
            RawKind.CLICK: self._classify_click,
            RawKind.FIELD_EDIT: self._classify_field_edit,
            RawKind.KEY_COMMAND: self._classify_key_command,
        }[raw.kind]
        return handler(raw)

    def _position_payload(self, raw: RawEvent) -> dict:
        if raw.position is None:
            return {"x": 40, "y": 40}
        return {"x": _coerce_number(raw.position[0]), "y": _coerce_number(raw.position[1])}

    def _classify_drop(self, raw: RawEvent) -> ModelEvent | None:
        if raw.source is not RawSource.TOOLBAR:
            return None
        item = raw.payload.get("palette_item")
        if not item:
            raise MalformedRawEvent("toolbar drops must carry 'palette_item'")
        entry = self.palette_entry(item)
        if entry is None:
            raise MalformedRawEvent(f"unknown palette item {item!r}")
        payload = {
            key: value
            for key, value in raw.payload.items()
            if key not in ("palette_item",)
        }
        payload.update(self._position_payload(raw))
        payload["kind"] = entry.kind
        payload["palette_item"] = item
        return ModelEvent(ModelEventKind.ELEMENT_DROPPED, None, payload)

    def _classify_drag_end(self, raw: RawEvent) -> ModelEvent | None:
        p = raw.payload
        if all(k in p for k in ("from_node", "from_port", "to_node", "to_port")):
            return ModelEvent(
                ModelEventKind.BINDING_CREATED,
                p["from_node"],
                {
                    "from_node": p["from_node"],
                    "from_port": p["from_port"],
                    "to_node": p["to_node"],
                    "to_port": p["to_port"],
                },
            )
        target = p.get("target")
        if target and target in self.tree.nodes:
            payload = {"node": target}
            payload.update(self._position_payload(raw))
            return ModelEvent(ModelEventKind.ELEMENT_MOVED, target, payload)
        return None

    def _classify_click(self, raw: RawEvent) -> ModelEvent | None:
        p = raw.payload
        if "filter" in p:
            payload = {
                "filter": p["filter"],
                "filter_kind": p.get("filter_kind", "by-kind"),
                "arg": p.get("arg", p["filter"].split(":", 1)[-1]),
                "active": str(p.get("active", "true")).lower() == "true",
            }
            return ModelEvent(ModelEventKind.FILTER_TOGGLED, None, payload)
        if "toggle_submodel" in p:
            node = p["toggle_submodel"]
            if node not in self.tree.nodes:
                return None
            current = bool(self.tree.get_meta(node, "view.collapsed", False))
            collapsed = (
                str(p["collapsed"]).lower() == "true" if "collapsed" in p else not current
            )
            return ModelEvent(
                ModelEventKind.SUBMODEL_TOGGLED, node, {"node": node, "collapsed": collapsed}
            )
        target = p.get("target")
        if target and target in self.tree.nodes:
            if str(p.get("additive", "")).lower() == "true":
                if target not in self.selection:
                    self.selection.append(target)
            else:
                self.selection = [target]
        else:
            self.selection = []
        return None

    def _classify_field_edit(self, raw: RawEvent) -> ModelEvent | None:
        p = raw.payload
        if "field" not in p:
            return None
        target = p.get("target") or (self.selection[0] if self.selection else None)
        if not target or target not in self.tree.nodes:
            return None
        return ModelEvent(
            ModelEventKind.PROPERTY_EDITED,
            target,
            {"node": target, "field": p["field"], "value": p.get("value", "")},
        )

    def _classify_key_command(self, raw: RawEvent) -> ModelEvent | None:
        command = raw.payload.get("command", "")
        if command == "delete":
            target = raw.payload.get("target") or (self.selection[0] if self.selection else None)
            if not target or target not in self.tree.nodes:
                return None
            kind = self.tree.node(target).kind
            event_kind = (
                ModelEventKind.BINDING_REMOVED
                if kind in self.profile.relation_kinds
                else ModelEventKind.ELEMENT_REMOVED
            )
            return ModelEvent(event_kind, target, {"node": target})
        if command == "group":
            raw_members = raw.payload.get("members")
            members = (
                [m for m in raw_members.split(",") if m]
                if raw_members
                else list(self.selection)
            )
            members = [m for m in members if m in self.tree.nodes]
            if not members:
                return None
            return ModelEvent(
                ModelEventKind.GROUP_CREATED, members[0], {"members": ",".join(members)}
            )
        return None

    # ------------------------------------------------------------ controller

    def controller_handle(self, event: ModelEvent) -> ControllerResult:
        """Step 3 (and 4 when it applies): decide and mutate transactionally."""
        kind = event.kind.value
        if kind in self.profile.unsupported_events:
            return ControllerResult(
                "rejected",
                diagnostics=(
                    Diagnostic("error", event.subject, "unsupported", f"{kind} is unsupported in this domain"),
                ),
            )
        try:
            processor = self.registry.resolve(self.profile.name, kind)
        except NoProcessor as exc:
            return ControllerResult(
                "rejected",
                diagnostics=(Diagnostic("error", event.subject, "no-processor", str(exc)),),
            )
        wizard = self._wizard_for(event)
        payload = event.payload
        if wizard is not None:
            missing = wizard.missing_required(payload)
            if missing:
                self._wizard_counter += 1
                wizard_id = f"w{self._wizard_counter}"
                self._pending_wizards[wizard_id] = (wizard, event)
                return ControllerResult("needs-wizard", wizard=wizard, wizard_id=wizard_id)
            try:
                payload = wizard.complete(payload)
            except InvalidAnswer as exc:
                return ControllerResult(
                    "rejected",
                    diagnostics=(Diagnostic("error", event.subject, "invalid-answer", str(exc)),),
                )
            event = replace(event, payload=payload)
        if kind == "FilterToggled":
            flt = Filter(
                id=str(payload["filter"]),
                kind=str(payload.get("filter_kind", "by-kind")),
                arg=payload.get("arg"),
                active=bool(payload.get("active", True)),
            )
            events = run_transaction(self.tree, [])  # empty transaction, one undo entry
            self.undo_stack.push_events(events, label=kind)
            return ControllerResult(
                "applied", events=tuple(events), processor=processor.name,
                scene_only=True, filter_change=flt,
            )
        try:
            instructions = self._instantiate(processor, event)
        except WorkbenchError as exc:
            return ControllerResult(
                "rejected",
                diagnostics=(Diagnostic("error", event.subject, exc.code, str(exc)),),
            )
        try:
            events = run_transaction(self.tree, instructions)
        except TransactionRolledBack as exc:
            return ControllerResult(
                "rejected",
                diagnostics=(Diagnostic("error", event.subject, exc.code, str(exc)),),
            )
        self.undo_stack.push_events(events, label=kind)
        self.selection = [n for n in self.selection if n in self.tree.nodes]
        return ControllerResult("applied", events=tuple(events), processor=processor.name)

    def preview_instructions(self, event: ModelEvent):
        """The concrete instruction list the controller would apply.

        Follows the same decision path as :meth:`controller_handle` but never
        mutates; raises when the event would be rejected or needs a wizard.
        """
        kind = event.kind.value
        if kind in self.profile.unsupported_events:
            raise InvalidArgument(f"{kind} is unsupported in this domain")
        processor = self.registry.resolve(self.profile.name, kind)
        wizard = self._wizard_for(event)
        if wizard is not None:
            missing = wizard.missing_required(event.payload)
            if missing:
                raise InvalidArgument(f"missing wizard fields: {missing}")
            event = replace(event, payload=wizard.complete(event.payload))
        if kind == "FilterToggled":
            return processor, [], event
        return processor, self._instantiate(processor, event), event

    def _wizard_for(self, event: ModelEvent) -> WizardSpec | None:
        if event.kind is ModelEventKind.ELEMENT_DROPPED:
            entry = self.palette_entry(str(event.payload.get("palette_item", "")))
            return entry.wizard if entry else None
        entry_wizard_ids = {e.wizard.id for e in self.palette if e.wizard}
        for wizard in self.profile.wizards:
            if wizard.produced_for == event.kind.value and wizard.id not in entry_wizard_ids:
                return wizard
        return None

    # ------------------------------------------------------------- builders

    def _instantiate(self, processor: DomainProcessor, event: ModelEvent):
        """A concrete instruction list: template binding or a named builder."""
        if processor.builder is None:
            from .processors import bind_placeholders

            return bind_placeholders(processor.instructions, event.payload)
        builders = {
            "element-insert": self._build_element_insert,
            "property-edit": self._build_property_edit,
            "group-create": self._build_group_create,
            "binding-insert": self._build_binding_insert,
        }
        if processor.builder not in builders:
            raise InvalidArgument(f"unknown processor builder {processor.builder!r}")
        return builders[processor.builder](event)

    def _resolve_drop_parent(self, entry: PaletteEntry, payload: dict) -> NodeId:
        target = payload.get("target")
        if target:
            if target not in self.tree.nodes:
                raise NotFound("drop target no longer exists", node=target)
            if self.tree.node(target).kind in entry.parent_kinds:
                return target
            raise InvalidArgument(
                f"{entry.kind} cannot be dropped into {self.tree.node(target).kind!r}"
            )
        root_kind = self.tree.node(self.tree.root).kind
        if root_kind in entry.parent_kinds:
            return self.tree.root
        candidates = [
            node.id for node in self.tree.walk() if node.kind in entry.parent_kinds
        ]
        if len(candidates) == 1:
            return candidates[0]
        if not candidates:
            raise InvalidArgument(f"no possible parent for {entry.kind}")
        raise InvalidArgument(
            f"ambiguous drop target for {entry.kind}; specify 'target'", candidates=len(candidates)
        )

    def _auto_name(self, parent: NodeId, prefix: str) -> str:
        taken = {
            display_name(self.tree, child) for child in self.tree.node(parent).children
        }
        n = 1
        while f"{prefix}{n}" in taken:
            n += 1
        return f"{prefix}{n}"

    def _build_element_insert(self, event: ModelEvent):
        payload = event.payload
        entry = self.palette_entry(str(payload.get("palette_item", "")))
        if entry is None:
            raise InvalidArgument(f"unknown palette item {payload.get('palette_item')!r}")
        parent = self._resolve_drop_parent(entry, payload)
        rec = InstructionRecorder(self.tree)
        rec.assert_kind(parent, self.tree.node(parent).kind)
        if entry.definition:
            return self._clone_definition(rec, entry, parent, payload)
        name = str(payload.get("name") or "") or self._auto_name(parent, entry.auto_prefix)
        if entry.value_source[0] == "const":
            value = entry.value_source[1]
        else:
            value = name
        node = rec.insert(parent, entry.kind, value)
        rec.set_meta(node, "view.x", payload.get("x", 40))
        rec.set_meta(node, "view.y", payload.get("y", 40))
        if entry.name_meta:
            rec.set_meta(node, entry.name_meta, name)
        for key, source in entry.meta_plan:
            if source[0] == "const":
                rec.set_meta(node, key, source[1])
            else:
                field_name = source[1]
                if field_name == "name":
                    rec.set_meta(node, key, name)
                elif field_name in payload:
                    rec.set_meta(node, key, payload[field_name])
        if entry.skeleton == "composite":
            ns = entry.kind.split(".")[0]
            for i in range(int(payload.get("ins", 0))):
                port = rec.insert(node, f"{ns}.port", f"in{i + 1}")
                rec.set_meta(port, f"{ns}.dir", "in")
                rec.set_meta(port, f"{ns}.type", "bool")
            for i in range(int(payload.get("outs", 0))):
                port = rec.insert(node, f"{ns}.port", f"out{i + 1}")
                rec.set_meta(port, f"{ns}.dir", "out")
                rec.set_meta(port, f"{ns}.type", "bool")
        return rec.instructions

    def _clone_definition(self, rec: InstructionRecorder, entry: PaletteEntry, parent: NodeId, payload: dict):
        records = entry.definition or ()
        ns = entry.kind.split(".")[0]
        endpoint_keys = set(wire_meta_keys(f"{ns}.wire"))
        mapping: dict[str, str] = {}
        top_id = None
        instance_name = str(payload.get("name") or "") or self._auto_name(parent, entry.auto_prefix)
        for record in records:
            rec_parent = mapping.get(record["parent"], parent)
            new_id = rec.insert(rec_parent, record["kind"], decode_value(record["value"]))
            mapping[record["id"]] = new_id
            if top_id is None:
                top_id = new_id
            for key in sorted(record["meta"]):
                value = decode_value(record["meta"][key])
                if key in endpoint_keys and isinstance(value, str):
                    ep = parse_endpoint(value)
                    base = mapping.get(ep.node, ep.node)
                    value = base if ep.slot is None else f"{base}.{ep.slot}"
                if new_id == top_id and key in ("view.x", "view.y", entry.name_meta):
                    continue
                rec.set_meta(new_id, key, value)
        assert top_id is not None
        rec.set_meta(top_id, "view.x", payload.get("x", 40))
        rec.set_meta(top_id, "view.y", payload.get("y", 40))
        if entry.name_meta:
            rec.set_meta(top_id, entry.name_meta, instance_name)
        return rec.instructions

    def _build_property_edit(self, event: ModelEvent):
        payload = event.payload
        node = str(payload.get("node", ""))
        if node not in self.tree.nodes:
            raise NotFound("edited node no longer exists", node=node)
        kind = self.tree.node(node).kind
        field_name = str(payload.get("field", ""))
        field_map = self.profile.property_map.get(kind, {})
        if field_name not in field_map:
            raise InvalidArgument(f"{kind} has no editable field {field_name!r}")
        target = field_map[field_name]
        value = self._coerce_field(target[-1], payload.get("value"))
        rec = InstructionRecorder(self.tree)
        if target[0] == "value":
            rec.set_value(node, value)
        else:
            rec.set_meta(node, target[1], value)
        return rec.instructions

    def _coerce_field(self, type_tag: str, raw):
        if type_tag == "text":
            return str(raw)
        if type_tag == "int":
            return int(raw)
        if type_tag == "float":
            return float(raw)
        if type_tag == "bool":
            return str(raw).lower() == "true" if not isinstance(raw, bool) else raw
        if type_tag.startswith("enum:"):
            allowed = type_tag[5:].split(",")
            if str(raw) not in allowed:
                raise InvalidArgument(f"value {raw!r} not one of {allowed}")
            return str(raw)
        if type_tag == "scalar":
            if isinstance(raw, (bool, int, float)) or raw is None:
                return raw
            text = str(raw)
            if text.lower() in ("true", "false"):
                return text.lower() == "true"
            try:
                return int(text)
            except ValueError:
                pass
            try:
                return float(text)
            except ValueError:
                return text
        return raw

    def _build_group_create(self, event: ModelEvent):
        members = [
            m for m in str(event.payload.get("members", "")).split(",") if m
        ]
        if not members:
            raise InvalidArgument("group event without members")
        for member in members:
            if member not in self.tree.nodes:
                raise NotFound("group member no longer exists", node=member)
        gid = next_group_id(self.scene)
        rec = InstructionRecorder(self.tree)
        for member in members:
            rec.set_meta(member, "view.group", gid)
        return rec.instructions

    def _build_binding_insert(self, event: ModelEvent):
        payload = event.payload
        from_node, to_node = str(payload.get("from_node")), str(payload.get("to_node"))
        for node in (from_node, to_node):
            if not is_node_id(node) or node not in self.tree.nodes:
                raise NotFound("binding endpoint does not exist", node=node)
        scope = self.tree.node(from_node).parent
        if scope is None or self.tree.node(to_node).parent != scope:
            raise InvalidArgument("binding endpoints must share a scope")
        wire_kinds = sorted(self.profile.relation_kinds)
        if not wire_kinds:
            raise InvalidArgument("this domain has no relation kind")
        wire_kind = wire_kinds[0]
        src = self._endpoint_for(from_node, str(payload.get("from_port", "")))
        dst = self._endpoint_for(to_node, str(payload.get("to_port", "")))
        self._check_binding_rule(scope, src, dst)
        from_key, to_key = wire_meta_keys(wire_kind)
        rec = InstructionRecorder(self.tree)
        wire = rec.insert(scope, wire_kind)
        rec.set_meta(wire, from_key, src.text())
        rec.set_meta(wire, to_key, dst.text())
        return rec.instructions

    def _endpoint_for(self, node: NodeId, port: str) -> Endpoint:
        kind = self.tree.node(node).kind
        if kind in ("macro.port", "task.port", "io.pin"):
            return Endpoint(node, None)
        return Endpoint(node, port or None)

    def _check_binding_rule(self, scope: NodeId, src: Endpoint, dst: Endpoint) -> None:
        checker = _ScopeChecker(self.tree, scope, self.profile.catalog, [])
        src_role = checker.endpoint_role(src)
        dst_role = checker.endpoint_role(dst)
        if src_role is None or dst_role is None:
            raise InvalidArgument("binding endpoint is not a connectable port")
        src_tag = src_role[1]
        dst_tag = checker.sink_tag(dst) if dst_role[0] == "in" else None
        if src_tag and dst_tag:
            allowed = self.profile.binding_allowed(
                PortType(src_tag, "out" if src_role[0] == "out" else "in"),
                PortType(dst_tag, "in" if dst_role[0] == "in" else "out"),
            )
        else:
            allowed = src_role[0] == "out" and dst_role[0] == "in"
        if not allowed:
            raise InvalidArgument(
                "binding violates the port type rules",
                src=src.text(),
                dst=dst.text(),
            )

    # ------------------------------------------------------------ the cycle

    def run_cycle(self, raw: RawEvent) -> CycleTrace:
        trace = CycleTrace()
        trace.add(1, f"raw {raw.kind.value} from {raw.source.value}")
        try:
            event = self.ingest_raw(raw)
        except MalformedRawEvent as exc:
            trace.outcome = "rejected"
            trace.diagnostics.append(Diagnostic("error", None, exc.code, str(exc)))
            return trace
        if event is None:
            trace.outcome = "no-op"
            return trace
        trace.add(2, f"model event {event.kind.value}")
        return self._continue_cycle(event, trace)

    def run_model_event(self, event: ModelEvent) -> CycleTrace:
        """Steps 3-7 for an already classified (e.g. wizard-completed) event."""
        trace = CycleTrace()
        return self._continue_cycle(event, trace)

    def _continue_cycle(self, event: ModelEvent, trace: CycleTrace) -> CycleTrace:
        result = self.controller_handle(event)
        decision = {
            "applied": f"processor {result.processor} applied",
            "needs-wizard": f"wizard {result.wizard.id} required" if result.wizard else "wizard required",
            "rejected": "; ".join(d.message for d in result.diagnostics) or "rejected",
        }[result.status]
        trace.add(3, f"controller: {decision}")
        if result.status == "needs-wizard":
            trace.outcome = "no-op"
            trace.wizard = result.wizard
            trace.wizard_id = result.wizard_id
            return trace
        if result.status == "rejected":
            trace.outcome = "rejected"
            trace.diagnostics.extend(result.diagnostics)
            return trace
        seq_refs = tuple(e.seq for e in result.events)
        if result.events:
            trace.add(4, f"{len(result.events)} mutations committed", seq_refs)
            trace.add(5, "change events published to model listeners", seq_refs)
        filters = dict(self.scene.filters)
        if result.filter_change is not None:
            filters[result.filter_change.id] = result.filter_change
        patch = self._refresh_scene(filters)
        trace.add(6, f"view constructor refreshed scene ({len(patch)} deltas)")
        self._deliver(result.events, patch)
        trace.add(7, f"view patch delivered to {len(self._view_subscribers)} subscribers")
        trace.outcome = "applied"
        trace.change_events = result.events
        trace.view_patch = patch
        return trace

    def _refresh_scene(self, filters=None) -> ViewPatch:
        new_scene = construct_scene(
            self.tree,
            self.profile,
            filters=filters if filters is not None else self.scene.filters,
            layer_visibility={l.id: l.visible for l in self.scene.layers.values()},
        )
        patch = diff_scenes(self.scene, new_scene)
        self.scene = new_scene
        return patch

    def _deliver(self, events, patch: ViewPatch) -> None:
        for listener in list(self._view_subscribers.values()):
            try:
                listener(tuple(events), patch)
            except Exception as exc:  # noqa: BLE001 - views must not stall the engine
                log.warning("view subscriber failed: %s", exc)

    # -------------------------------------------------------------- wizards

    def wizard_complete(self, wizard_id: str, answers: dict) -> ModelEvent:
        """Validate answers and return the enriched event, ready to run."""
        if wizard_id not in self._pending_wizards:
            raise NotFound(f"no pending wizard {wizard_id!r}")
        spec, event = self._pending_wizards[wizard_id]
        merged = dict(event.payload)
        merged.update(answers)
        payload = spec.complete(merged)  # raises InvalidAnswer
        del self._pending_wizards[wizard_id]
        return replace(event, payload=payload)

    # ------------------------------------------------------------ undo/redo

    def undo(self) -> list[ChangeEvent]:
        events = self.undo_stack.undo(self.tree)
        patch = self._refresh_scene()
        self._deliver(events, patch)
        self.selection = [n for n in self.selection if n in self.tree.nodes]
        self.last_patch = patch
        return events

    def redo(self) -> list[ChangeEvent]:
        events = self.undo_stack.redo(self.tree)
        patch = self._refresh_scene()
        self._deliver(events, patch)
        self.selection = [n for n in self.selection if n in self.tree.nodes]
        self.last_patch = patch
        return events

    # -------------------------------------------------------------- folding

    def fold_selection(self, new_name: str, selection: list[NodeId] | None = None) -> NodeId:
        """Fold the selection into a composite; its type joins the palette."""
        chosen = list(selection if selection is not None else self.selection)
        events: list[ChangeEvent] = []
        subscription = self.tree.subscribe(events.append)
        try:
            composite = derive_extended_element(
                self.tree, chosen, new_name, self.profile.catalog
            )
        finally:
            self.tree.unsubscribe(subscription)
        self.undo_stack.push_events(events, label="fold")
        self.extra_palette.append(palette_entry_for_composite(self.tree, composite))
        patch = self._refresh_scene()
        self._deliver(tuple(events), patch)
        self.selection = [composite]
        self.last_patch = patch
        return composite

    # ------------------------------------------------------------ listeners

    def subscribe_view(self, listener) -> int:
        self._subscriber_counter += 1
        self._view_subscribers[self._subscriber_counter] = listener
        return self._subscriber_counter

    def unsubscribe_view(self, subscription: int) -> None:
        self._view_subscribers.pop(subscription, None)


def ingest_raw(session: Session, raw: RawEvent) -> ModelEvent | None:
    return session.ingest_raw(raw)


def run_cycle(session: Session, raw: RawEvent) -> CycleTrace:
    return session.run_cycle(raw)
