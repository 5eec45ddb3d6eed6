"""Domain profiles: the data that turns the generic core into an editor.

A profile bundles everything one modelling domain needs: the palette of
droppable elements (each with its wizard), typed binding rules, the processor
registrations for complex events, property-field routing, validation, and the
text templates code generation renders with. Three profiles ship built in:

``io``
    Input/output device projects: ``io.project`` root holding ``io.device``
    nodes whose ``io.pin`` children carry direction, value type and an opaque
    hardware address.
``macro``
    Controller components: a ``macro`` root with typed ``macro.port`` nodes,
    ``macro.op`` dataflow operators, ``macro.wire`` relations and foldable
    ``macro.composite`` sub-models.
``task``
    Applications: a ``task.app`` root with ``task.instance`` nodes referring
    to catalogued component types, wired by ``task.wire`` relations.

Profiles are plain data and can be loaded from JSON documents, so a fourth
domain needs no code changes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .aslt import AsltTree, NodeId, Scalar, is_node_id
from .errors import InvalidAnswer, InvalidArgument, ProfileError, SelectionError
from .processors import (
    AtomicInstruction,
    DomainProcessor,
    InstructionRecorder,
    ProcessorRegistry,
    run_transaction,
)

META_X = "view.x"
META_Y = "view.y"
META_LAYER = "view.layer"
META_GROUP = "view.group"
META_COLLAPSED = "view.collapsed"

MODEL_EVENT_KINDS = (
    "ElementDropped",
    "ElementRemoved",
    "BindingCreated",
    "BindingRemoved",
    "PropertyEdited",
    "ElementMoved",
    "FilterToggled",
    "GroupCreated",
    "SubmodelToggled",
)

PORT_TAGS = ("bool", "int", "float")
PORT_DIRS = ("in", "out")

#: dataflow operators: name -> (input slot count, type discipline)
#: "bool"   all inputs and the output are bool
#: "number" inputs share an int/float tag which the output keeps
#: "compare" inputs share any tag, output is bool
#: "pass"   single input, output keeps its tag
#: "const"  no inputs, output tag comes from the literal
OPS: dict[str, tuple[int, str]] = {
    "NOT": (1, "bool"),
    "AND": (2, "bool"),
    "OR": (2, "bool"),
    "XOR": (2, "bool"),
    "ADD": (2, "number"),
    "SUB": (2, "number"),
    "MUL": (2, "number"),
    "LT": (2, "compare"),
    "EQ": (2, "compare"),
    "PASS": (1, "pass"),
    "CONST": (0, "const"),
}

IN_SLOTS = {0: (), 1: ("a",), 2: ("a", "b")}
OUT_SLOT = "out"


# ------------------------------------------------------------------- wizards


@dataclass(frozen=True)
class WizardField:
    """One parameter of a wizard form; no default means the field is required."""

    name: str
    type: str  # text | int | float | bool
    default: Scalar | None = None
    constraint: dict | None = None

    @property
    def required(self) -> bool:
        return self.default is None

    def coerce(self, raw) -> Scalar:
        try:
            if self.type == "text":
                return raw if isinstance(raw, str) else str(raw)
            if self.type == "int":
                if isinstance(raw, bool):
                    raise ValueError("bool is not an int")
                return int(raw)
            if self.type == "float":
                if isinstance(raw, bool):
                    raise ValueError("bool is not a float")
                return float(raw)
            if self.type == "bool":
                if isinstance(raw, bool):
                    return raw
                if isinstance(raw, str) and raw.lower() in ("true", "false"):
                    return raw.lower() == "true"
                raise ValueError(f"{raw!r} is not a bool")
        except (TypeError, ValueError) as exc:
            raise InvalidAnswer(f"field {self.name!r}: {exc}", field=self.name) from exc
        raise InvalidAnswer(f"field {self.name!r} has unknown type {self.type!r}", field=self.name)

    def check(self, value: Scalar) -> Scalar:
        rule = self.constraint or {}
        if rule.get("nonempty") and (not isinstance(value, str) or not value.strip()):
            raise InvalidAnswer(f"field {self.name!r} must not be empty", field=self.name)
        if "one_of" in rule and value not in rule["one_of"]:
            raise InvalidAnswer(
                f"field {self.name!r} must be one of {rule['one_of']}", field=self.name
            )
        if "min" in rule and value < rule["min"]:
            raise InvalidAnswer(f"field {self.name!r} below minimum {rule['min']}", field=self.name)
        if "max" in rule and value > rule["max"]:
            raise InvalidAnswer(f"field {self.name!r} above maximum {rule['max']}", field=self.name)
        return value

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "type": self.type,
            "default": self.default,
            "constraint": self.constraint,
            "required": self.required,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "WizardField":
        return cls(
            name=doc["name"],
            type=doc["type"],
            default=doc.get("default"),
            constraint=doc.get("constraint"),
        )


@dataclass(frozen=True)
class WizardSpec:
    """A data-described parameter form completing one event kind."""

    id: str
    produced_for: str
    fields: tuple[WizardField, ...]

    def missing_required(self, payload: dict) -> list[str]:
        return [f.name for f in self.fields if f.required and f.name not in payload]

    def complete(self, payload: dict) -> dict:
        """Defaults merged in, values coerced and constraint-checked."""
        enriched = dict(payload)
        for wf in self.fields:
            if wf.name in enriched:
                value = wf.coerce(enriched[wf.name])
            elif wf.default is not None:
                value = wf.default
            else:
                raise InvalidAnswer(f"missing required field {wf.name!r}", field=wf.name)
            enriched[wf.name] = wf.check(value)
        return enriched

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "produced_for": self.produced_for,
            "fields": [f.to_json() for f in self.fields],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "WizardSpec":
        return cls(
            id=doc["id"],
            produced_for=doc["produced_for"],
            fields=tuple(WizardField.from_json(f) for f in doc.get("fields", [])),
        )

    def validate(self) -> "WizardSpec":
        for wf in self.fields:
            if wf.default is not None:
                wf.check(wf.coerce(wf.default))
        return self


# ------------------------------------------------------------- palette & co.


@dataclass(frozen=True)
class PaletteEntry:
    """One droppable element and the insert plan the drop processor follows."""

    item: str
    glyph: str
    kind: str
    label: str
    parent_kinds: tuple[str, ...]
    wizard: WizardSpec | None = None
    value_source: tuple = ("field", "name")  # ("field", name) | ("const", value)
    name_meta: str | None = None  # meta key receiving the instance name
    auto_prefix: str = "n"
    meta_plan: tuple[tuple[str, tuple], ...] = ()  # (meta key, source)
    skeleton: str | None = None  # "composite" grows wizard-sized port sets
    definition: tuple | None = None  # node records cloned on drop

    def to_json(self) -> dict:
        return {
            "item": self.item,
            "glyph": self.glyph,
            "kind": self.kind,
            "label": self.label,
            "parent_kinds": list(self.parent_kinds),
            "wizard": self.wizard.to_json() if self.wizard else None,
            "value_source": list(self.value_source),
            "name_meta": self.name_meta,
            "auto_prefix": self.auto_prefix,
            "meta_plan": [[key, list(src)] for key, src in self.meta_plan],
            "skeleton": self.skeleton,
            "definition": list(self.definition) if self.definition else None,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PaletteEntry":
        wizard = doc.get("wizard")
        return cls(
            item=doc["item"],
            glyph=doc["glyph"],
            kind=doc["kind"],
            label=doc.get("label", doc["item"]),
            parent_kinds=tuple(doc.get("parent_kinds", ())),
            wizard=WizardSpec.from_json(wizard) if wizard else None,
            value_source=tuple(doc.get("value_source", ("field", "name"))),
            name_meta=doc.get("name_meta"),
            auto_prefix=doc.get("auto_prefix", "n"),
            meta_plan=tuple((key, tuple(src)) for key, src in doc.get("meta_plan", [])),
            skeleton=doc.get("skeleton"),
            definition=tuple(doc["definition"]) if doc.get("definition") else None,
        )


@dataclass(frozen=True)
class PortType:
    tag: str
    dir: str  # binding-site role: "out" drives, "in" consumes

    def to_json(self) -> dict:
        return {"tag": self.tag, "dir": self.dir}


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning | info
    node: NodeId | None
    rule: str
    message: str

    def to_json(self) -> dict:
        return {
            "severity": self.severity,
            "node": self.node,
            "rule": self.rule,
            "message": self.message,
        }


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diagnostics)


# -------------------------------------------------------------- the catalog


@dataclass(frozen=True)
class PortSpec:
    """A component port as declared by its owner (device pin or macro port)."""

    name: str
    tag: str
    dir: str  # component-perspective direction

    def task_role(self, component_domain: str) -> str:
        # A hardware-in pin feeds the application (drives), a macro in-port
        # consumes from it; the roles flip at the component boundary.
        if component_domain == "io":
            return "out" if self.dir == "in" else "in"
        return "in" if self.dir == "in" else "out"

    def to_json(self) -> dict:
        return {"name": self.name, "tag": self.tag, "dir": self.dir}


@dataclass(frozen=True)
class ComponentType:
    name: str
    domain: str  # "io" | "macro"
    kind: str
    ports: tuple[PortSpec, ...]
    source_tree: AsltTree | None = None
    source_node: NodeId | None = None

    def port(self, name: str) -> PortSpec | None:
        for spec in self.ports:
            if spec.name == name:
                return spec
        return None


class ComponentCatalog:
    """Exported component types visible to the task editor."""

    def __init__(self, types: Iterable[ComponentType] = ()):
        self._types: dict[str, ComponentType] = {}
        for ct in types:
            self.add(ct)

    def add(self, component: ComponentType) -> None:
        if component.name in self._types:
            raise InvalidArgument("duplicate component type", name=component.name)
        self._types[component.name] = component

    def get(self, name: str) -> ComponentType | None:
        return self._types.get(name)

    def names(self) -> list[str]:
        return sorted(self._types)

    def types(self) -> list[ComponentType]:
        return [self._types[name] for name in self.names()]


def device_ports(tree: AsltTree, device: NodeId) -> tuple[PortSpec, ...]:
    ports = []
    for child in tree.node(device).children:
        node = tree.node(child)
        if node.kind != "io.pin":
            continue
        ports.append(
            PortSpec(
                name=str(node.value or ""),
                tag=str(tree.get_meta(child, "io.type", "bool")),
                dir=str(tree.get_meta(child, "io.dir", "in")),
            )
        )
    return tuple(ports)


def macro_ports(tree: AsltTree, scope: NodeId) -> tuple[PortSpec, ...]:
    ports = []
    for child in tree.node(scope).children:
        node = tree.node(child)
        if node.kind not in ("macro.port", "task.port"):
            continue
        ns = node.kind.split(".")[0]
        ports.append(
            PortSpec(
                name=str(node.value or ""),
                tag=str(tree.get_meta(child, f"{ns}.type", "bool")),
                dir=str(tree.get_meta(child, f"{ns}.dir", "in")),
            )
        )
    return tuple(ports)


def catalog_from_trees(trees: Iterable[AsltTree]) -> ComponentCatalog:
    """Scan project trees and export every device and macro as a type."""
    catalog = ComponentCatalog()
    for tree in trees:
        root = tree.node(tree.root)
        if root.kind == "io.project":
            for child in root.children:
                node = tree.node(child)
                if node.kind != "io.device":
                    continue
                catalog.add(
                    ComponentType(
                        name=str(node.value or child),
                        domain="io",
                        kind="io.device",
                        ports=device_ports(tree, child),
                        source_tree=tree,
                        source_node=child,
                    )
                )
        elif root.kind == "macro":
            catalog.add(
                ComponentType(
                    name=str(root.value or "macro"),
                    domain="macro",
                    kind="macro",
                    ports=macro_ports(tree, tree.root),
                    source_tree=tree,
                    source_node=tree.root,
                )
            )
    return catalog


# -------------------------------------------------------------- the profile


DEFAULT_TEMPLATES = {
    "component_header": "component {name} kind {kind} {{",
    "port": "{dir} {name}: {tag};",
    "node": "node {name}: {op};",
    "node_const": "node {name}: {op}({literal});",
    "wire": "wire {src} -> {dst};",
    "application_header": "application {name} {{",
    "instance": "instance {name}: {type};",
    "bind": "bind {src} -> {dst};",
    "close": "}",
    "indent": "  ",
}

GLYPH_SIZES = {
    "device": (160, 100),
    "pin": (90, 36),
    "port": (90, 36),
    "composite": (140, 80),
    "instance.io": (140, 80),
    "instance.macro": (140, 80),
    "unknown": (120, 60),
}
DEFAULT_GLYPH_SIZE = (100, 48)


@dataclass
class DomainProfile:
    """Everything one editor domain contributes, as inert data."""

    name: str
    root_kind: str
    palette: tuple[PaletteEntry, ...]
    port_types: tuple[PortType, ...]
    binding_rules: tuple[tuple[PortType, PortType, bool], ...]
    processors: tuple[DomainProcessor, ...]
    wizards: tuple[WizardSpec, ...]
    validators: tuple[str, ...]
    templates: dict
    symbol_kinds: frozenset[str]
    relation_kinds: frozenset[str]
    property_map: dict  # kind -> field -> (target, ..., type)
    unsupported_events: frozenset[str]
    catalog: ComponentCatalog = field(default_factory=ComponentCatalog)

    def entry(self, item: str) -> PaletteEntry | None:
        for candidate in self.palette:
            if candidate.item == item:
                return candidate
        return None

    def glyph_size(self, glyph: str) -> tuple[int, int]:
        return GLYPH_SIZES.get(glyph, DEFAULT_GLYPH_SIZE)

    def binding_allowed(self, source: PortType, sink: PortType) -> bool:
        for rule_from, rule_to, allowed in self.binding_rules:
            if rule_from == source and rule_to == sink:
                return allowed
        return False

    def build_registry(self) -> ProcessorRegistry:
        registry = ProcessorRegistry()
        for processor in self.processors:
            registry.register(processor)
        return registry

    def check_closure(self) -> None:
        """Every classifiable event kind has a processor or an explicit opt-out."""
        covered = {p.trigger for p in self.processors} | set(self.unsupported_events)
        missing = [k for k in MODEL_EVENT_KINDS if k not in covered]
        if missing:
            raise ProfileError(
                "profile leaves event kinds unhandled", location=self.name, missing=missing
            )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "root_kind": self.root_kind,
            "palette": [entry.to_json() for entry in self.palette],
            "port_types": [pt.to_json() for pt in self.port_types],
            "binding_rules": [
                {"from": f.to_json(), "to": t.to_json(), "allowed": allowed}
                for f, t, allowed in self.binding_rules
            ],
            "processors": [proc.to_json() for proc in self.processors],
            "wizards": [w.to_json() for w in self.wizards],
            "validators": list(self.validators),
            "templates": dict(self.templates),
            "symbol_kinds": sorted(self.symbol_kinds),
            "relation_kinds": sorted(self.relation_kinds),
            "property_map": {
                kind: {field_name: list(target) for field_name, target in fields.items()}
                for kind, fields in self.property_map.items()
            },
            "unsupported_events": sorted(self.unsupported_events),
        }


def _standard_binding_rules() -> tuple:
    """Total table over the declared port types: out drives in, tags equal."""
    types = tuple(PortType(tag, dir) for tag in PORT_TAGS for dir in PORT_DIRS)
    rules = []
    for source in types:
        for sink in types:
            allowed = source.dir == "out" and sink.dir == "in" and source.tag == sink.tag
            rules.append((source, sink, allowed))
    return tuple(types), tuple(rules)


def _name_wizard(wizard_id: str, *extra: WizardField, name_default: str | None = None) -> WizardSpec:
    fields = [WizardField("name", "text", default=name_default, constraint={"nonempty": True} if name_default is None else None)]
    fields.extend(extra)
    return WizardSpec(id=wizard_id, produced_for="ElementDropped", fields=tuple(fields)).validate()


def _common_processors(domain: str, extra_unsupported: frozenset[str]) -> tuple[DomainProcessor, ...]:
    def static(name, trigger, instructions):
        return DomainProcessor(name, domain, trigger, tuple(instructions))

    def built(name, trigger, builder):
        return DomainProcessor(name, domain, trigger, (), builder=builder)

    processors = [
        built(f"{domain}.drop", "ElementDropped", "element-insert"),
        static(
            f"{domain}.remove",
            "ElementRemoved",
            [AtomicInstruction.from_json({"op": "remove", "anchor": "${payload.node}"})],
        ),
        static(
            f"{domain}.move",
            "ElementMoved",
            [
                AtomicInstruction.from_json(
                    {"op": "set_meta", "anchor": "${payload.node}",
                     "args": {"key": META_X, "value": "${payload.x}"}}
                ),
                AtomicInstruction.from_json(
                    {"op": "set_meta", "anchor": "${payload.node}",
                     "args": {"key": META_Y, "value": "${payload.y}"}}
                ),
            ],
        ),
        built(f"{domain}.edit", "PropertyEdited", "property-edit"),
        static(f"{domain}.filter", "FilterToggled", []),
        built(f"{domain}.group", "GroupCreated", "group-create"),
    ]
    if "SubmodelToggled" not in extra_unsupported:
        processors.append(
            static(
                f"{domain}.collapse",
                "SubmodelToggled",
                [
                    AtomicInstruction.from_json(
                        {"op": "set_meta", "anchor": "${payload.node}",
                         "args": {"key": META_COLLAPSED, "value": "${payload.collapsed}"}}
                    )
                ],
            )
        )
    if "BindingCreated" not in extra_unsupported:
        processors.append(built(f"{domain}.bind", "BindingCreated", "binding-insert"))
        processors.append(
            static(
                f"{domain}.unbind",
                "BindingRemoved",
                [AtomicInstruction.from_json({"op": "remove", "anchor": "${payload.node}"})],
            )
        )
    return tuple(processors)


def _io_profile() -> DomainProfile:
    port_types, rules = _standard_binding_rules()
    unsupported = frozenset({"BindingCreated", "BindingRemoved"})
    device_wizard = _name_wizard("io.device.create")
    pin_wizard = _name_wizard(
        "io.pin.create",
        WizardField("dir", "text", default="in", constraint={"one_of": ["in", "out"]}),
        WizardField("type", "text", default="bool", constraint={"one_of": list(PORT_TAGS)}),
        WizardField("addr", "text", default=""),
    )
    palette = (
        PaletteEntry(
            item="io.device",
            glyph="device",
            kind="io.device",
            label="Device",
            parent_kinds=("io.project",),
            wizard=device_wizard,
            value_source=("field", "name"),
            auto_prefix="dev",
        ),
        PaletteEntry(
            item="io.pin",
            glyph="pin",
            kind="io.pin",
            label="Pin",
            parent_kinds=("io.device",),
            wizard=pin_wizard,
            value_source=("field", "name"),
            auto_prefix="pin",
            meta_plan=(
                ("io.dir", ("field", "dir")),
                ("io.type", ("field", "type")),
                ("io.addr", ("field", "addr")),
            ),
        ),
    )
    return DomainProfile(
        name="io",
        root_kind="io.project",
        palette=palette,
        port_types=port_types,
        binding_rules=rules,
        processors=_common_processors("io", unsupported),
        wizards=(device_wizard, pin_wizard),
        validators=("root-kind", "io-structure", "io-pins", "dup-names"),
        templates=dict(DEFAULT_TEMPLATES),
        symbol_kinds=frozenset({"io.device", "io.pin"}),
        relation_kinds=frozenset(),
        property_map={
            "io.project": {"name": ("value", "text")},
            "io.device": {"name": ("value", "text")},
            "io.pin": {
                "name": ("value", "text"),
                "dir": ("meta", "io.dir", "enum:in,out"),
                "type": ("meta", "io.type", "enum:bool,int,float"),
                "addr": ("meta", "io.addr", "text"),
            },
        },
        unsupported_events=unsupported,
    )


def _macro_profile() -> DomainProfile:
    port_types, rules = _standard_binding_rules()
    port_wizard = _name_wizard(
        "macro.port.create",
        WizardField("dir", "text", default="in", constraint={"one_of": ["in", "out"]}),
        WizardField("type", "text", default="bool", constraint={"one_of": list(PORT_TAGS)}),
    )
    composite_wizard = _name_wizard(
        "macro.composite.create",
        WizardField("ins", "int", default=2, constraint={"min": 0, "max": 8}),
        WizardField("outs", "int", default=1, constraint={"min": 0, "max": 8}),
    )
    op_wizards = {
        op: WizardSpec(
            id=f"macro.op.{op}.create",
            produced_for="ElementDropped",
            fields=(
                (WizardField("name", "text", default=""),)
                + ((WizardField("const", "bool", default=True),) if op == "CONST" else ())
            ),
        ).validate()
        for op in OPS
    }
    scopes = ("macro", "macro.composite")
    palette = [
        PaletteEntry(
            item="macro.port",
            glyph="port",
            kind="macro.port",
            label="Port",
            parent_kinds=scopes,
            wizard=port_wizard,
            value_source=("field", "name"),
            auto_prefix="p",
            meta_plan=(("macro.dir", ("field", "dir")), ("macro.type", ("field", "type"))),
        ),
        PaletteEntry(
            item="macro.composite",
            glyph="composite",
            kind="macro.composite",
            label="Sub-model",
            parent_kinds=scopes,
            wizard=composite_wizard,
            value_source=("field", "name"),
            name_meta="macro.name",
            auto_prefix="c",
            skeleton="composite",
        ),
    ]
    for op in sorted(OPS):
        meta_plan = [("macro.name", ("field", "name"))]
        if op == "CONST":
            meta_plan.append(("macro.const", ("field", "const")))
        palette.append(
            PaletteEntry(
                item=f"macro.op.{op}",
                glyph=f"op.{op.lower()}",
                kind="macro.op",
                label=op,
                parent_kinds=scopes,
                wizard=op_wizards[op],
                value_source=("const", op),
                name_meta="macro.name",
                auto_prefix="op",
                meta_plan=tuple(meta_plan),
            )
        )
    return DomainProfile(
        name="macro",
        root_kind="macro",
        palette=tuple(palette),
        port_types=port_types,
        binding_rules=rules,
        processors=_common_processors("macro", frozenset()),
        wizards=(port_wizard, composite_wizard) + tuple(op_wizards[o] for o in sorted(OPS)),
        validators=("root-kind", "dataflow", "dup-names"),
        templates=dict(DEFAULT_TEMPLATES),
        symbol_kinds=frozenset({"macro.port", "macro.op", "macro.composite"}),
        relation_kinds=frozenset({"macro.wire"}),
        property_map={
            "macro": {"name": ("value", "text")},
            "macro.port": {
                "name": ("value", "text"),
                "dir": ("meta", "macro.dir", "enum:in,out"),
                "type": ("meta", "macro.type", "enum:bool,int,float"),
            },
            "macro.op": {
                "name": ("meta", "macro.name", "text"),
                "const": ("meta", "macro.const", "scalar"),
            },
            "macro.composite": {"name": ("meta", "macro.name", "text")},
        },
        unsupported_events=frozenset(),
    )


def _task_profile(catalog: ComponentCatalog | None = None) -> DomainProfile:
    catalog = catalog or ComponentCatalog()
    port_types, rules = _standard_binding_rules()
    instance_wizard_fields = (WizardField("name", "text", default=""),)
    palette = []
    wizards = []
    for component in catalog.types():
        wizard = WizardSpec(
            id=f"task.instance.{component.name}.create",
            produced_for="ElementDropped",
            fields=instance_wizard_fields,
        ).validate()
        wizards.append(wizard)
        palette.append(
            PaletteEntry(
                item=f"task.instance.{component.name}",
                glyph=f"instance.{component.domain}",
                kind="task.instance",
                label=component.name,
                parent_kinds=("task.app", "task.composite"),
                wizard=wizard,
                value_source=("const", component.name),
                name_meta="task.name",
                auto_prefix="i",
            )
        )
    return DomainProfile(
        name="task",
        root_kind="task.app",
        palette=tuple(palette),
        port_types=port_types,
        binding_rules=rules,
        processors=_common_processors("task", frozenset()),
        wizards=tuple(wizards),
        validators=("root-kind", "task-wiring", "dup-names"),
        templates=dict(DEFAULT_TEMPLATES),
        symbol_kinds=frozenset({"task.instance", "task.composite", "task.port"}),
        relation_kinds=frozenset({"task.wire"}),
        property_map={
            "task.app": {"name": ("value", "text")},
            "task.instance": {"name": ("meta", "task.name", "text")},
            "task.composite": {"name": ("meta", "task.name", "text")},
            "task.port": {"name": ("value", "text")},
        },
        unsupported_events=frozenset(),
        catalog=catalog,
    )


BUILTIN_PROFILES = ("io", "macro", "task")


def load_profile(name_or_path: str, catalog: ComponentCatalog | None = None) -> DomainProfile:
    """A built-in profile by name, or a custom one from a JSON document."""
    if name_or_path == "io":
        profile = _io_profile()
    elif name_or_path == "macro":
        profile = _macro_profile()
    elif name_or_path == "task":
        profile = _task_profile(catalog)
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise ProfileError("unknown profile", location=str(name_or_path))
        profile = profile_from_json(path.read_text(encoding="utf-8"), location=str(path))
    if catalog is not None and name_or_path != "task":
        profile.catalog = catalog
    profile.check_closure()
    _check_palette(profile)
    return profile


def _check_palette(profile: DomainProfile) -> None:
    seen = set()
    for entry in profile.palette:
        if not entry.glyph:
            raise ProfileError("palette entry without glyph", location=entry.item)
        if entry.item in seen:
            raise ProfileError("duplicate palette item", location=entry.item)
        seen.add(entry.item)


def profile_from_json(text: str, location: str = "<inline>") -> DomainProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileError(f"profile is not valid JSON: {exc}", location=location) from exc
    try:
        name = doc["name"]
        port_types = tuple(PortType(pt["tag"], pt["dir"]) for pt in doc.get("port_types", []))
        rules = tuple(
            (
                PortType(r["from"]["tag"], r["from"]["dir"]),
                PortType(r["to"]["tag"], r["to"]["dir"]),
                bool(r["allowed"]),
            )
            for r in doc.get("binding_rules", [])
        )
        processors = tuple(
            DomainProcessor.from_json(name, p) for p in doc.get("processors", [])
        )
        profile = DomainProfile(
            name=name,
            root_kind=doc["root_kind"],
            palette=tuple(PaletteEntry.from_json(e) for e in doc.get("palette", [])),
            port_types=port_types,
            binding_rules=rules,
            processors=processors,
            wizards=tuple(WizardSpec.from_json(w).validate() for w in doc.get("wizards", [])),
            validators=tuple(doc.get("validators", ("root-kind",))),
            templates={**DEFAULT_TEMPLATES, **doc.get("templates", {})},
            symbol_kinds=frozenset(doc.get("symbol_kinds", [])),
            relation_kinds=frozenset(doc.get("relation_kinds", [])),
            property_map={
                kind: {fname: tuple(target) for fname, target in fields.items()}
                for kind, fields in doc.get("property_map", {}).items()
            },
            unsupported_events=frozenset(doc.get("unsupported_events", [])),
        )
    except (KeyError, TypeError, InvalidAnswer, InvalidArgument) as exc:
        raise ProfileError(f"malformed profile: {exc}", location=location) from exc
    return profile


# ----------------------------------------------------------------- dataflow


@dataclass(frozen=True)
class Endpoint:
    """A wire end: a port node alone, or a node plus one of its slots."""

    node: NodeId
    slot: str | None

    def text(self) -> str:
        return self.node if self.slot is None else f"{self.node}.{self.slot}"


def parse_endpoint(text) -> Endpoint:
    if not isinstance(text, str) or not text:
        raise InvalidArgument("malformed wire endpoint", endpoint=text)
    head, dot, slot = text.partition(".")
    if not is_node_id(head):
        raise InvalidArgument("wire endpoint must start with a node id", endpoint=text)
    return Endpoint(head, slot if dot else None)


def wire_meta_keys(kind: str) -> tuple[str, str]:
    ns = kind.split(".")[0]
    return f"{ns}.from", f"{ns}.to"


def scope_members(tree: AsltTree, scope: NodeId) -> dict[str, list[NodeId]]:
    """The scope's children grouped into ports, ops, composites and wires."""
    groups = {"ports": [], "ops": [], "composites": [], "wires": [], "instances": [], "other": []}
    for child in tree.node(scope).children:
        kind = tree.node(child).kind
        if kind in ("macro.port", "task.port"):
            groups["ports"].append(child)
        elif kind == "macro.op":
            groups["ops"].append(child)
        elif kind in ("macro.composite", "task.composite"):
            groups["composites"].append(child)
        elif kind in ("macro.wire", "task.wire"):
            groups["wires"].append(child)
        elif kind == "task.instance":
            groups["instances"].append(child)
        else:
            groups["other"].append(child)
    return groups


def display_name(tree: AsltTree, node_id: NodeId) -> str:
    node = tree.node(node_id)
    for key in ("macro.name", "task.name"):
        name = node.meta.get(key)
        if isinstance(name, str) and name:
            return name
    if isinstance(node.value, str) and node.value:
        return node.value
    if node.value is not None:
        return str(node.value)
    return node.kind


# --------------------------------------------------------------- validation


class _ScopeChecker:
    """Shared wiring analysis for one macro/composite or task scope."""

    def __init__(self, tree: AsltTree, scope: NodeId, catalog: ComponentCatalog, out):
        self.tree = tree
        self.scope = scope
        self.catalog = catalog
        self.out = out
        self.members = scope_members(tree, scope)
        self.member_set = set(tree.node(scope).children)

    def error(self, node, rule, message):
        self.out.append(Diagnostic("error", node, rule, message))

    def warn(self, node, rule, message):
        self.out.append(Diagnostic("warning", node, rule, message))

    # role: how the endpoint behaves inside this scope ("out" drives a value)
    def endpoint_role(self, ep: Endpoint) -> tuple[str, str | None] | None:
        tree = self.tree
        if ep.node not in self.member_set:
            return None
        node = tree.node(ep.node)
        kind = node.kind
        if kind in ("macro.port", "task.port"):
            if ep.slot is not None:
                return None
            ns = kind.split(".")[0]
            direction = tree.get_meta(ep.node, f"{ns}.dir", "in")
            return ("out", str(tree.get_meta(ep.node, f"{ns}.type", "bool"))) if direction == "in" else ("in", None)
        if kind == "macro.op":
            op = str(node.value)
            arity = OPS.get(op, (0, ""))[0]
            if ep.slot in IN_SLOTS.get(arity, ()):
                return ("in", None)
            if ep.slot == OUT_SLOT:
                return ("out", None)
            return None
        if kind in ("macro.composite", "task.composite"):
            ports = macro_ports(tree, ep.node)
            for spec in ports:
                if spec.name == ep.slot:
                    # composite boundary: its in-port consumes at this level
                    return ("in", None) if spec.dir == "in" else ("out", spec.tag)
            return None
        if kind == "task.instance":
            component = self.catalog.get(str(node.value)) if self.catalog else None
            if component is None:
                return None
            spec = component.port(ep.slot or "")
            if spec is None:
                return None
            role = spec.task_role(component.domain)
            return (role, spec.tag if role == "out" else None)
        return None

    def unit_of(self, ep: Endpoint) -> str:
        """Dependency vertex for acyclicity: device pins stay independent,
        everything else couples all its ports."""
        node = self.tree.node(ep.node)
        if node.kind == "task.instance" and self.catalog:
            component = self.catalog.get(str(node.value))
            if component is not None and component.domain == "io":
                return f"{ep.node}:{ep.slot}"
        return ep.node

    def sink_tag(self, ep: Endpoint) -> str | None:
        """Declared tag of a consuming endpoint, where one is declared."""
        tree = self.tree
        node = tree.node(ep.node)
        if node.kind in ("macro.port", "task.port"):
            ns = node.kind.split(".")[0]
            return str(tree.get_meta(ep.node, f"{ns}.type", "bool"))
        if node.kind in ("macro.composite", "task.composite"):
            for spec in macro_ports(tree, ep.node):
                if spec.name == ep.slot:
                    return spec.tag
        if node.kind == "task.instance":
            component = self.catalog.get(str(node.value)) if self.catalog else None
            if component:
                spec = component.port(ep.slot or "")
                if spec:
                    return spec.tag
        return None


def validate_model(tree: AsltTree, profile: DomainProfile) -> list[Diagnostic]:
    """All profile rules; empty list means generatable and runnable."""
    out: list[Diagnostic] = []
    root = tree.node(tree.root)
    if "root-kind" in profile.validators and root.kind != profile.root_kind:
        out.append(
            Diagnostic(
                "error",
                tree.root,
                "root-kind",
                f"expected root kind {profile.root_kind!r}, found {root.kind!r}",
            )
        )
        return out
    if "io-structure" in profile.validators:
        _validate_io(tree, out)
    if "dataflow" in profile.validators:
        _validate_dataflow_scope(tree, tree.root, profile.catalog, out)
    if "task-wiring" in profile.validators:
        _validate_task_scope(tree, tree.root, profile.catalog, out)
    return out


def _check_unique_names(tree, scope, ids, rule, out, describe):
    seen: dict[str, NodeId] = {}
    for node_id in ids:
        name = display_name(tree, node_id)
        if name in seen:
            out.append(
                Diagnostic("error", node_id, rule, f"duplicate {describe} name {name!r}")
            )
        seen[name] = node_id


def _validate_io(tree: AsltTree, out: list[Diagnostic]) -> None:
    devices = [c for c in tree.node(tree.root).children if tree.node(c).kind == "io.device"]
    for child in tree.node(tree.root).children:
        if tree.node(child).kind != "io.device":
            out.append(
                Diagnostic("warning", child, "io-structure",
                           f"unexpected {tree.node(child).kind!r} under the project root")
            )
    _check_unique_names(tree, tree.root, devices, "dup-names", out, "device")
    for device in devices:
        pins = []
        for child in tree.node(device).children:
            node = tree.node(child)
            if node.kind != "io.pin":
                out.append(
                    Diagnostic("warning", child, "io-structure",
                               f"unexpected {node.kind!r} inside a device")
                )
                continue
            pins.append(child)
            direction = tree.get_meta(child, "io.dir")
            tag = tree.get_meta(child, "io.type")
            if direction not in PORT_DIRS:
                out.append(Diagnostic("error", child, "io-pins", f"pin direction {direction!r} invalid"))
            if tag not in PORT_TAGS:
                out.append(Diagnostic("error", child, "io-pins", f"pin type {tag!r} invalid"))
            if not isinstance(node.value, str) or not node.value:
                out.append(Diagnostic("error", child, "io-pins", "pin has no name"))
        _check_unique_names(tree, device, pins, "dup-names", out, "pin")


def _topological_order(nodes, edges):
    """Kahn's algorithm, ties broken by sort key; returns (order, leftover)."""
    incoming = {n: 0 for n in nodes}
    outgoing = {n: [] for n in nodes}
    for src, dst in edges:
        if src in incoming and dst in incoming:
            incoming[dst] += 1
            outgoing[src].append(dst)
    ready = sorted(n for n, deg in incoming.items() if deg == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for nxt in outgoing[node]:
            incoming[nxt] -= 1
            if incoming[nxt] == 0:
                ready.append(nxt)
                changed = True
        if changed:
            ready.sort()
    leftover = [n for n in nodes if n not in set(order)]
    return order, leftover


def _validate_dataflow_scope(tree, scope, catalog, out) -> None:
    checker = _ScopeChecker(tree, scope, catalog, out)
    members = checker.members
    for op_node in members["ops"]:
        op = tree.node(op_node).value
        if not isinstance(op, str) or op not in OPS:
            checker.error(op_node, "op-kind", f"unknown operator {op!r}")
            continue
        if op == "CONST" and tree.get_meta(op_node, "macro.const") is None:
            checker.error(op_node, "const-value", "CONST operator without a literal")
    for port in members["ports"]:
        direction = tree.get_meta(port, "macro.dir")
        tag = tree.get_meta(port, "macro.type")
        if direction not in PORT_DIRS:
            checker.error(port, "port-decl", f"port direction {direction!r} invalid")
        if tag not in PORT_TAGS:
            checker.error(port, "port-decl", f"port type {tag!r} invalid")
    named = members["ports"] + members["ops"] + members["composites"]
    _check_unique_names(tree, scope, named, "dup-names", out, "element")
    _validate_wires(checker, kind_rule="dataflow")
    for composite in members["composites"]:
        _validate_dataflow_scope(tree, composite, catalog, out)


def _validate_task_scope(tree, scope, catalog, out) -> None:
    checker = _ScopeChecker(tree, scope, catalog, out)
    members = checker.members
    for instance in members["instances"]:
        type_name = tree.node(instance).value
        if not catalog or catalog.get(str(type_name)) is None:
            checker.error(instance, "instance-type", f"unknown component type {type_name!r}")
    named = members["instances"] + members["composites"] + members["ports"]
    _check_unique_names(tree, scope, named, "dup-names", out, "instance")
    _validate_wires(checker, kind_rule="task-wiring")
    for composite in members["composites"]:
        _validate_task_scope(tree, composite, catalog, out)


def _validate_wires(checker: _ScopeChecker, kind_rule: str) -> None:
    tree, out = checker.tree, checker.out
    members = checker.members
    drives: dict[str, list[NodeId]] = {}
    edges = []
    for wire in members["wires"]:
        from_key, to_key = wire_meta_keys(tree.node(wire).kind)
        try:
            src = parse_endpoint(tree.get_meta(wire, from_key))
            dst = parse_endpoint(tree.get_meta(wire, to_key))
        except InvalidArgument as exc:
            checker.error(wire, "wire-endpoint", str(exc))
            continue
        src_role = checker.endpoint_role(src)
        dst_role = checker.endpoint_role(dst)
        if src_role is None or dst_role is None:
            checker.error(wire, "wire-endpoint", "wire endpoint does not resolve in this scope")
            continue
        if src_role[0] != "out" or dst_role[0] != "in":
            checker.error(wire, "wire-direction", "wires must connect a driver to a consumer")
            continue
        drives.setdefault(dst.text(), []).append(wire)
        edges.append((src, dst))
    for target, wires in drives.items():
        if len(wires) > 1:
            checker.error(wires[1], "multi-drive", f"endpoint {target} driven more than once")
    # every op input must be driven
    for op_node in members["ops"]:
        op = tree.node(op_node).value
        if not isinstance(op, str) or op not in OPS:
            continue
        for slot in IN_SLOTS[OPS[op][0]]:
            if Endpoint(op_node, slot).text() not in drives:
                checker.error(op_node, "arity", f"operator input {slot!r} not wired")
    # scope out-ports must be driven; composite in-ports likewise
    for port in members["ports"]:
        ns = tree.node(port).kind.split(".")[0]
        if tree.get_meta(port, f"{ns}.dir") == "out" and Endpoint(port, None).text() not in drives:
            checker.error(port, "undriven-out", f"output port {display_name(tree, port)!r} never driven")
    for composite in members["composites"]:
        for spec in macro_ports(tree, composite):
            if spec.dir == "in" and Endpoint(composite, spec.name).text() not in drives:
                checker.error(
                    composite, "arity",
                    f"sub-model input {spec.name!r} not wired",
                )
    # device sinks at task level: undriven is tolerated with a default
    if kind_rule == "task-wiring":
        for instance in members["instances"]:
            component = checker.catalog.get(str(tree.node(instance).value)) if checker.catalog else None
            if component is None or component.domain != "io":
                continue
            for spec in component.ports:
                if spec.task_role(component.domain) == "in":
                    if Endpoint(instance, spec.name).text() not in drives:
                        checker.warn(
                            instance, "undriven-sink",
                            f"device input {spec.name!r} undriven; defaults at run time",
                        )
    unit_edges = [(checker.unit_of(src), checker.unit_of(dst)) for src, dst in edges]
    units = set(members["ops"] + members["composites"] + members["ports"])
    for instance in members["instances"]:
        if checker.unit_of(Endpoint(instance, None)) == instance:  # coupled ports
            units.add(instance)
    for src_unit, dst_unit in unit_edges:
        units.add(src_unit)
        units.add(dst_unit)
    _, leftover = _topological_order(sorted(units), unit_edges)
    if leftover:
        checker.error(leftover[0].split(":")[0], "cycle", "wiring contains a cycle")
        return
    coupled = members["ops"] + members["composites"]
    coupled_set = set(coupled)
    type_order, _ = _topological_order(
        sorted(coupled),
        [(s.node, d.node) for s, d in edges if s.node in coupled_set and d.node in coupled_set],
    )
    _check_types(checker, type_order, drives)


def _check_types(checker: _ScopeChecker, order, drives) -> None:
    """Infer driver tags in dependency order and match them against sinks."""
    tree, out = checker.tree, checker.out
    members = checker.members
    source_tag: dict[str, str] = {}
    wire_src: dict[str, Endpoint] = {}
    for wire in members["wires"]:
        from_key, to_key = wire_meta_keys(tree.node(wire).kind)
        try:
            src = parse_endpoint(tree.get_meta(wire, from_key))
            dst = parse_endpoint(tree.get_meta(wire, to_key))
        except InvalidArgument:
            continue
        if checker.endpoint_role(src) and checker.endpoint_role(dst):
            wire_src[dst.text()] = src

    def driver_tag(ep: Endpoint) -> str | None:
        role = checker.endpoint_role(ep)
        if role and role[1]:
            return role[1]
        return source_tag.get(ep.text())

    for node_id in order:
        node = tree.node(node_id)
        if node.kind != "macro.op":
            continue
        op = str(node.value)
        if op not in OPS:
            continue
        arity, discipline = OPS[op]
        in_tags = []
        for slot in IN_SLOTS[arity]:
            src = wire_src.get(Endpoint(node_id, slot).text())
            in_tags.append(driver_tag(src) if src else None)
        tag = _op_output_tag(tree, node_id, op, discipline, in_tags, checker)
        if tag:
            source_tag[Endpoint(node_id, OUT_SLOT).text()] = tag

    for target_text, src in wire_src.items():
        head, _, slot = target_text.partition(".")
        dst = Endpoint(head, slot or None)
        expected = checker.sink_tag(dst)
        actual = driver_tag(src)
        if expected and actual and expected != actual:
            checker.error(
                dst.node, "type",
                f"wire carries {actual!r} into a {expected!r} endpoint",
            )
        if expected is None and tree.node(dst.node).kind == "macro.op":
            op = str(tree.node(dst.node).value)
            if op in OPS and actual:
                _check_op_input_tag(checker, dst, op, actual)


def _op_output_tag(tree, node_id, op, discipline, in_tags, checker) -> str | None:
    if discipline == "bool":
        return "bool"
    if discipline == "const":
        literal = tree.get_meta(node_id, "macro.const")
        if isinstance(literal, bool):
            return "bool"
        if isinstance(literal, int):
            return "int"
        if isinstance(literal, float):
            return "float"
        if isinstance(literal, str):
            return None  # text constants flow type-opaque
        return None
    if discipline == "compare":
        if len(set(t for t in in_tags if t)) > 1:
            checker.error(node_id, "type", "comparison inputs must share a type")
        return "bool"
    if discipline == "pass":
        return in_tags[0]
    if discipline == "number":
        tags = [t for t in in_tags if t]
        if any(t == "bool" for t in tags):
            checker.error(node_id, "type", "arithmetic over bool values")
            return None
        if len(set(tags)) > 1:
            checker.error(node_id, "type", "arithmetic inputs must share a type")
            return None
        return tags[0] if tags else None
    return None


def _check_op_input_tag(checker, dst: Endpoint, op: str, actual: str) -> None:
    discipline = OPS[op][1]
    if discipline == "bool" and actual != "bool":
        checker.error(dst.node, "type", f"{op} expects bool, got {actual!r}")
    if discipline == "number" and actual == "bool":
        checker.error(dst.node, "type", f"{op} cannot take bool input")


# -------------------------------------------------------- extended elements


def derive_extended_element(
    tree: AsltTree,
    selection: list[NodeId],
    new_name: str,
    catalog: ComponentCatalog | None = None,
) -> NodeId:
    """Fold a closed sub-dataflow into one composite node.

    The selection must live in a single macro or task scope; every wire that
    crosses the selection boundary must end at a port of that scope (macro) or
    at an instance port (task), otherwise the selection is open. External
    connections are rewired through fresh ports of the new composite, so
    evaluation before and after the fold is indistinguishable.
    """
    if not new_name or not isinstance(new_name, str):
        raise SelectionError("extended elements need a non-empty name")
    if not selection:
        raise SelectionError("empty selection")
    selected = list(dict.fromkeys(selection))
    for node_id in selected:
        if node_id not in tree.nodes:
            raise SelectionError("selection references an unknown node", node=node_id)
    root_kind = tree.node(tree.root).kind
    if root_kind == "macro":
        settings = _FoldSettings(
            composite_kind="macro.composite", port_kind="macro.port",
            wire_kind="macro.wire", ns="macro",
            member_kinds={"macro.op", "macro.composite"},
        )
    elif root_kind == "task.app":
        settings = _FoldSettings(
            composite_kind="task.composite", port_kind="task.port",
            wire_kind="task.wire", ns="task",
            member_kinds={"task.instance", "task.composite"},
        )
    else:
        raise SelectionError("extended elements exist only in macro and task models")
    return _fold(tree, selected, new_name, settings, catalog or ComponentCatalog())


@dataclass(frozen=True)
class _FoldSettings:
    composite_kind: str
    port_kind: str
    wire_kind: str
    ns: str
    member_kinds: set[str]


def _fold(
    tree: AsltTree,
    selection: list[NodeId],
    new_name: str,
    s: _FoldSettings,
    catalog: ComponentCatalog,
) -> NodeId:
    parents = {tree.node(n).parent for n in selection}
    if len(parents) != 1 or None in parents:
        raise SelectionError("selection must live in a single scope")
    scope = parents.pop()
    selected = set(selection)
    members, wires = [], []
    for node_id in selection:
        kind = tree.node(node_id).kind
        if kind == s.wire_kind:
            wires.append(node_id)
        elif kind in s.member_kinds:
            members.append(node_id)
        else:
            raise SelectionError(f"{kind!r} elements cannot be folded", node=node_id)
    if not members:
        raise SelectionError("selection contains no foldable elements")

    scope_wires = [
        c for c in tree.node(scope).children if tree.node(c).kind == s.wire_kind
    ]
    member_set = set(members)
    internal, crossing_in, crossing_out = [], [], []
    for wire in scope_wires:
        from_key, to_key = wire_meta_keys(s.wire_kind)
        src = parse_endpoint(tree.get_meta(wire, from_key))
        dst = parse_endpoint(tree.get_meta(wire, to_key))
        src_in, dst_in = src.node in member_set, dst.node in member_set
        if src_in and dst_in:
            internal.append(wire)
        elif dst_in:
            crossing_in.append((wire, src, dst))
        elif src_in:
            crossing_out.append((wire, src, dst))
    for wire in wires:
        if wire not in internal:
            raise SelectionError("a selected wire crosses the selection boundary", node=wire)
    if s.ns == "macro":
        for wire, outer, _ in crossing_in:
            if tree.node(outer.node).kind != s.port_kind or outer.slot is not None:
                raise SelectionError("crossing wire without a port at the boundary", node=wire)
        for wire, _, outer in crossing_out:
            if tree.node(outer.node).kind != s.port_kind or outer.slot is not None:
                raise SelectionError("crossing wire without a port at the boundary", node=wire)

    checker = _ScopeChecker(tree, scope, catalog, [])

    def outer_tag(ep: Endpoint) -> str:
        tag = checker.sink_tag(ep)
        if tag is None:
            role = checker.endpoint_role(ep)
            tag = role[1] if role else None
        return tag or "bool"

    crossing_in.sort(key=lambda item: (item[1].text(), item[2].text()))
    crossing_out.sort(key=lambda item: (item[1].text(), item[2].text()))

    rec = InstructionRecorder(tree)
    xs = [tree.get_meta(m, META_X) for m in members]
    xs = [x for x in xs if isinstance(x, (int, float))]
    ys = [tree.get_meta(m, META_Y) for m in members]
    ys = [y for y in ys if isinstance(y, (int, float))]
    composite = rec.insert(scope, s.composite_kind, new_name)
    rec.set_meta(composite, f"{s.ns}.name", new_name)
    rec.set_meta(composite, META_X, min(xs) if xs else 40)
    rec.set_meta(composite, META_Y, min(ys) if ys else 40)

    in_ports: list[NodeId] = []
    for i, (wire, outer, inner) in enumerate(crossing_in, start=1):
        port = rec.insert(composite, s.port_kind, f"in{i}")
        rec.set_meta(port, f"{s.ns}.dir", "in")
        rec.set_meta(port, f"{s.ns}.type", outer_tag(outer))
        in_ports.append(port)
    out_ports: list[NodeId] = []
    for i, (wire, inner, outer) in enumerate(crossing_out, start=1):
        port = rec.insert(composite, s.port_kind, f"out{i}")
        rec.set_meta(port, f"{s.ns}.dir", "out")
        rec.set_meta(port, f"{s.ns}.type", outer_tag(outer))
        out_ports.append(port)

    doc_order = [n.id for n in tree.walk() if n.id in member_set or n.id in set(internal)]
    for node_id in doc_order:
        rec.move(node_id, composite)

    from_key, to_key = wire_meta_keys(s.wire_kind)
    for (wire, outer, inner), port in zip(crossing_in, in_ports):
        rec.remove(wire)
        inner_wire = rec.insert(composite, s.wire_kind)
        rec.set_meta(inner_wire, from_key, Endpoint(port, None).text())
        rec.set_meta(inner_wire, to_key, inner.text())
        outer_wire = rec.insert(scope, s.wire_kind)
        rec.set_meta(outer_wire, from_key, outer.text())
        rec.set_meta(outer_wire, to_key, Endpoint(composite, f"in{in_ports.index(port) + 1}").text())
    for (wire, inner, outer), port in zip(crossing_out, out_ports):
        rec.remove(wire)
        inner_wire = rec.insert(composite, s.wire_kind)
        rec.set_meta(inner_wire, from_key, inner.text())
        rec.set_meta(inner_wire, to_key, Endpoint(port, None).text())
        outer_wire = rec.insert(scope, s.wire_kind)
        rec.set_meta(outer_wire, from_key, Endpoint(composite, f"out{out_ports.index(port) + 1}").text())
        rec.set_meta(outer_wire, to_key, outer.text())

    run_transaction(tree, rec.instructions)
    return composite


def palette_entry_for_composite(tree: AsltTree, composite: NodeId) -> PaletteEntry:
    """A droppable palette entry cloning the composite's current structure."""
    node = tree.node(composite)
    ns = node.kind.split(".")[0]
    name = display_name(tree, composite)
    records = tuple(
        tree.node(n.id).record(tree.child_index(n.id)) for n in tree.walk(composite)
    )
    return PaletteEntry(
        item=f"{node.kind}.{name}",
        glyph="composite",
        kind=node.kind,
        label=name,
        parent_kinds=("macro", "macro.composite") if ns == "macro" else ("task.app", "task.composite"),
        wizard=WizardSpec(
            id=f"{node.kind}.{name}.create",
            produced_for="ElementDropped",
            fields=(WizardField("name", "text", default=""),),
        ),
        value_source=("const", str(node.value or name)),
        name_meta=f"{ns}.name",
        auto_prefix="c",
        definition=records,
    )
