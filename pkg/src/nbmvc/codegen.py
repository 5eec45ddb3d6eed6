"""Deterministic code generation and the desk-scale task evaluator.

Components (devices and macros) render to NDL, a small neutral definition
language: a ``component`` block declares ports, operator nodes and wires; an
``application`` block declares instances and binds. Formatting is fixed (two
space indent, one declaration per line, LF endings, wires and binds sorted),
so identical models produce byte-identical artifacts on every run.

Task models compile to a :class:`TaskProgram`: composites are flattened into
dotted instance names, wiring is contracted through pass-through ports, and
the evaluation order is a deterministic topological sort. Evaluation is one
synchronous sweep over that order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .aslt import AsltTree, NodeId, Scalar
from .domains import (
    ComponentCatalog,
    ComponentType,
    Diagnostic,
    DomainProfile,
    Endpoint,
    IN_SLOTS,
    OPS,
    OUT_SLOT,
    display_name,
    has_errors,
    load_profile,
    macro_ports,
    parse_endpoint,
    scope_members,
    validate_model,
    wire_meta_keys,
)
from .errors import CannotGenerate, CycleError, InputError, InvalidArgument

LANGUAGE = "ndl"


@dataclass(frozen=True)
class CodeArtifact:
    path: str
    language: str
    content: str
    source_node: NodeId
    content_hash: str

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "language": self.language,
            "content": self.content,
            "source_node": self.source_node,
            "hash": self.content_hash,
        }


def _artifact(path: str, content: str, source: NodeId) -> CodeArtifact:
    return CodeArtifact(
        path=path,
        language=LANGUAGE,
        content=content,
        source_node=source,
        content_hash=hashlib.sha256(content.encode("utf-8")).hexdigest(),
    )


def _literal(value: Scalar) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return f'"{value}"'


# ---------------------------------------------------------------- component


def _subtree_diagnostics(tree: AsltTree, node: NodeId, diagnostics) -> list[Diagnostic]:
    scope_ids = {n.id for n in tree.walk(node)}
    return [d for d in diagnostics if d.node in scope_ids and d.severity == "error"]


def generate_component_code(tree: AsltTree, node: NodeId, profile: DomainProfile) -> CodeArtifact:
    """Render one device or macro as an NDL component artifact."""
    kind = tree.node(node).kind
    if kind not in ("io.device", "macro"):
        raise InvalidArgument(f"cannot generate component code for {kind!r}", node=node)
    diagnostics = _subtree_diagnostics(tree, node, validate_model(tree, profile))
    if diagnostics:
        raise CannotGenerate("model has validation errors", diagnostics=diagnostics)
    templates = profile.templates
    if kind == "io.device":
        content = _render_device(tree, node, templates)
    else:
        content = _render_macro_blocks(tree, node, templates)
    name = display_name(tree, node)
    return _artifact(f"{name}.ndl", content, node)


def _render_device(tree: AsltTree, device: NodeId, templates: dict) -> str:
    indent = templates["indent"]
    lines = [
        templates["component_header"].format(
            name=display_name(tree, device), kind=tree.node(device).kind
        )
    ]
    for pin in tree.node(device).children:
        node = tree.node(pin)
        if node.kind != "io.pin":
            continue
        lines.append(
            indent
            + templates["port"].format(
                dir=tree.get_meta(pin, "io.dir", "in"),
                name=node.value,
                tag=tree.get_meta(pin, "io.type", "bool"),
            )
        )
    lines.append(templates["close"])
    return "\n".join(lines) + "\n"


def _endpoint_text(tree: AsltTree, scope: NodeId, ep: Endpoint) -> str:
    node = tree.node(ep.node)
    if node.kind in ("macro.port", "task.port"):
        return str(node.value)
    base = display_name(tree, ep.node)
    return f"{base}.{ep.slot}" if ep.slot else base


def _render_scope_block(tree: AsltTree, scope: NodeId, name: str, templates: dict) -> str:
    indent = templates["indent"]
    members = scope_members(tree, scope)
    ns = "macro" if tree.node(scope).kind in ("macro", "macro.composite") else "task"
    lines = [templates["component_header"].format(name=name, kind=tree.node(scope).kind)]
    for port in members["ports"]:
        lines.append(
            indent
            + templates["port"].format(
                dir=tree.get_meta(port, f"{ns}.dir", "in"),
                name=tree.node(port).value,
                tag=tree.get_meta(port, f"{ns}.type", "bool"),
            )
        )
    for op_node in members["ops"]:
        op = str(tree.node(op_node).value)
        op_name = display_name(tree, op_node)
        if op == "CONST":
            literal = _literal(tree.get_meta(op_node, "macro.const"))
            lines.append(indent + templates["node_const"].format(name=op_name, op=op, literal=literal))
        else:
            lines.append(indent + templates["node"].format(name=op_name, op=op))
    for composite in members["composites"]:
        lines.append(
            indent
            + templates["node"].format(
                name=display_name(tree, composite), op=str(tree.node(composite).value)
            )
        )
    wire_lines = []
    from_key, to_key = wire_meta_keys(f"{ns}.wire")
    for wire in members["wires"]:
        src = _endpoint_text(tree, scope, parse_endpoint(tree.get_meta(wire, from_key)))
        dst = _endpoint_text(tree, scope, parse_endpoint(tree.get_meta(wire, to_key)))
        wire_lines.append((src, dst))
    for src, dst in sorted(wire_lines):
        lines.append(indent + templates["wire"].format(src=src, dst=dst))
    lines.append(templates["close"])
    return "\n".join(lines) + "\n"


def _render_macro_blocks(tree: AsltTree, scope: NodeId, templates: dict) -> str:
    """The scope's component block followed by one block per nested composite."""
    blocks = [_render_scope_block(tree, scope, display_name(tree, scope), templates)]
    for node in tree.walk(scope):
        if node.id != scope and node.kind == "macro.composite":
            blocks.append(
                _render_scope_block(tree, node.id, str(node.value), templates)
            )
    return "\n".join(blocks)


# -------------------------------------------------------------- the program


@dataclass(frozen=True)
class TaskProgram:
    """A flattened, ordered wiring of component instances."""

    app_name: str
    instances: dict  # flat instance name -> component type name
    wiring: dict  # (inst, port) source -> tuple of (inst, port) sinks
    order: tuple  # instance names, first-involvement order
    external_inputs: tuple  # ("inst.port", tag)
    external_outputs: tuple  # ("inst.port", tag)
    types: dict = field(default_factory=dict)  # type name -> ComponentType


def _flatten_task(tree: AsltTree, scope: NodeId, prefix: str, catalog: ComponentCatalog, out):
    """Collect flat instances and port-aliased edges; composites recurse."""
    members = scope_members(tree, scope)
    for instance in members["instances"]:
        flat = prefix + display_name(tree, instance)
        out["instances"][flat] = str(tree.node(instance).value)
        out["instance_nodes"][instance] = flat
    for composite in members["composites"]:
        _flatten_task(
            tree, composite, prefix + display_name(tree, composite) + ".", catalog, out
        )
    from_key, to_key = wire_meta_keys("task.wire")

    def vertex(ep: Endpoint) -> str:
        node = tree.node(ep.node)
        if node.kind == "task.instance":
            return f"inst:{out['instance_nodes'][ep.node]}:{ep.slot}"
        if node.kind == "task.port":
            return f"port:{ep.node}"
        if node.kind == "task.composite":
            for child in tree.node(ep.node).children:
                child_node = tree.node(child)
                if child_node.kind == "task.port" and child_node.value == ep.slot:
                    return f"port:{child}"
        raise InvalidArgument("wire endpoint does not resolve", endpoint=ep.text())

    for wire in members["wires"]:
        src = parse_endpoint(tree.get_meta(wire, from_key))
        dst = parse_endpoint(tree.get_meta(wire, to_key))
        out["edges"].append((vertex(src), vertex(dst)))


def compile_task(tree: AsltTree, catalog: ComponentCatalog | None = None) -> TaskProgram:
    """Flatten a task model into an executable program with a fixed order."""
    catalog = catalog or ComponentCatalog()
    collected = {"instances": {}, "instance_nodes": {}, "edges": []}
    _flatten_task(tree, tree.root, "", catalog, collected)
    instances: dict[str, str] = collected["instances"]

    types: dict[str, ComponentType] = {}
    for flat, type_name in instances.items():
        component = catalog.get(type_name)
        if component is None:
            raise InvalidArgument(f"unknown component type {type_name!r}", instance=flat)
        types[type_name] = component

    # contract pass-through port vertices into direct source->sink edges
    driver: dict[str, str] = {}
    consumers: dict[str, list[str]] = {}
    for src, dst in collected["edges"]:
        driver[dst] = src
        consumers.setdefault(src, []).append(dst)

    def trace_source(vertex: str) -> str | None:
        seen = set()
        cursor = vertex
        while cursor.startswith("port:"):
            if cursor in seen:
                raise CycleError("wiring contains a port cycle", nodes=[cursor])
            seen.add(cursor)
            if cursor not in driver:
                return None
            cursor = driver[cursor]
        return cursor

    def inst_port(vertex: str) -> tuple[str, str]:
        _, flat, port = vertex.split(":", 2)
        return flat, port

    wiring: dict[tuple[str, str], list[tuple[str, str]]] = {}
    sink_driver: dict[tuple[str, str], tuple[str, str]] = {}
    for vertex in driver:
        if not vertex.startswith("inst:"):
            continue
        source = trace_source(driver[vertex])
        if source is None or not source.startswith("inst:"):
            continue
        src_pair, dst_pair = inst_port(source), inst_port(vertex)
        wiring.setdefault(src_pair, []).append(dst_pair)
        sink_driver[dst_pair] = src_pair

    def port_role_tag(flat: str, port: str) -> tuple[str, str] | None:
        component = types.get(instances[flat])
        if component is None:
            return None
        spec = component.port(port)
        if spec is None:
            return None
        return spec.task_role(component.domain), spec.tag

    # dependency units: macros couple all their ports, device pins stay free
    def unit(flat: str, port: str) -> str:
        component = types[instances[flat]]
        if component.domain == "io":
            return f"{flat}.{port}"
        return flat

    units: set[str] = set()
    unit_name: dict[str, str] = {}
    for flat in instances:
        component = types[instances[flat]]
        if component.domain == "io":
            for spec in component.ports:
                key = f"{flat}.{spec.name}"
                units.add(key)
                unit_name[key] = flat
        else:
            units.add(flat)
            unit_name[flat] = flat
    unit_edges = set()
    for (s_inst, s_port), sinks in wiring.items():
        for d_inst, d_port in sinks:
            unit_edges.add((unit(s_inst, s_port), unit(d_inst, d_port)))

    order_units, leftover = _kahn(sorted(units), sorted(unit_edges))
    if leftover:
        raise CycleError(
            "task wiring contains a cycle",
            nodes=sorted({unit_name[u] for u in leftover}),
        )
    order: list[str] = []
    for u in order_units:
        name = unit_name[u]
        if name not in order:
            order.append(name)

    external_inputs: list[tuple[str, str]] = []
    external_outputs: list[tuple[str, str]] = []
    for flat in sorted(instances):
        component = types[instances[flat]]
        for spec in component.ports:
            pair = (flat, spec.name)
            role = spec.task_role(component.domain)
            key = f"{flat}.{spec.name}"
            if role == "out":  # drives the dataflow
                if component.domain == "io":
                    external_inputs.append((key, spec.tag))
                elif pair not in wiring:
                    external_outputs.append((key, spec.tag))
            else:  # consumes from the dataflow
                if component.domain == "io":
                    external_outputs.append((key, spec.tag))
                elif pair not in sink_driver:
                    external_inputs.append((key, spec.tag))

    return TaskProgram(
        app_name=str(tree.node(tree.root).value or "app"),
        instances=dict(sorted(instances.items())),
        wiring={src: tuple(sorted(sinks)) for src, sinks in sorted(wiring.items())},
        order=tuple(order),
        external_inputs=tuple(external_inputs),
        external_outputs=tuple(external_outputs),
        types=types,
    )


def _kahn(nodes, edges):
    node_set = set(nodes)
    incoming = {n: 0 for n in nodes}
    outgoing = {n: [] for n in nodes}
    for src, dst in edges:
        if src not in node_set or dst not in node_set:
            continue
        if src == dst:
            return [], [src]
        incoming[dst] += 1
        outgoing[src].append(dst)
    ready = sorted(n for n, deg in incoming.items() if deg == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        added = False
        for nxt in outgoing[node]:
            incoming[nxt] -= 1
            if incoming[nxt] == 0:
                ready.append(nxt)
                added = True
        if added:
            ready.sort()
    done = set(order)
    return order, [n for n in nodes if n not in done]


# -------------------------------------------------------------- application


def generate_application(tree: AsltTree, profile: DomainProfile) -> list[CodeArtifact]:
    """One component artifact per referenced type plus the application manifest."""
    diagnostics = [d for d in validate_model(tree, profile) if d.severity == "error"]
    if diagnostics:
        raise CannotGenerate("task model has validation errors", diagnostics=diagnostics)
    program = compile_task(tree, profile.catalog)
    artifacts = []
    for type_name in sorted(set(program.instances.values())):
        component = program.types[type_name]
        if component.source_tree is None:
            raise CannotGenerate(
                "component type has no model to generate from",
                diagnostics=[Diagnostic("error", None, "instance-type", type_name)],
            )
        source_profile = load_profile(component.domain)
        artifacts.append(
            generate_component_code(component.source_tree, component.source_node, source_profile)
        )
    templates = profile.templates
    indent = templates["indent"]
    lines = [templates["application_header"].format(name=program.app_name)]
    for flat in sorted(program.instances):
        lines.append(indent + templates["instance"].format(name=flat, type=program.instances[flat]))
    binds = []
    for (s_inst, s_port), sinks in program.wiring.items():
        for d_inst, d_port in sinks:
            binds.append((f"{s_inst}.{s_port}", f"{d_inst}.{d_port}"))
    for src, dst in sorted(binds):
        lines.append(indent + templates["bind"].format(src=src, dst=dst))
    lines.append(templates["close"])
    content = "\n".join(lines) + "\n"
    artifacts.append(_artifact(f"{program.app_name}.app.ndl", content, tree.root))
    return sorted(artifacts, key=lambda a: a.path)


# --------------------------------------------------------------- evaluation


_DEFAULTS = {"bool": False, "int": 0, "float": 0.0}


def _check_input(key: str, tag: str, value) -> Scalar:
    if tag == "bool" and isinstance(value, bool):
        return value
    if tag == "int" and isinstance(value, int) and not isinstance(value, bool):
        return value
    if tag == "float" and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise InputError(f"input {key!r} must be of type {tag}", got=value)


def _apply_op(op: str, literal, args: list):
    if op == "NOT":
        return not args[0]
    if op == "AND":
        return bool(args[0] and args[1])
    if op == "OR":
        return bool(args[0] or args[1])
    if op == "XOR":
        return bool(args[0]) != bool(args[1])
    if op == "ADD":
        return args[0] + args[1]
    if op == "SUB":
        return args[0] - args[1]
    if op == "MUL":
        return args[0] * args[1]
    if op == "LT":
        return args[0] < args[1]
    if op == "EQ":
        return args[0] == args[1]
    if op == "PASS":
        return args[0]
    if op == "CONST":
        return literal
    raise InvalidArgument(f"unknown operator {op!r}")


def evaluate_scope(tree: AsltTree, scope: NodeId, inputs: dict) -> dict:
    """Evaluate a macro scope: in-port values in, out-port values out."""
    members = scope_members(tree, scope)
    ns = "macro" if tree.node(scope).kind.startswith("macro") else "task"
    from_key, to_key = wire_meta_keys(f"{ns}.wire")
    wire_src: dict[str, Endpoint] = {}
    edges = []
    for wire in members["wires"]:
        src = parse_endpoint(tree.get_meta(wire, from_key))
        dst = parse_endpoint(tree.get_meta(wire, to_key))
        wire_src[dst.text()] = src
        edges.append((src.node, dst.node))

    values: dict[str, Scalar] = {}
    for port in members["ports"]:
        if tree.get_meta(port, f"{ns}.dir", "in") == "in":
            name = str(tree.node(port).value)
            if name not in inputs:
                raise InputError(f"missing value for port {name!r}")
            values[Endpoint(port, None).text()] = inputs[name]

    order, leftover = _kahn(
        sorted(members["ops"] + members["composites"]), sorted(set(edges))
    )
    if leftover:
        raise CycleError("dataflow contains a cycle", nodes=leftover)

    for node_id in order:
        node = tree.node(node_id)
        if node.kind == "macro.op":
            op = str(node.value)
            args = []
            for slot in IN_SLOTS[OPS[op][0]]:
                src = wire_src.get(Endpoint(node_id, slot).text())
                if src is None:
                    raise InputError(f"operator input {slot!r} unwired", node=node_id)
                args.append(values[src.text()])
            values[Endpoint(node_id, OUT_SLOT).text()] = _apply_op(
                op, tree.get_meta(node_id, "macro.const"), args
            )
        elif node.kind in ("macro.composite", "task.composite"):
            sub_inputs = {}
            for spec in macro_ports(tree, node_id):
                if spec.dir != "in":
                    continue
                src = wire_src.get(Endpoint(node_id, spec.name).text())
                sub_inputs[spec.name] = values[src.text()] if src else _DEFAULTS.get(spec.tag)
            sub_outputs = evaluate_scope(tree, node_id, sub_inputs)
            for spec in macro_ports(tree, node_id):
                if spec.dir == "out":
                    values[Endpoint(node_id, spec.name).text()] = sub_outputs[spec.name]

    outputs = {}
    for port in members["ports"]:
        if tree.get_meta(port, f"{ns}.dir", "in") == "out":
            name = str(tree.node(port).value)
            src = wire_src.get(Endpoint(port, None).text())
            outputs[name] = values[src.text()] if src else None
    return outputs


def evaluate_task(program: TaskProgram, inputs: dict) -> dict:
    """One synchronous sweep; returns every external output pin's value."""
    expected = {key: tag for key, tag in program.external_inputs}
    unknown = sorted(set(inputs) - set(expected))
    if unknown:
        raise InputError(f"unknown input pins: {', '.join(unknown)}")
    missing = sorted(set(expected) - set(inputs))
    if missing:
        raise InputError(f"missing input pins: {', '.join(missing)}")
    values: dict[tuple[str, str], Scalar] = {}
    for key, tag in program.external_inputs:
        flat, port = key.rsplit(".", 1)
        values[(flat, port)] = _check_input(key, tag, inputs[key])

    sink_driver: dict[tuple[str, str], tuple[str, str]] = {}
    for src, sinks in program.wiring.items():
        for sink in sinks:
            sink_driver[sink] = src

    for flat in program.order:
        component = program.types[program.instances[flat]]
        if component.domain != "macro":
            continue
        macro_inputs = {}
        for spec in component.ports:
            if spec.dir != "in":
                continue
            driver = sink_driver.get((flat, spec.name))
            if driver is not None:
                macro_inputs[spec.name] = values[driver]
            else:
                macro_inputs[spec.name] = values[(flat, spec.name)]
        outs = evaluate_scope(component.source_tree, component.source_node, macro_inputs)
        for spec in component.ports:
            if spec.dir == "out":
                values[(flat, spec.name)] = outs[spec.name]

    outputs = {}
    for key, tag in program.external_outputs:
        flat, port = key.rsplit(".", 1)
        driver = sink_driver.get((flat, port))
        if driver is not None:
            outputs[key] = values[driver]
        elif (flat, port) in values:
            outputs[key] = values[(flat, port)]
        else:
            outputs[key] = _DEFAULTS.get(tag)
    return outputs
