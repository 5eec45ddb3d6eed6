"""Profiles, wizards, validation rules, and extended-element folding."""

from __future__ import annotations

import json

import pytest

from nbmvc.aslt import create_tree
from nbmvc.domains import (
    MODEL_EVENT_KINDS,
    OPS,
    ComponentCatalog,
    PortType,
    WizardField,
    WizardSpec,
    catalog_from_trees,
    derive_extended_element,
    display_name,
    load_profile,
    palette_entry_for_composite,
    profile_from_json,
    validate_model,
)
from nbmvc.codegen import compile_task, evaluate_task
from nbmvc.errors import InvalidAnswer, ProfileError, SelectionError
from nbmvc.sample import (
    build_and2_project,
    build_main_project,
    build_panel_project,
    sample_catalog,
)


def rules_of(diagnostics):
    return {d.rule for d in diagnostics}


class TestLoadProfile:
    def test_io_palette_has_device_and_pin(self):
        profile = load_profile("io")
        items = {entry.item for entry in profile.palette}
        assert "io.device" in items and "io.pin" in items

    def test_task_palette_scans_catalog(self):
        profile = load_profile("task", catalog=sample_catalog())
        items = {entry.item for entry in profile.palette}
        assert items == {"task.instance.And2", "task.instance.panel"}

    def test_unknown_profile(self):
        with pytest.raises(ProfileError):
            load_profile("nonsense")

    def test_profiles_cover_every_event_kind(self):
        for name in ("io", "macro", "task"):
            profile = load_profile(name)
            covered = {p.trigger for p in profile.processors} | set(profile.unsupported_events)
            assert set(MODEL_EVENT_KINDS) <= covered

    def test_binding_rules_total_and_directional(self):
        profile = load_profile("macro")
        assert len(profile.binding_rules) == 36
        assert profile.binding_allowed(PortType("bool", "out"), PortType("bool", "in"))
        assert not profile.binding_allowed(PortType("bool", "out"), PortType("bool", "out"))
        assert not profile.binding_allowed(PortType("bool", "out"), PortType("int", "in"))

    def test_profile_json_roundtrip(self):
        profile = load_profile("macro")
        text = json.dumps(profile.to_json())
        again = profile_from_json(text)
        assert again.name == "macro"
        assert {e.item for e in again.palette} == {e.item for e in profile.palette}
        assert again.binding_rules == profile.binding_rules
        again.check_closure()

    def test_custom_profile_from_file(self, tmp_path):
        doc = load_profile("io").to_json()
        doc["name"] = "plc"
        doc["root_kind"] = "plc.rack"
        path = tmp_path / "plc.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        profile = load_profile(str(path))
        assert profile.name == "plc"
        assert profile.root_kind == "plc.rack"

    def test_malformed_profile_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ProfileError):
            load_profile(str(path))


class TestWizards:
    def spec(self):
        return WizardSpec(
            id="w",
            produced_for="ElementDropped",
            fields=(
                WizardField("name", "text", constraint={"nonempty": True}),
                WizardField("ins", "int", default=2, constraint={"min": 0, "max": 8}),
            ),
        )

    def test_missing_required(self):
        assert self.spec().missing_required({"ins": 3}) == ["name"]
        with pytest.raises(InvalidAnswer):
            self.spec().complete({"ins": 3})

    def test_defaults_fill_in(self):
        done = self.spec().complete({"name": "And2"})
        assert done["ins"] == 2

    def test_answer_equal_to_default_matches_omission(self):
        assert self.spec().complete({"name": "x", "ins": 2}) == self.spec().complete({"name": "x"})

    def test_coercion_from_text(self):
        assert self.spec().complete({"name": "x", "ins": "4"})["ins"] == 4

    def test_constraint_violation(self):
        with pytest.raises(InvalidAnswer):
            self.spec().complete({"name": "x", "ins": 99})
        with pytest.raises(InvalidAnswer):
            self.spec().complete({"name": "   "})


class TestValidation:
    def test_sample_projects_are_clean(self):
        assert validate_model(build_panel_project(), load_profile("io")) == []
        assert validate_model(build_and2_project(), load_profile("macro")) == []
        assert validate_model(build_main_project(), load_profile("task", catalog=sample_catalog())) == []

    def test_wrong_root_kind(self):
        diags = validate_model(create_tree("task.app"), load_profile("io"))
        assert rules_of(diags) == {"root-kind"}

    def test_unwired_op_input_is_arity_error(self):
        tree = build_and2_project()
        wire = tree.query("/macro.wire")[0]  # feeds and1.a
        tree.remove_subtree(wire)
        diags = validate_model(tree, load_profile("macro"))
        assert "arity" in rules_of(diags)

    def test_driver_to_driver_wire_rejected(self):
        tree = build_and2_project()
        ports = tree.query("/macro.port")
        wire = tree.insert_node(tree.root, len(tree.node(tree.root).children), "macro.wire")
        tree.set_meta(wire, "macro.from", ports[0])  # in-port drives
        tree.set_meta(wire, "macro.to", ports[1])  # another in-port cannot consume
        diags = validate_model(tree, load_profile("macro"))
        assert "wire-direction" in rules_of(diags)

    def test_multi_drive_detected(self):
        tree = build_and2_project()
        gate = tree.query("/macro.op")[0]
        ports = tree.query("/macro.port")
        wire = tree.insert_node(tree.root, len(tree.node(tree.root).children), "macro.wire")
        tree.set_meta(wire, "macro.from", ports[1])
        tree.set_meta(wire, "macro.to", f"{gate}.a")
        diags = validate_model(tree, load_profile("macro"))
        assert "multi-drive" in rules_of(diags)

    def test_dangling_wire_detected(self):
        tree = build_and2_project()
        wire = tree.query("/macro.wire")[0]
        tree.set_meta(wire, "macro.to", "f" * 32 + ".a")
        diags = validate_model(tree, load_profile("macro"))
        assert "wire-endpoint" in rules_of(diags)

    def test_duplicate_names_detected(self):
        tree = build_panel_project()
        device = tree.query("/io.device")[0]
        pin = tree.insert_node(device, 2, "io.pin", "btn")
        tree.set_meta(pin, "io.dir", "in")
        tree.set_meta(pin, "io.type", "bool")
        diags = validate_model(tree, load_profile("io"))
        assert "dup-names" in rules_of(diags)

    def test_unknown_instance_type(self):
        tree = build_main_project()
        inst = tree.query("/task.instance")[0]
        tree.set_value(inst, "Ghost")
        diags = validate_model(tree, load_profile("task", catalog=sample_catalog()))
        assert "instance-type" in rules_of(diags)

    def test_type_mismatch_detected(self):
        tree = build_and2_project()
        ports = tree.query("/macro.port")
        tree.set_meta(ports[0], "macro.type", "int")
        diags = validate_model(tree, load_profile("macro"))
        assert "type" in rules_of(diags)

    def test_op_cycle_detected(self):
        tree = create_tree("macro")
        tree.set_value(tree.root, "loop")
        gate = tree.insert_node(tree.root, 0, "macro.op", "NOT")
        tree.set_meta(gate, "macro.name", "n1")
        wire = tree.insert_node(tree.root, 1, "macro.wire")
        tree.set_meta(wire, "macro.from", f"{gate}.out")
        tree.set_meta(wire, "macro.to", f"{gate}.a")
        diags = validate_model(tree, load_profile("macro"))
        assert "cycle" in rules_of(diags)

    def test_undriven_device_sink_is_warning(self):
        tree = build_main_project()
        wires = tree.query("/task.wire")
        tree.remove_subtree(wires[2])  # a1.out -> p1.led
        diags = validate_model(tree, load_profile("task", catalog=sample_catalog()))
        assert any(d.rule == "undriven-sink" and d.severity == "warning" for d in diags)


class TestCatalog:
    def test_catalog_exports_devices_and_macros(self):
        catalog = catalog_from_trees([build_panel_project(), build_and2_project()])
        assert catalog.names() == ["And2", "panel"]
        panel = catalog.get("panel")
        assert [(p.name, p.tag, p.dir) for p in panel.ports] == [
            ("btn", "bool", "in"),
            ("led", "bool", "out"),
        ]

    def test_task_roles_flip_at_the_device_boundary(self):
        catalog = sample_catalog()
        panel, and2 = catalog.get("panel"), catalog.get("And2")
        assert panel.port("btn").task_role("io") == "out"
        assert panel.port("led").task_role("io") == "in"
        assert and2.port("x").task_role("macro") == "in"
        assert and2.port("out").task_role("macro") == "out"


def build_foldable_macro():
    """not1 -> and1 chain bounded by ports: x -> not1 -> and1.a, y -> and1.b, and1 -> out."""
    tree = create_tree("macro", id_seed=7)
    tree.set_value(tree.root, "NotAnd")
    ports = {}
    for i, (name, direction) in enumerate([("x", "in"), ("y", "in"), ("out", "out")]):
        port = tree.insert_node(tree.root, i, "macro.port", name)
        tree.set_meta(port, "macro.dir", direction)
        tree.set_meta(port, "macro.type", "bool")
        ports[name] = port
    not1 = tree.insert_node(tree.root, 3, "macro.op", "NOT")
    tree.set_meta(not1, "macro.name", "not1")
    and1 = tree.insert_node(tree.root, 4, "macro.op", "AND")
    tree.set_meta(and1, "macro.name", "and1")
    for i, (src, dst) in enumerate(
        [
            (ports["x"], f"{not1}.a"),
            (f"{not1}.out", f"{and1}.a"),
            (ports["y"], f"{and1}.b"),
            (f"{and1}.out", ports["out"]),
        ]
    ):
        wire = tree.insert_node(tree.root, 5 + i, "macro.wire")
        tree.set_meta(wire, "macro.from", src)
        tree.set_meta(wire, "macro.to", dst)
    return tree, not1, and1


def eval_macro_as_task(tree, inputs):
    catalog = catalog_from_trees([tree])
    name = catalog.names()[0]
    task = create_tree("task.app", id_seed=0xAA)
    task.set_value(task.root, "t")
    inst = task.insert_node(task.root, 0, "task.instance", name)
    task.set_meta(inst, "task.name", "m")
    program = compile_task(task, catalog)
    return evaluate_task(program, {f"m.{k}": v for k, v in inputs.items()})


class TestExtendedElements:
    def test_fold_not_and_pair(self):
        tree, not1, and1 = build_foldable_macro()
        before = {
            (x, y): eval_macro_as_task(tree, {"x": x, "y": y})
            for x in (False, True)
            for y in (False, True)
        }
        composite = derive_extended_element(tree, [not1, and1], "NotAndCore")
        ports = [
            (tree.node(c).value, tree.get_meta(c, "macro.dir"))
            for c in tree.node(composite).children
            if tree.node(c).kind == "macro.port"
        ]
        ins = [p for p, d in ports if d == "in"]
        outs = [p for p, d in ports if d == "out"]
        assert len(ins) == 2 and len(outs) == 1
        assert validate_model(tree, load_profile("macro")) == []
        after = {
            (x, y): eval_macro_as_task(tree, {"x": x, "y": y})
            for x in (False, True)
            for y in (False, True)
        }
        assert before == after

    def test_fold_single_const(self):
        tree = create_tree("macro", id_seed=3)
        tree.set_value(tree.root, "K")
        out = tree.insert_node(tree.root, 0, "macro.port", "out")
        tree.set_meta(out, "macro.dir", "out")
        tree.set_meta(out, "macro.type", "bool")
        const = tree.insert_node(tree.root, 1, "macro.op", "CONST")
        tree.set_meta(const, "macro.name", "k1")
        tree.set_meta(const, "macro.const", True)
        wire = tree.insert_node(tree.root, 2, "macro.wire")
        tree.set_meta(wire, "macro.from", f"{const}.out")
        tree.set_meta(wire, "macro.to", out)
        composite = derive_extended_element(tree, [const], "Konst")
        ports = [
            tree.get_meta(c, "macro.dir")
            for c in tree.node(composite).children
            if tree.node(c).kind == "macro.port"
        ]
        assert ports.count("in") == 0 and ports.count("out") == 1
        assert eval_macro_as_task(tree, {}) == {"m.out": True}

    def test_crossing_wire_without_port_is_open(self):
        tree, not1, and1 = build_foldable_macro()
        # folding only not1 leaves the not1->and1 wire ending at an op, not a port
        with pytest.raises(SelectionError):
            derive_extended_element(tree, [not1], "Broken")

    def test_selection_across_scopes_rejected(self):
        tree, not1, and1 = build_foldable_macro()
        composite = derive_extended_element(tree, [not1, and1], "Core")
        inner_op = next(
            c for c in tree.node(composite).children if tree.node(c).kind == "macro.op"
        )
        with pytest.raises(SelectionError):
            derive_extended_element(tree, [inner_op, composite], "Bad")

    def test_ports_cannot_be_folded(self):
        tree, not1, and1 = build_foldable_macro()
        port = tree.query("/macro.port")[0]
        with pytest.raises(SelectionError):
            derive_extended_element(tree, [port], "Bad")

    def test_fold_is_transactional_and_undoable(self):
        tree, not1, and1 = build_foldable_macro()
        events = []
        tree.subscribe(events.append)
        derive_extended_element(tree, [not1, and1], "Core")
        assert events, "fold must publish its mutations"
        assert [e.seq for e in events] == list(range(events[0].seq, events[0].seq + len(events)))

    def test_composite_palette_entry(self):
        tree, not1, and1 = build_foldable_macro()
        composite = derive_extended_element(tree, [not1, and1], "Core")
        entry = palette_entry_for_composite(tree, composite)
        assert entry.kind == "macro.composite"
        assert entry.definition
        assert entry.label == "Core"

    def test_task_fold_preserves_outputs(self):
        catalog = sample_catalog()
        task = build_main_project()
        gate = task.query("/task.instance")[1]
        assert display_name(task, gate) == "a1"
        before = {
            v: evaluate_task(compile_task(task, catalog), {"p1.btn": v}) for v in (False, True)
        }
        derive_extended_element(task, [gate], "Inner", catalog)
        after = {
            v: evaluate_task(compile_task(task, catalog), {"p1.btn": v}) for v in (False, True)
        }
        assert before == after
        assert validate_model(task, load_profile("task", catalog=catalog)) == []

    def test_io_fold_unsupported(self):
        tree = build_panel_project()
        device = tree.query("/io.device")[0]
        with pytest.raises(SelectionError):
            derive_extended_element(tree, [device], "Block")
