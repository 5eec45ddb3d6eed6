"""Scene construction, patches, layout, filters, layers and groups."""

from __future__ import annotations

import pytest

from nbmvc.aslt import create_tree
from nbmvc.domains import load_profile
from nbmvc.sample import build_and2_project, build_panel_project, sample_catalog
from nbmvc.scene import (
    Filter,
    apply_change_to_scene,
    apply_patch,
    construct_scene,
    diff_scenes,
    grid_position,
    group_symbols,
    layout,
    scene_hash,
    scenes_equal,
    set_layer,
    set_layer_visible,
    toggle_filter,
)


def rebuild(tree, profile, old_scene):
    return construct_scene(
        tree,
        profile,
        filters=old_scene.filters,
        layer_visibility={l.id: l.visible for l in old_scene.layers.values()},
    )


class TestConstruct:
    def test_empty_task_tree(self):
        scene = construct_scene(create_tree("task.app"), load_profile("task"))
        assert scene.symbols == {} and scene.bindings == {}

    def test_ports_and_wires_become_symbols_and_bindings(self):
        tree = create_tree("macro")
        tree.set_value(tree.root, "M")
        a = tree.insert_node(tree.root, 0, "macro.port", "a")
        tree.set_meta(a, "macro.dir", "in")
        b = tree.insert_node(tree.root, 1, "macro.port", "b")
        tree.set_meta(b, "macro.dir", "out")
        wire = tree.insert_node(tree.root, 2, "macro.wire")
        tree.set_meta(wire, "macro.from", a)
        tree.set_meta(wire, "macro.to", b)
        scene = construct_scene(tree, load_profile("macro"))
        assert len(scene.symbols) == 2
        assert len(scene.bindings) == 1
        binding = scene.bindings[wire]
        assert binding.from_symbol == a and binding.to_symbol == b

    def test_construction_is_deterministic(self):
        tree = build_and2_project()
        profile = load_profile("macro")
        assert scenes_equal(construct_scene(tree, profile), construct_scene(tree, profile))
        assert scene_hash(construct_scene(tree, profile)) == scene_hash(
            construct_scene(tree, profile)
        )

    def test_positions_come_from_meta(self):
        tree = build_panel_project()
        scene = construct_scene(tree, load_profile("io"))
        device = tree.query("/io.device")[0]
        assert scene.symbols[device].x == 40.0

    def test_unknown_kind_gets_fallback_glyph_and_diagnostic(self):
        tree = create_tree("io.project")
        tree.insert_node(tree.root, 0, "alien.widget")
        scene = construct_scene(tree, load_profile("io"))
        symbol = next(iter(scene.symbols.values()))
        assert symbol.glyph == "unknown"
        assert any(d.rule == "unknown-kind" for d in scene.diagnostics)

    def test_dangling_wire_skipped_with_diagnostic(self):
        tree = build_and2_project()
        wire = tree.query("/macro.wire")[0]
        tree.set_meta(wire, "macro.to", "f" * 32)
        scene = construct_scene(tree, load_profile("macro"))
        assert wire not in scene.bindings
        assert any(d.rule == "dangling-binding" for d in scene.diagnostics)


class TestPatches:
    def test_value_rename_is_single_relabel(self):
        tree = build_panel_project()
        profile = load_profile("io")
        scene = construct_scene(tree, profile)
        device = tree.query("/io.device")[0]
        events = []
        tree.subscribe(events.append)
        tree.set_value(device, "panelX")
        patch = apply_change_to_scene(scene, events, tree, profile)
        assert [d["op"] for d in patch.deltas] == ["relabel"]
        assert patch.deltas[0]["label"] == "panelX"

    def test_removing_bound_port_removes_binding_first(self):
        tree = build_and2_project()
        profile = load_profile("macro")
        scene = construct_scene(tree, profile)
        port = tree.query("/macro.port[0]")[0]
        events = []
        tree.subscribe(events.append)
        tree.remove_subtree(port)
        patch = apply_change_to_scene(scene, events, tree, profile)
        ops = [d["op"] for d in patch.deltas]
        assert "remove_binding" in ops and "remove_symbol" in ops
        assert ops.index("remove_binding") < ops.index("remove_symbol")

    def test_empty_event_list_empty_patch(self):
        tree = build_and2_project()
        profile = load_profile("macro")
        scene = construct_scene(tree, profile)
        assert len(apply_change_to_scene(scene, [], tree, profile)) == 0

    def test_patch_application_matches_rebuild(self):
        tree = build_and2_project()
        profile = load_profile("macro")
        scene = construct_scene(tree, profile)
        events = []
        tree.subscribe(events.append)
        gate = tree.query("/macro.op")[0]
        tree.set_meta(gate, "view.x", 400)
        port = tree.insert_node(tree.root, 0, "macro.port", "z")
        tree.set_meta(port, "macro.dir", "in")
        tree.set_meta(port, "macro.type", "bool")
        patch = apply_change_to_scene(scene, events, tree, profile)
        patched = apply_patch(scene, patch)
        assert scenes_equal(patched, rebuild(tree, profile, scene))

    def test_move_is_move_delta(self):
        tree = build_and2_project()
        profile = load_profile("macro")
        scene = construct_scene(tree, profile)
        gate = tree.query("/macro.op")[0]
        events = []
        tree.subscribe(events.append)
        tree.set_meta(gate, "view.x", 999)
        patch = apply_change_to_scene(scene, events, tree, profile)
        assert [d["op"] for d in patch.deltas] == ["move_symbol"]


class TestLayout:
    def test_single_unplaced_lands_on_first_cell(self):
        tree = create_tree("macro")
        tree.set_value(tree.root, "M")
        port = tree.insert_node(tree.root, 0, "macro.port", "a")
        tree.set_meta(port, "macro.dir", "in")
        scene = construct_scene(tree, load_profile("macro"))
        placements = layout(tree, scene)
        assert placements == {port: (40, 40)}
        assert tree.get_meta(port, "view.x") == 40

    def test_ninth_symbol_wraps_to_second_row(self):
        tree = create_tree("macro")
        tree.set_value(tree.root, "M")
        nodes = []
        for i in range(9):
            port = tree.insert_node(tree.root, i, "macro.port", f"p{i:02d}")
            tree.set_meta(port, "macro.dir", "in")
            nodes.append(port)
        scene = construct_scene(tree, load_profile("macro"))
        placements = layout(tree, scene)
        ninth = sorted(nodes)[8]
        assert grid_position(8) == (40, 130)
        assert placements[ninth] == (40, 130)

    def test_all_placed_no_mutation(self):
        tree = build_and2_project()
        version = tree.version
        scene = construct_scene(tree, load_profile("macro"))
        assert layout(tree, scene) == {}
        assert tree.version == version

    def test_construct_uses_same_grid_for_unplaced(self):
        tree = create_tree("macro")
        tree.set_value(tree.root, "M")
        port = tree.insert_node(tree.root, 0, "macro.port", "a")
        tree.set_meta(port, "macro.dir", "in")
        scene = construct_scene(tree, load_profile("macro"))
        assert (scene.symbols[port].x, scene.symbols[port].y) == (40.0, 40.0)


class TestVisibility:
    def scene_with_pins(self):
        tree = build_panel_project()
        profile = load_profile("io")
        return tree, profile, construct_scene(tree, profile)

    def test_by_kind_filter_excludes_matches(self):
        tree, profile, scene = self.scene_with_pins()
        pin = tree.insert_node(tree.query("/io.device")[0], 2, "io.pin", "aux")
        tree.set_meta(pin, "io.dir", "in")
        tree.set_meta(pin, "io.type", "bool")
        scene = rebuild(tree, profile, scene)
        visible = toggle_filter(scene, Filter("kind:io.pin", "by-kind", "io.pin"), tree)
        pins = [s.id for s in scene.symbols.values() if s.kind == "io.pin"]
        assert len(pins) == 3
        assert all(p not in visible for p in pins)
        assert len(visible) == len(scene.symbols) - 3

    def test_hide_then_show_layer_is_involution(self):
        tree, profile, scene = self.scene_with_pins()
        before = set(scene.visible)
        set_layer_visible(scene, "default", False, tree)
        assert scene.visible == frozenset()
        set_layer_visible(scene, "default", True, tree)
        assert set(scene.visible) == before

    def test_filter_monotonicity(self):
        tree, profile, scene = self.scene_with_pins()
        base = set(scene.visible)
        after_one = set(toggle_filter(scene, Filter("kind:io.pin", "by-kind", "io.pin"), tree))
        after_two = set(
            toggle_filter(scene, Filter("kind:io.device", "by-kind", "io.device"), tree)
        )
        assert after_one <= base
        assert after_two <= after_one

    def test_by_meta_filter(self):
        tree, profile, scene = self.scene_with_pins()
        visible = toggle_filter(scene, Filter("m", "by-meta", ["io.dir", "in"]), tree)
        hidden = [s.id for s in scene.symbols.values() if s.id not in visible]
        assert len(hidden) == 1
        assert tree.get_meta(hidden[0], "io.dir") == "in"

    def test_collapse_hides_children_not_symbols(self):
        tree, profile, scene = self.scene_with_pins()
        device = tree.query("/io.device")[0]
        tree.set_meta(device, "view.collapsed", True)
        scene = rebuild(tree, profile, scene)
        pins = [s.id for s in scene.symbols.values() if s.kind == "io.pin"]
        assert pins and all(p not in scene.visible for p in pins)
        assert device in scene.visible
        assert all(p in scene.symbols for p in pins)


class TestGroupsAndLayers:
    def test_singleton_group_is_valid(self):
        tree, profile = build_panel_project(), load_profile("io")
        scene = construct_scene(tree, profile)
        device = tree.query("/io.device")[0]
        gid = group_symbols(tree, scene, [device])
        assert scene.groups[gid] == [device]
        assert tree.get_meta(device, "view.group") == gid

    def test_group_persists_into_rebuild(self):
        tree, profile = build_panel_project(), load_profile("io")
        scene = construct_scene(tree, profile)
        device = tree.query("/io.device")[0]
        gid = group_symbols(tree, scene, [device])
        assert rebuild(tree, profile, scene).groups[gid] == [device]

    def test_set_layer_persists_and_rebuilds(self):
        tree, profile = build_panel_project(), load_profile("io")
        scene = construct_scene(tree, profile)
        device = tree.query("/io.device")[0]
        set_layer(tree, scene, device, "wiring")
        again = rebuild(tree, profile, scene)
        assert again.symbols[device].layer == "wiring"
        assert "wiring" in again.layers

    def test_unknown_symbol_rejected(self):
        tree, profile = build_panel_project(), load_profile("io")
        scene = construct_scene(tree, profile)
        with pytest.raises(Exception):
            group_symbols(tree, scene, ["f" * 32])
