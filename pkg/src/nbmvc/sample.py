"""The bundled demo models: a panel device, an And2 macro, a task wiring them.

Built programmatically through the ordinary mutation API so ids and versions
are reproducible from the seeds; every layer of the stack (codegen goldens,
service fixtures, CLI walkthroughs) shares these exact models.
"""

from __future__ import annotations

from .aslt import AsltTree, create_tree
from .domains import ComponentCatalog, catalog_from_trees

PANEL_SEED = 0x10
AND2_SEED = 0x2000
MAIN_SEED = 0x300000


def build_panel_project() -> AsltTree:
    """An io project holding the device "panel" with one button and one LED."""
    tree = create_tree("io.project", id_seed=PANEL_SEED)
    tree.set_value(tree.root, "devices")
    device = tree.insert_node(tree.root, 0, "io.device", "panel")
    tree.set_meta(device, "view.x", 40)
    tree.set_meta(device, "view.y", 40)
    for index, (name, direction, addr) in enumerate(
        [("btn", "in", "GPIO1"), ("led", "out", "GPIO2")]
    ):
        pin = tree.insert_node(device, index, "io.pin", name)
        tree.set_meta(pin, "io.dir", direction)
        tree.set_meta(pin, "io.type", "bool")
        tree.set_meta(pin, "io.addr", addr)
        tree.set_meta(pin, "view.x", 40 + index * 120)
        tree.set_meta(pin, "view.y", 160)
    return tree


def build_and2_project() -> AsltTree:
    """The macro "And2": two bool in-ports through one AND into one out-port."""
    tree = create_tree("macro", id_seed=AND2_SEED)
    tree.set_value(tree.root, "And2")
    ports = {}
    for index, (name, direction) in enumerate([("x", "in"), ("y", "in"), ("out", "out")]):
        port = tree.insert_node(tree.root, index, "macro.port", name)
        tree.set_meta(port, "macro.dir", direction)
        tree.set_meta(port, "macro.type", "bool")
        tree.set_meta(port, "view.x", 40 + index * 120)
        tree.set_meta(port, "view.y", 40)
        ports[name] = port
    gate = tree.insert_node(tree.root, 3, "macro.op", "AND")
    tree.set_meta(gate, "macro.name", "and1")
    tree.set_meta(gate, "view.x", 160)
    tree.set_meta(gate, "view.y", 130)
    for index, (src, dst) in enumerate(
        [(ports["x"], f"{gate}.a"), (ports["y"], f"{gate}.b"), (f"{gate}.out", ports["out"])]
    ):
        wire = tree.insert_node(tree.root, 4 + index, "macro.wire")
        tree.set_meta(wire, "macro.from", src)
        tree.set_meta(wire, "macro.to", dst)
    return tree


def build_main_project() -> AsltTree:
    """The application "main": panel.btn drives both And2 inputs, out lights the LED."""
    tree = create_tree("task.app", id_seed=MAIN_SEED)
    tree.set_value(tree.root, "main")
    panel = tree.insert_node(tree.root, 0, "task.instance", "panel")
    tree.set_meta(panel, "task.name", "p1")
    tree.set_meta(panel, "view.x", 40)
    tree.set_meta(panel, "view.y", 40)
    gate = tree.insert_node(tree.root, 1, "task.instance", "And2")
    tree.set_meta(gate, "task.name", "a1")
    tree.set_meta(gate, "view.x", 280)
    tree.set_meta(gate, "view.y", 40)
    for index, (src, dst) in enumerate(
        [
            (f"{panel}.btn", f"{gate}.x"),
            (f"{panel}.btn", f"{gate}.y"),
            (f"{gate}.out", f"{panel}.led"),
        ]
    ):
        wire = tree.insert_node(tree.root, 2 + index, "task.wire")
        tree.set_meta(wire, "task.from", src)
        tree.set_meta(wire, "task.to", dst)
    return tree


def sample_trees() -> dict[str, AsltTree]:
    return {
        "devices": build_panel_project(),
        "And2": build_and2_project(),
        "main": build_main_project(),
    }


def sample_catalog() -> ComponentCatalog:
    return catalog_from_trees([build_panel_project(), build_and2_project()])
