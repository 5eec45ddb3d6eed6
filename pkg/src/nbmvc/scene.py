"""The headless view: scene graph, filters, layout, and incremental patches.

The scene is a deterministic image of the model tree under a profile: one
symbol per element node, one binding per relation node, positions taken from
``view.x``/``view.y`` meta (a fixed grid formula fills in for unplaced
symbols). Groups, layers and collapse state also live in model meta, so undo
moves the picture too and a full rebuild always equals incremental patching.

Filters and layer visibility are view-local state: they shape the visible
set, never the model.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterable

from .aslt import AsltTree, ChangeEvent, NodeId
from .domains import (
    Diagnostic,
    DomainProfile,
    IN_SLOTS,
    META_COLLAPSED,
    META_GROUP,
    META_LAYER,
    META_X,
    META_Y,
    OPS,
    OUT_SLOT,
    display_name,
    macro_ports,
    parse_endpoint,
    wire_meta_keys,
)
from .errors import InvalidArgument, NotFound
from .processors import mipt_set

GRID_START = (40, 40)
GRID_PITCH = (120, 90)
GRID_ROW_WIDTH = 8
DEFAULT_LAYER = "default"


@dataclass(frozen=True)
class Symbol:
    id: str  # == node id
    node: NodeId
    kind: str
    glyph: str
    label: str
    x: float
    y: float
    w: float
    h: float
    layer: str = DEFAULT_LAYER
    group: str | None = None
    collapsed: bool = False
    parent: str | None = None  # enclosing symbol, if any
    ports: tuple[tuple[str, str], ...] = ()  # (name, role): "out" drives

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "node": self.node,
            "kind": self.kind,
            "glyph": self.glyph,
            "label": self.label,
            "x": _num(self.x),
            "y": _num(self.y),
            "w": _num(self.w),
            "h": _num(self.h),
            "layer": self.layer,
            "group": self.group,
            "collapsed": self.collapsed,
            "parent": self.parent,
            "ports": [[name, role] for name, role in self.ports],
        }


@dataclass(frozen=True)
class Binding:
    id: str  # == relation node id
    node: NodeId
    from_symbol: str
    from_port: str
    to_symbol: str
    to_port: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "node": self.node,
            "from_symbol": self.from_symbol,
            "from_port": self.from_port,
            "to_symbol": self.to_symbol,
            "to_port": self.to_port,
        }


@dataclass(frozen=True)
class Layer:
    id: str
    name: str
    visible: bool = True

    def to_json(self) -> dict:
        return {"id": self.id, "name": self.name, "visible": self.visible}


@dataclass(frozen=True)
class Filter:
    """An active filter excludes its matches from the visible set."""

    id: str
    kind: str  # by-kind | by-layer | by-meta
    arg: object  # kind name, layer id, or [meta key, value]
    active: bool = True

    def to_json(self) -> dict:
        return {"id": self.id, "kind": self.kind, "arg": self.arg, "active": self.active}

    @classmethod
    def from_json(cls, doc: dict) -> "Filter":
        return cls(id=doc["id"], kind=doc["kind"], arg=doc["arg"], active=bool(doc["active"]))


@dataclass
class Scene:
    symbols: dict[str, Symbol] = field(default_factory=dict)
    bindings: dict[str, Binding] = field(default_factory=dict)
    layers: dict[str, Layer] = field(default_factory=dict)
    filters: dict[str, Filter] = field(default_factory=dict)
    visible: frozenset[str] = frozenset()
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def groups(self) -> dict[str, list[str]]:
        grouped: dict[str, list[str]] = {}
        for symbol in self.symbols.values():
            if symbol.group:
                grouped.setdefault(symbol.group, []).append(symbol.id)
        return {gid: sorted(members) for gid, members in sorted(grouped.items())}

    def copy(self) -> "Scene":
        return Scene(
            symbols=dict(self.symbols),
            bindings=dict(self.bindings),
            layers=dict(self.layers),
            filters=dict(self.filters),
            visible=self.visible,
            diagnostics=[],
        )

    def to_json(self) -> dict:
        return {
            "symbols": [self.symbols[k].to_json() for k in sorted(self.symbols)],
            "bindings": [self.bindings[k].to_json() for k in sorted(self.bindings)],
            "layers": [self.layers[k].to_json() for k in sorted(self.layers)],
            "filters": [self.filters[k].to_json() for k in sorted(self.filters)],
            "groups": [[gid, members] for gid, members in self.groups.items()],
            "visible": sorted(self.visible),
        }


def _num(value):
    # canonical number form: integral floats render as ints on every client
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def scenes_equal(a: Scene, b: Scene) -> bool:
    return a.to_json() == b.to_json()


def scene_hash(scene: Scene) -> str:
    canonical = json.dumps(scene.to_json(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ------------------------------------------------------------- construction


def grid_position(index: int) -> tuple[int, int]:
    """Cell ``index`` of the fallback grid, row-major."""
    col = index % GRID_ROW_WIDTH
    row = index // GRID_ROW_WIDTH
    return GRID_START[0] + GRID_PITCH[0] * col, GRID_START[1] + GRID_PITCH[1] * row


def _symbol_port_specs(
    tree: AsltTree, profile: DomainProfile, node_id: NodeId
) -> tuple[tuple[str, str], ...]:
    """Connection points a symbol offers: (name, role), role "out" drives."""
    node = tree.node(node_id)
    if node.kind in ("macro.port", "task.port"):
        ns = node.kind.split(".")[0]
        declared = tree.get_meta(node_id, f"{ns}.dir", "in")
        return (("p", "out" if declared == "in" else "in"),)
    if node.kind == "io.pin":
        return (("p", str(tree.get_meta(node_id, "io.dir", "in"))),)
    if node.kind == "macro.op":
        op = str(node.value)
        arity = OPS.get(op, (0, ""))[0]
        return tuple((slot, "in") for slot in IN_SLOTS[arity]) + ((OUT_SLOT, "out"),)
    if node.kind in ("macro.composite", "task.composite"):
        return tuple((spec.name, spec.dir) for spec in macro_ports(tree, node_id))
    if node.kind == "task.instance":
        component = profile.catalog.get(str(node.value)) if profile.catalog else None
        if component is not None:
            return tuple(
                (spec.name, spec.task_role(component.domain)) for spec in component.ports
            )
    return ()


def _symbol_ports(tree: AsltTree, node_id: NodeId) -> tuple[str, ...]:
    """Connection point names a symbol offers to bindings."""
    node = tree.node(node_id)
    if node.kind in ("macro.port", "task.port", "io.pin"):
        return ("p",)
    if node.kind == "macro.op":
        op = str(node.value)
        arity = OPS.get(op, (0, ""))[0]
        return tuple(IN_SLOTS[arity]) + (OUT_SLOT,)
    if node.kind in ("macro.composite", "task.composite"):
        return tuple(spec.name for spec in macro_ports(tree, node_id))
    return ()


def _glyph_for(tree: AsltTree, profile: DomainProfile, node_id: NodeId, diagnostics) -> str:
    node = tree.node(node_id)
    fallback = None
    for entry in profile.palette:
        if entry.kind != node.kind:
            continue
        if entry.value_source[0] == "const" and entry.value_source[1] == node.value:
            return entry.glyph
        if fallback is None:
            fallback = entry.glyph
    if fallback is not None:
        return fallback
    if node.kind in profile.symbol_kinds:
        return node.kind.rsplit(".", 1)[-1]
    diagnostics.append(
        Diagnostic("warning", node_id, "unknown-kind", f"no glyph for kind {node.kind!r}")
    )
    return "unknown"


def construct_scene(
    tree: AsltTree,
    profile: DomainProfile,
    *,
    filters: dict[str, Filter] | None = None,
    layer_visibility: dict[str, bool] | None = None,
) -> Scene:
    """Deterministically derive the scene; view-local state is carried over."""
    scene = Scene(filters=dict(filters or {}))
    placed: list[tuple[NodeId, dict]] = []
    unplaced: list[NodeId] = []
    symbol_parent: dict[str, str | None] = {}
    relation_nodes: list[NodeId] = []

    for node in tree.walk():
        if node.id == tree.root:
            continue
        if node.kind in profile.relation_kinds:
            relation_nodes.append(node.id)
            continue
        cursor = node.parent
        parent_symbol = None
        while cursor is not None and cursor != tree.root:
            if tree.node(cursor).kind not in profile.relation_kinds:
                parent_symbol = cursor
                break
            cursor = tree.node(cursor).parent
        symbol_parent[node.id] = parent_symbol
        x = tree.get_meta(node.id, META_X)
        y = tree.get_meta(node.id, META_Y)
        if isinstance(x, (int, float)) and isinstance(y, (int, float)):
            placed.append((node.id, {"x": float(x), "y": float(y)}))
        else:
            unplaced.append(node.id)

    unplaced.sort(key=lambda nid: (tree.node(nid).kind, nid))
    grid = {nid: grid_position(i) for i, nid in enumerate(unplaced)}

    for node_id in [nid for nid, _ in placed] + unplaced:
        node = tree.node(node_id)
        glyph = _glyph_for(tree, profile, node_id, scene.diagnostics)
        w, h = profile.glyph_size(glyph)
        if node_id in grid:
            x, y = float(grid[node_id][0]), float(grid[node_id][1])
        else:
            x = float(tree.get_meta(node_id, META_X))
            y = float(tree.get_meta(node_id, META_Y))
        layer = tree.get_meta(node_id, META_LAYER)
        group = tree.get_meta(node_id, META_GROUP)
        scene.symbols[node_id] = Symbol(
            id=node_id,
            node=node_id,
            kind=node.kind,
            glyph=glyph,
            label=display_name(tree, node_id),
            x=x,
            y=y,
            w=float(w),
            h=float(h),
            layer=str(layer) if isinstance(layer, str) and layer else DEFAULT_LAYER,
            group=str(group) if isinstance(group, str) and group else None,
            collapsed=bool(tree.get_meta(node_id, META_COLLAPSED, False)),
            parent=symbol_parent[node_id],
            ports=_symbol_port_specs(tree, profile, node_id),
        )

    for node_id in relation_nodes:
        kind = tree.node(node_id).kind
        from_key, to_key = wire_meta_keys(kind)
        try:
            src = parse_endpoint(tree.get_meta(node_id, from_key))
            dst = parse_endpoint(tree.get_meta(node_id, to_key))
        except InvalidArgument:
            scene.diagnostics.append(
                Diagnostic("warning", node_id, "dangling-binding", "relation without endpoints")
            )
            continue
        if src.node not in scene.symbols or dst.node not in scene.symbols:
            scene.diagnostics.append(
                Diagnostic("warning", node_id, "dangling-binding", "relation endpoint missing")
            )
            continue
        scene.bindings[node_id] = Binding(
            id=node_id,
            node=node_id,
            from_symbol=src.node,
            from_port=src.slot or _default_port(tree, src.node),
            to_symbol=dst.node,
            to_port=dst.slot or _default_port(tree, dst.node),
        )

    layer_visibility = dict(layer_visibility or {})
    names = {DEFAULT_LAYER} | {s.layer for s in scene.symbols.values()}
    scene.layers = {
        name: Layer(id=name, name=name, visible=layer_visibility.get(name, True))
        for name in sorted(names)
    }
    recompute_visible(scene, tree)
    return scene


def _default_port(tree: AsltTree, node_id: NodeId) -> str:
    ports = _symbol_ports(tree, node_id)
    return ports[0] if ports else "p"


def recompute_visible(scene: Scene, tree: AsltTree | None = None) -> frozenset[str]:
    """Visible = symbols minus hidden layers, collapsed interiors, filter hits."""
    hidden: set[str] = set()
    for symbol in scene.symbols.values():
        layer = scene.layers.get(symbol.layer)
        if layer is not None and not layer.visible:
            hidden.add(symbol.id)
            continue
        cursor = symbol.parent
        while cursor is not None:
            parent = scene.symbols.get(cursor)
            if parent is None:
                break
            if parent.collapsed:
                hidden.add(symbol.id)
                break
            cursor = parent.parent
    for flt in scene.filters.values():
        if not flt.active:
            continue
        for symbol in scene.symbols.values():
            if _filter_matches(flt, symbol, tree):
                hidden.add(symbol.id)
    scene.visible = frozenset(set(scene.symbols) - hidden)
    return scene.visible


def _filter_matches(flt: Filter, symbol: Symbol, tree: AsltTree | None) -> bool:
    if flt.kind == "by-kind":
        return symbol.kind == flt.arg
    if flt.kind == "by-layer":
        return symbol.layer == flt.arg
    if flt.kind == "by-meta":
        if tree is None or symbol.node not in tree.nodes:
            return False
        key, expected = flt.arg
        return tree.get_meta(symbol.node, str(key)) == expected
    return False


# ------------------------------------------------------------------ patches


@dataclass(frozen=True)
class ViewPatch:
    """Ordered deltas turning one scene into the next."""

    deltas: tuple = ()

    def to_json(self) -> list:
        return [dict(d) for d in self.deltas]

    def __len__(self) -> int:
        return len(self.deltas)


def diff_scenes(old: Scene, new: Scene) -> ViewPatch:
    deltas: list[dict] = []
    removed_bindings = sorted(
        bid
        for bid in old.bindings
        if bid not in new.bindings or new.bindings[bid] != old.bindings[bid]
    )
    for bid in removed_bindings:
        deltas.append({"op": "remove_binding", "id": bid})

    replaced: set[str] = set()
    for sid in sorted(old.symbols):
        if sid not in new.symbols:
            deltas.append({"op": "remove_symbol", "id": sid})
            continue
        before, after = old.symbols[sid], new.symbols[sid]
        if before == after:
            continue
        moved = replace(before, x=after.x, y=after.y)
        relabeled = replace(moved, label=after.label)
        if relabeled != after:  # structural change: replace wholesale
            replaced.add(sid)
            deltas.append({"op": "remove_symbol", "id": sid})

    for sid in sorted(new.symbols):
        if sid not in old.symbols or sid in replaced:
            deltas.append({"op": "add_symbol", "symbol": new.symbols[sid].to_json()})

    for bid in sorted(new.bindings):
        if bid in removed_bindings or bid not in old.bindings:
            deltas.append({"op": "add_binding", "binding": new.bindings[bid].to_json()})

    for sid in sorted(new.symbols):
        if sid not in old.symbols or sid in replaced:
            continue
        before, after = old.symbols[sid], new.symbols[sid]
        if (before.x, before.y) != (after.x, after.y):
            deltas.append({"op": "move_symbol", "id": sid, "x": _num(after.x), "y": _num(after.y)})
        if before.label != after.label:
            deltas.append({"op": "relabel", "id": sid, "label": after.label})

    state_changed = (
        old.visible != new.visible
        or old.layers != new.layers
        or old.filters != new.filters
    )
    if state_changed:
        deltas.append(
            {
                "op": "visibility",
                "visible": sorted(new.visible),
                "layers": [new.layers[k].to_json() for k in sorted(new.layers)],
                "filters": [new.filters[k].to_json() for k in sorted(new.filters)],
            }
        )
    return ViewPatch(tuple(deltas))


def apply_patch(scene: Scene, patch: ViewPatch) -> Scene:
    """Mirror-side application; returns a new scene."""
    out = scene.copy()
    for delta in patch.deltas:
        op = delta["op"]
        if op == "remove_binding":
            out.bindings.pop(delta["id"], None)
        elif op == "remove_symbol":
            out.symbols.pop(delta["id"], None)
        elif op == "add_symbol":
            doc = delta["symbol"]
            out.symbols[doc["id"]] = Symbol(
                id=doc["id"], node=doc["node"], kind=doc["kind"], glyph=doc["glyph"],
                label=doc["label"], x=float(doc["x"]), y=float(doc["y"]),
                w=float(doc["w"]), h=float(doc["h"]), layer=doc["layer"],
                group=doc["group"], collapsed=doc["collapsed"], parent=doc["parent"],
                ports=tuple((name, role) for name, role in doc.get("ports", [])),
            )
        elif op == "add_binding":
            doc = delta["binding"]
            out.bindings[doc["id"]] = Binding(
                id=doc["id"], node=doc["node"],
                from_symbol=doc["from_symbol"], from_port=doc["from_port"],
                to_symbol=doc["to_symbol"], to_port=doc["to_port"],
            )
        elif op == "move_symbol":
            symbol = out.symbols[delta["id"]]
            out.symbols[delta["id"]] = replace(symbol, x=float(delta["x"]), y=float(delta["y"]))
        elif op == "relabel":
            symbol = out.symbols[delta["id"]]
            out.symbols[delta["id"]] = replace(symbol, label=delta["label"])
        elif op == "visibility":
            out.visible = frozenset(delta["visible"])
            out.layers = {
                doc["id"]: Layer(doc["id"], doc["name"], doc["visible"])
                for doc in delta["layers"]
            }
            out.filters = {doc["id"]: Filter.from_json(doc) for doc in delta["filters"]}
        else:
            raise InvalidArgument(f"unknown patch op {op!r}")
    return out


def apply_change_to_scene(
    scene: Scene,
    events: Iterable[ChangeEvent],
    tree: AsltTree,
    profile: DomainProfile,
) -> ViewPatch:
    """Patch bringing ``scene`` to the view of the tree's current state.

    The event suffix is advisory: an empty suffix means no change, anything
    else (including a sequence gap) falls back to a rebuild-and-diff, which
    satisfies the same contract.
    """
    events = list(events)
    if not events:
        return ViewPatch(())
    rebuilt = construct_scene(
        tree,
        profile,
        filters=scene.filters,
        layer_visibility={layer.id: layer.visible for layer in scene.layers.values()},
    )
    return diff_scenes(scene, rebuilt)


# ------------------------------------------------------------------- layout


def layout(tree: AsltTree, scene: Scene, policy: str = "grid") -> dict[NodeId, tuple[int, int]]:
    """Persist grid positions for unplaced symbols; placed ones are untouched."""
    if policy != "grid":
        raise InvalidArgument(f"unknown layout policy {policy!r}")
    unplaced = sorted(
        (
            sid
            for sid, symbol in scene.symbols.items()
            if not isinstance(tree.get_meta(symbol.node, META_X), (int, float))
            or not isinstance(tree.get_meta(symbol.node, META_Y), (int, float))
        ),
        key=lambda sid: (scene.symbols[sid].kind, sid),
    )
    placements: dict[NodeId, tuple[int, int]] = {}
    for index, sid in enumerate(unplaced):
        x, y = grid_position(index)
        node = scene.symbols[sid].node
        mipt_set(tree, node, "view", "x", x)
        mipt_set(tree, node, "view", "y", y)
        placements[node] = (x, y)
    return placements


# ----------------------------------------------------------- direct view ops


def toggle_filter(scene: Scene, flt: Filter, tree: AsltTree | None = None) -> frozenset[str]:
    scene.filters[flt.id] = flt
    return recompute_visible(scene, tree)


def set_layer(tree: AsltTree, scene: Scene, symbol_id: str, layer_id: str) -> None:
    if symbol_id not in scene.symbols:
        raise NotFound(f"no symbol {symbol_id!r}")
    symbol = scene.symbols[symbol_id]
    mipt_set(tree, symbol.node, "view", "layer", layer_id)
    scene.symbols[symbol_id] = replace(symbol, layer=layer_id)
    if layer_id not in scene.layers:
        scene.layers[layer_id] = Layer(id=layer_id, name=layer_id, visible=True)
    recompute_visible(scene, tree)


def set_layer_visible(scene: Scene, layer_id: str, visible: bool, tree: AsltTree | None = None) -> None:
    layer = scene.layers.get(layer_id)
    if layer is None:
        raise NotFound(f"no layer {layer_id!r}")
    scene.layers[layer_id] = replace(layer, visible=visible)
    recompute_visible(scene, tree)


def group_symbols(tree: AsltTree, scene: Scene, symbol_ids: list[str]) -> str:
    if not symbol_ids:
        raise InvalidArgument("a group needs at least one symbol")
    for sid in symbol_ids:
        if sid not in scene.symbols:
            raise NotFound(f"no symbol {sid!r}")
    gid = next_group_id(scene)
    for sid in sorted(set(symbol_ids)):
        symbol = scene.symbols[sid]
        mipt_set(tree, symbol.node, "view", "group", gid)
        scene.symbols[sid] = replace(symbol, group=gid)
    return gid


def next_group_id(scene: Scene) -> str:
    taken = set(scene.groups)
    n = 1
    while f"g{n}" in taken:
        n += 1
    return f"g{n}"
