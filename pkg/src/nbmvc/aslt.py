"""The annotated model tree (ASLT): the data-model third of the workbench.

A tree of kind-tagged nodes, each carrying an optional scalar value and a
namespaced metadata map. Every successful mutation bumps the tree version by
exactly one and emits a single :class:`ChangeEvent` whose ``before``/``after``
fragments are rich enough to invert the mutation and to replay it on another
tree. That makes the event stream a complete event-sourcing log: undo, redo
and crash recovery are all replays.

Persistence uses the ``.nbm`` document format, UTF-8 JSON with schema tag
``nbmvc/1``; see :meth:`AsltTree.serialize`.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterator, Union

from .errors import (
    InvalidArgument,
    NotFound,
    CycleError,
    SequenceGap,
    UnsupportedVersion,
    ParseError,
)

log = logging.getLogger(__name__)

NodeId = str  # 32 lowercase hex chars, unique within a tree

Scalar = Union[None, bool, int, float, str]
MetaValue = Union[bool, int, float, str, list]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_ID_RE = re.compile(r"^[0-9a-f]{32}$")
_META_KEY_RE = re.compile(r"^[^.\s]+\.[^\s]+$")
_PATH_SEGMENT_RE = re.compile(r"^(\*|[A-Za-z0-9_.\-]+?)(?:\[(\d+)\])?$")

SCHEMA = "nbmvc/1"


def is_node_id(text: str) -> bool:
    return isinstance(text, str) and bool(_ID_RE.match(text))


def check_scalar(value: Scalar, *, allow_none: bool = True) -> Scalar:
    """Validate a scalar value; returns it unchanged."""
    if value is None:
        if not allow_none:
            raise InvalidArgument("value must not be none")
        return value
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        if not INT64_MIN <= value <= INT64_MAX:
            raise InvalidArgument("int value out of 64-bit range", value=value)
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidArgument("float value must be finite", value=value)
        return value
    if isinstance(value, str):
        return value
    raise InvalidArgument(f"unsupported scalar type {type(value).__name__}")


def check_meta_value(value: MetaValue) -> MetaValue:
    """Validate a meta value: a non-none scalar or a homogeneous scalar list."""
    if isinstance(value, list):
        if not value:
            raise InvalidArgument("meta value lists must not be empty")
        first_type = type(value[0])
        for item in value:
            check_scalar(item, allow_none=False)
            if type(item) is not first_type:
                raise InvalidArgument("meta value lists must be homogeneous")
        return value
    return check_scalar(value, allow_none=False)


def check_meta_key(key: str) -> str:
    if not isinstance(key, str) or not _META_KEY_RE.match(key):
        raise InvalidArgument("meta keys must have the form 'ns.key'", key=key)
    return key


def scalar_tag(value: Scalar) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    return "text"


def encode_value(value: Union[Scalar, MetaValue]) -> dict:
    """Encode a scalar or meta value as a ``{"t":..., "v":...}`` document."""
    if isinstance(value, list):
        return {"t": f"list:{scalar_tag(value[0])}", "v": list(value)}
    return {"t": scalar_tag(value), "v": value}


def decode_value(doc: Any) -> Union[Scalar, MetaValue]:
    if not isinstance(doc, dict) or "t" not in doc or "v" not in doc:
        raise ParseError("malformed value document", doc=doc)
    tag, raw = doc["t"], doc["v"]
    if isinstance(tag, str) and tag.startswith("list:"):
        if not isinstance(raw, list):
            raise ParseError("list value document without a list payload")
        return check_meta_value([_decode_scalar(tag[5:], item) for item in raw])
    return _decode_scalar(tag, raw)


def _decode_scalar(tag: str, raw: Any) -> Scalar:
    try:
        if tag == "none":
            if raw is not None:
                raise ParseError("none value carries a payload")
            return None
        if tag == "bool":
            if not isinstance(raw, bool):
                raise ParseError("bool value document without a bool payload")
            return raw
        if tag == "int":
            if isinstance(raw, bool) or not isinstance(raw, int):
                raise ParseError("int value document without an int payload")
            return check_scalar(raw)
        if tag == "float":
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise ParseError("float value document without a number payload")
            return check_scalar(float(raw))
        if tag == "text":
            if not isinstance(raw, str):
                raise ParseError("text value document without a text payload")
            return raw
    except InvalidArgument as exc:
        raise ParseError(str(exc)) from exc
    raise ParseError(f"unknown value tag {tag!r}")


class ChangeKind(Enum):
    NODE_INSERTED = "NodeInserted"
    NODE_REMOVED = "NodeRemoved"
    NODE_MOVED = "NodeMoved"
    VALUE_CHANGED = "ValueChanged"
    META_CHANGED = "MetaChanged"


@dataclass(frozen=True)
class ChangeEvent:
    """One committed mutation.

    ``seq`` equals the tree version right after the mutation. ``before`` and
    ``after`` are JSON-shaped fragments carrying everything needed to invert
    the mutation or replay it elsewhere. A ``seq`` of 0 marks a template that
    has not been applied yet (see :func:`inverse_of`).
    """

    seq: int
    kind: ChangeKind
    node: NodeId
    before: dict | None
    after: dict | None

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "kind": self.kind.value,
            "node": self.node,
            "before": self.before,
            "after": self.after,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ChangeEvent":
        try:
            return cls(
                seq=int(doc["seq"]),
                kind=ChangeKind(doc["kind"]),
                node=doc["node"],
                before=doc["before"],
                after=doc["after"],
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"malformed change event: {exc}") from exc

    def template(self) -> "ChangeEvent":
        """The same mutation with the sequence number stripped."""
        if self.seq == 0:
            return self
        return ChangeEvent(0, self.kind, self.node, self.before, self.after)


@dataclass
class AsltNode:
    id: NodeId
    kind: str
    parent: NodeId | None
    children: list[NodeId] = field(default_factory=list)
    value: Scalar = None
    meta: dict[str, MetaValue] = field(default_factory=dict)

    def copy(self) -> "AsltNode":
        return AsltNode(
            id=self.id,
            kind=self.kind,
            parent=self.parent,
            children=list(self.children),
            value=self.value,
            meta={k: (list(v) if isinstance(v, list) else v) for k, v in self.meta.items()},
        )

    def record(self, index: int) -> dict:
        """The node as a ``.nbm`` document fragment."""
        return {
            "id": self.id,
            "kind": self.kind,
            "parent": self.parent,
            "index": index,
            "value": encode_value(self.value),
            "meta": {k: encode_value(self.meta[k]) for k in sorted(self.meta)},
        }


Listener = Callable[[ChangeEvent], None]


class AsltTree:
    """A versioned, annotatable model tree with one change event per mutation.

    Node ids are minted from a seeded counter so that two sessions replaying
    the same mutations from the same seed produce identical trees. A tree is
    owned by a single logical thread of control; listeners run synchronously
    on the mutating thread, after the mutation has committed.
    """

    def __init__(self, root_kind: str, *, domain: str | None = None, id_seed: int = 0):
        if not root_kind or not isinstance(root_kind, str):
            raise InvalidArgument("root kind must be a non-empty string")
        self.id_seed = id_seed & ((1 << 128) - 1)
        self._id_counter = 0
        self.nodes: dict[NodeId, AsltNode] = {}
        self.version = 0
        self.domain = domain or infer_domain(root_kind)
        self.last_event: ChangeEvent | None = None
        self.listener_failures: list[tuple[int, Exception]] = []
        self._listeners: dict[int, Listener] = {}
        self._listener_counter = 0
        self.root = self._mint_id()
        self.nodes[self.root] = AsltNode(id=self.root, kind=root_kind, parent=None)

    # ------------------------------------------------------------------ ids

    def _mint_id(self) -> NodeId:
        while True:
            candidate = format((self.id_seed + self._id_counter) & ((1 << 128) - 1), "032x")
            self._id_counter += 1
            if candidate not in self.nodes:
                return candidate

    # ------------------------------------------------------------- accessors

    def node(self, node_id: NodeId) -> AsltNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NotFound(f"no node {node_id!r} in tree") from None

    def walk(self, start: NodeId | None = None) -> Iterator[AsltNode]:
        """Yield nodes in document order (pre-order, child order significant)."""
        stack = [start or self.root]
        while stack:
            node = self.node(stack.pop())
            yield node
            stack.extend(reversed(node.children))

    def child_index(self, node_id: NodeId) -> int:
        node = self.node(node_id)
        if node.parent is None:
            return 0
        return self.node(node.parent).children.index(node_id)

    def is_ancestor(self, maybe_ancestor: NodeId, node_id: NodeId) -> bool:
        cursor = self.node(node_id).parent
        while cursor is not None:
            if cursor == maybe_ancestor:
                return True
            cursor = self.node(cursor).parent
        return False

    def __len__(self) -> int:
        return len(self.nodes)

    # ------------------------------------------------------------- mutations

    def insert_node(
        self, parent: NodeId, index: int, kind: str, value: Scalar = None
    ) -> NodeId:
        """Insert a fresh node under ``parent`` at ``index``; returns its id."""
        node_id = self._mint_id()
        self._insert(parent, index, kind, value, node_id)
        return node_id

    def _insert(self, parent: NodeId, index: int, kind: str, value: Scalar, node_id: NodeId) -> None:
        if not kind or not isinstance(kind, str):
            raise InvalidArgument("node kind must be a non-empty string")
        parent_node = self.node(parent)
        if not isinstance(index, int) or isinstance(index, bool) or not 0 <= index <= len(parent_node.children):
            raise InvalidArgument(
                "insert index out of range", index=index, size=len(parent_node.children)
            )
        check_scalar(value)
        if node_id in self.nodes:
            raise InvalidArgument("node id already present", node=node_id)
        event = ChangeEvent(
            seq=self.version + 1,
            kind=ChangeKind.NODE_INSERTED,
            node=node_id,
            before=None,
            after={"parent": parent, "index": index, "kind": kind, "value": encode_value(value)},
        )
        self.nodes[node_id] = AsltNode(id=node_id, kind=kind, parent=parent, value=value)
        parent_node.children.insert(index, node_id)
        self._commit(event)

    def remove_subtree(self, node_id: NodeId) -> int:
        """Remove ``node_id`` and its descendants; returns the node count."""
        node = self.node(node_id)
        if node.parent is None:
            raise InvalidArgument("the root cannot be removed")
        records = self._subtree_records(node_id)
        event = ChangeEvent(
            seq=self.version + 1,
            kind=ChangeKind.NODE_REMOVED,
            node=node_id,
            before={
                "parent": node.parent,
                "index": self.child_index(node_id),
                "nodes": records,
            },
            after=None,
        )
        self.node(node.parent).children.remove(node_id)
        for record in records:
            del self.nodes[record["id"]]
        self._commit(event)
        return len(records)

    def _subtree_records(self, node_id: NodeId) -> list[dict]:
        records = []
        for node in self.walk(node_id):
            index = self.child_index(node.id)
            records.append(node.record(index))
        return records

    def move_node(self, node_id: NodeId, new_parent: NodeId, index: int) -> None:
        """Reparent ``node_id`` to ``new_parent`` at ``index``.

        The index is interpreted after the node has been detached, so moving a
        node to its current position is a recorded no-op mutation.
        """
        node = self.node(node_id)
        target = self.node(new_parent)
        if node.parent is None:
            raise InvalidArgument("the root cannot be moved")
        if node_id == new_parent or self.is_ancestor(node_id, new_parent):
            raise CycleError("cannot move a node into its own subtree")
        old_parent, old_index = node.parent, self.child_index(node_id)
        size = len(target.children) - (1 if old_parent == new_parent else 0)
        if not isinstance(index, int) or isinstance(index, bool) or not 0 <= index <= size:
            raise InvalidArgument("move index out of range", index=index, size=size)
        event = ChangeEvent(
            seq=self.version + 1,
            kind=ChangeKind.NODE_MOVED,
            node=node_id,
            before={"parent": old_parent, "index": old_index},
            after={"parent": new_parent, "index": index},
        )
        self.node(old_parent).children.remove(node_id)
        target.children.insert(index, node_id)
        node.parent = new_parent
        self._commit(event)

    def set_value(self, node_id: NodeId, value: Scalar) -> None:
        node = self.node(node_id)
        check_scalar(value)
        event = ChangeEvent(
            seq=self.version + 1,
            kind=ChangeKind.VALUE_CHANGED,
            node=node_id,
            before={"value": encode_value(node.value)},
            after={"value": encode_value(value)},
        )
        node.value = value
        self._commit(event)

    def set_meta(self, node_id: NodeId, key: str, value: MetaValue) -> None:
        node = self.node(node_id)
        check_meta_key(key)
        check_meta_value(value)
        old = node.meta.get(key)
        event = ChangeEvent(
            seq=self.version + 1,
            kind=ChangeKind.META_CHANGED,
            node=node_id,
            before={"key": key, "value": encode_value(old) if key in node.meta else None},
            after={"key": key, "value": encode_value(value)},
        )
        node.meta[key] = list(value) if isinstance(value, list) else value
        self._commit(event)

    def remove_meta(self, node_id: NodeId, key: str) -> None:
        node = self.node(node_id)
        check_meta_key(key)
        if key not in node.meta:
            raise NotFound(f"no meta key {key!r} on node", node=node_id)
        event = ChangeEvent(
            seq=self.version + 1,
            kind=ChangeKind.META_CHANGED,
            node=node_id,
            before={"key": key, "value": encode_value(node.meta[key])},
            after={"key": key, "value": None},
        )
        del node.meta[key]
        self._commit(event)

    def get_meta(self, node_id: NodeId, key: str, default: MetaValue | None = None):
        return self.node(node_id).meta.get(key, default)

    # ------------------------------------------------------------- listeners

    def subscribe(self, listener: Listener) -> int:
        self._listener_counter += 1
        self._listeners[self._listener_counter] = listener
        return self._listener_counter

    def unsubscribe(self, subscription: int) -> None:
        self._listeners.pop(subscription, None)

    def _commit(self, event: ChangeEvent) -> None:
        self.version = event.seq
        self.last_event = event
        self._notify(event)

    def _notify(self, event: ChangeEvent) -> None:
        # A throwing listener never rolls back the mutation; failures are
        # collected out-of-band.
        for sub_id, listener in list(self._listeners.items()):
            try:
                listener(event)
            except Exception as exc:  # noqa: BLE001 - deliberate isolation
                self.listener_failures.append((sub_id, exc))
                log.warning("listener %d failed for event %d: %s", sub_id, event.seq, exc)

    # ----------------------------------------------------------------- query

    def query(self, path: str) -> list[NodeId]:
        """Resolve a ``/kind/kind[i]`` path to node ids in document order.

        Each segment selects matching children of the previous result set;
        ``*`` matches any kind and ``[i]`` picks the i-th match per parent.
        ``/`` alone addresses the root.
        """
        if not isinstance(path, str) or not path.startswith("/"):
            raise InvalidArgument("paths must start with '/'", path=path)
        if path == "/":
            return [self.root]
        segments = []
        for raw in path[1:].split("/"):
            match = _PATH_SEGMENT_RE.match(raw)
            if not match:
                raise InvalidArgument("malformed path segment", segment=raw, path=path)
            segments.append((match.group(1), int(match.group(2)) if match.group(2) else None))
        current = [self.root]
        for kind, pick in segments:
            found: list[NodeId] = []
            for node_id in current:
                matches = [
                    child
                    for child in self.node(node_id).children
                    if kind == "*" or self.node(child).kind == kind
                ]
                if pick is None:
                    found.extend(matches)
                elif pick < len(matches):
                    found.append(matches[pick])
            seen: set[NodeId] = set()
            current = [n for n in found if not (n in seen or seen.add(n))]
        order = {node.id: i for i, node in enumerate(self.walk())}
        return sorted(current, key=order.__getitem__)

    # ------------------------------------------------------------ replay api

    def apply_change(self, event: ChangeEvent) -> None:
        """Replay a recorded event; its seq must be exactly version + 1."""
        if event.seq != self.version + 1:
            raise SequenceGap(
                "event does not continue this tree", expected=self.version + 1, got=event.seq
            )
        self.apply_template(event, strict=True)

    def apply_template(self, event: ChangeEvent, *, strict: bool = False) -> ChangeEvent:
        """Perform the mutation an event describes; returns the committed event.

        With ``strict`` the current state must match the event's ``before``
        fragment, otherwise the event is rejected as inconsistent.
        """
        kind = event.kind
        if kind is ChangeKind.NODE_INSERTED:
            after = event.after or {}
            self._insert(
                after["parent"],
                after["index"],
                after["kind"],
                decode_value(after["value"]),
                event.node,
            )
        elif kind is ChangeKind.NODE_REMOVED:
            if strict:
                recorded = (event.before or {}).get("nodes", [])
                current = self._subtree_records(event.node) if event.node in self.nodes else None
                if current != recorded:
                    raise InvalidArgument("removal event inconsistent with current state")
            self.remove_subtree(event.node)
        elif kind is ChangeKind.NODE_MOVED:
            after = event.after or {}
            if strict:
                before = event.before or {}
                node = self.node(event.node)
                if node.parent != before.get("parent") or self.child_index(event.node) != before.get("index"):
                    raise InvalidArgument("move event inconsistent with current state")
            self.move_node(event.node, after["parent"], after["index"])
        elif kind is ChangeKind.VALUE_CHANGED:
            after = event.after or {}
            if strict:
                node = self.node(event.node)
                if encode_value(node.value) != (event.before or {}).get("value"):
                    raise InvalidArgument("value event inconsistent with current state")
            self.set_value(event.node, decode_value(after["value"]))
        elif kind is ChangeKind.META_CHANGED:
            after = event.after or {}
            key = after["key"]
            if strict:
                node = self.node(event.node)
                recorded = (event.before or {}).get("value")
                current = encode_value(node.meta[key]) if key in node.meta else None
                if current != recorded:
                    raise InvalidArgument("meta event inconsistent with current state")
            if after["value"] is None:
                self.remove_meta(event.node, key)
            else:
                self.set_meta(event.node, key, decode_value(after["value"]))
        else:  # pragma: no cover - enum is closed
            raise InvalidArgument(f"unknown event kind {kind!r}")
        assert self.last_event is not None
        return self.last_event

    # ----------------------------------------------------------------- copy

    def clone(self) -> "AsltTree":
        """A structural copy sharing nothing; listeners are not cloned."""
        twin = AsltTree.__new__(AsltTree)
        twin.id_seed = self.id_seed
        twin._id_counter = self._id_counter
        twin.nodes = {nid: node.copy() for nid, node in self.nodes.items()}
        twin.version = self.version
        twin.domain = self.domain
        twin.root = self.root
        twin.last_event = self.last_event
        twin.listener_failures = []
        twin._listeners = {}
        twin._listener_counter = 0
        return twin

    def graft(self, donor: "AsltTree") -> None:
        """Adopt the donor's state in place, keeping this tree's listeners."""
        if donor.root != self.root:
            raise InvalidArgument("can only graft a tree with the same root")
        self.nodes = donor.nodes
        self.version = donor.version
        self._id_counter = donor._id_counter
        self.last_event = donor.last_event

    # ------------------------------------------------------------- integrity

    def check_shape(self) -> None:
        """Assert structural invariants; used by tests and replay auditing."""
        seen: set[NodeId] = set()
        stack = [self.root]
        while stack:
            node_id = stack.pop()
            if node_id in seen:
                raise CycleError("node reachable twice", node=node_id)
            seen.add(node_id)
            node = self.nodes[node_id]
            for child in node.children:
                child_node = self.nodes.get(child)
                if child_node is None or child_node.parent != node_id:
                    raise InvalidArgument("parent/child links inconsistent", node=child)
            stack.extend(node.children)
        if seen != set(self.nodes):
            raise InvalidArgument("nodes table contains unreachable nodes")
        if self.nodes[self.root].parent is not None:
            raise InvalidArgument("root must not have a parent")

    # --------------------------------------------------------- serialization

    def serialize(self) -> bytes:
        """Encode the tree as a ``.nbm`` document (UTF-8 JSON bytes)."""
        nodes = [node.record(self.child_index(node.id)) for node in self.walk()]
        doc = {
            "schema": SCHEMA,
            "domain": self.domain,
            "root": self.root,
            "version": self.version,
            "nodes": nodes,
        }
        return json.dumps(doc, ensure_ascii=False, separators=(",", ":")).encode("utf-8")

    @classmethod
    def deserialize(cls, data: bytes | str, *, id_seed: int = 0) -> "AsltTree":
        try:
            doc = json.loads(data)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ParseError(f"not a valid .nbm document: {exc}") from exc
        if not isinstance(doc, dict):
            raise ParseError("top-level .nbm document must be an object")
        if doc.get("schema") != SCHEMA:
            raise UnsupportedVersion(
                "unknown schema version", schema=doc.get("schema"), supported=SCHEMA
            )
        for key in ("domain", "root", "version", "nodes"):
            if key not in doc:
                raise ParseError(f"missing field {key!r}")
        if not isinstance(doc["nodes"], list) or not doc["nodes"]:
            raise ParseError("nodes must be a non-empty list")

        tree = cls.__new__(cls)
        tree.id_seed = id_seed & ((1 << 128) - 1)
        tree.nodes = {}
        tree.domain = doc["domain"]
        tree.last_event = None
        tree.listener_failures = []
        tree._listeners = {}
        tree._listener_counter = 0
        if not isinstance(doc["version"], int) or doc["version"] < 0:
            raise ParseError("version must be a non-negative integer")
        tree.version = doc["version"]
        tree.root = doc["root"]

        by_parent: dict[NodeId | None, list[tuple[int, dict]]] = {}
        for record in doc["nodes"]:
            try:
                node_id, kind = record["id"], record["kind"]
                parent, index = record["parent"], record["index"]
                value = decode_value(record["value"])
                meta = {key: decode_value(val) for key, val in record["meta"].items()}
            except (KeyError, TypeError) as exc:
                raise ParseError(f"malformed node record: {exc}") from exc
            if not is_node_id(node_id):
                raise ParseError("node ids must be 32 lowercase hex chars", id=node_id)
            if node_id in tree.nodes:
                raise ParseError("duplicate node id", id=node_id)
            for key in meta:
                try:
                    check_meta_key(key)
                except InvalidArgument as exc:
                    raise ParseError(str(exc)) from exc
            tree.nodes[node_id] = AsltNode(
                id=node_id, kind=kind, parent=parent, value=value, meta=meta
            )
            by_parent.setdefault(parent, []).append((index, record["id"]))

        roots = by_parent.get(None, [])
        if len(roots) != 1 or roots[0][1] != tree.root:
            raise ParseError("document must contain exactly the declared root")
        for parent, entries in by_parent.items():
            if parent is None:
                continue
            if parent not in tree.nodes:
                raise ParseError("node references unknown parent", parent=parent)
            entries.sort()
            if [i for i, _ in entries] != list(range(len(entries))):
                raise ParseError("child indices must be gap-free", parent=parent)
            tree.nodes[parent].children = [node_id for _, node_id in entries]
        tree._id_counter = (
            max(int(node_id, 16) - tree.id_seed for node_id in tree.nodes) + 1
        ) & ((1 << 128) - 1)
        if tree._id_counter < 0:
            tree._id_counter = len(tree.nodes)
        tree.check_shape()
        return tree


def create_tree(root_kind: str, *, domain: str | None = None, id_seed: int = 0) -> AsltTree:
    """Create a tree holding a single root node of the given kind."""
    return AsltTree(root_kind, domain=domain, id_seed=id_seed)


def infer_domain(root_kind: str) -> str:
    return {"io.project": "io", "macro": "macro", "task.app": "task"}.get(root_kind, "custom")


def inverse_of(event: ChangeEvent) -> list[ChangeEvent]:
    """Event templates that undo ``event``, in application order.

    Removing a subtree inverts into one bare insertion per removed node plus
    one meta template per key, so the inverse stream stays inside the normal
    event vocabulary and replays faithfully.
    """
    kind = event.kind
    if kind is ChangeKind.NODE_INSERTED:
        after = event.after or {}
        record = {
            "id": event.node,
            "kind": after["kind"],
            "parent": after["parent"],
            "index": after["index"],
            "value": after["value"],
            "meta": {},
        }
        return [
            ChangeEvent(
                0,
                ChangeKind.NODE_REMOVED,
                event.node,
                before={"parent": after["parent"], "index": after["index"], "nodes": [record]},
                after=None,
            )
        ]
    if kind is ChangeKind.NODE_REMOVED:
        templates = []
        records = (event.before or {}).get("nodes", [])
        for record in records:
            templates.append(
                ChangeEvent(
                    0,
                    ChangeKind.NODE_INSERTED,
                    record["id"],
                    before=None,
                    after={
                        "parent": record["parent"],
                        "index": record["index"],
                        "kind": record["kind"],
                        "value": record["value"],
                    },
                )
            )
        for record in records:
            for key in sorted(record.get("meta", {})):
                templates.append(
                    ChangeEvent(
                        0,
                        ChangeKind.META_CHANGED,
                        record["id"],
                        before={"key": key, "value": None},
                        after={"key": key, "value": record["meta"][key]},
                    )
                )
        return templates
    if kind is ChangeKind.NODE_MOVED:
        return [ChangeEvent(0, kind, event.node, before=event.after, after=event.before)]
    if kind in (ChangeKind.VALUE_CHANGED, ChangeKind.META_CHANGED):
        before, after = event.before or {}, event.after or {}
        if kind is ChangeKind.META_CHANGED and before.get("value") is None:
            inverse_after = {"key": after["key"], "value": None}
            return [ChangeEvent(0, kind, event.node, before=after, after=inverse_after)]
        return [ChangeEvent(0, kind, event.node, before=after, after=before)]
    raise InvalidArgument(f"cannot invert event kind {kind!r}")


def trees_equal(a: AsltTree, b: AsltTree, *, include_version: bool = True) -> bool:
    """Structural equality: ids, kinds, values, meta and child order."""
    if include_version and a.version != b.version:
        return False
    if a.root != b.root or set(a.nodes) != set(b.nodes):
        return False
    for node_id, node in a.nodes.items():
        other = b.nodes[node_id]
        if (
            node.kind != other.kind
            or node.parent != other.parent
            or node.children != other.children
            or node.value != other.value
            or scalar_tag(node.value) != scalar_tag(other.value)
            or node.meta != other.meta
        ):
            return False
    return True
