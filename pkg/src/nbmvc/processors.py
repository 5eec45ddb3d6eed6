"""Transformation processors over the model tree.

Atomic instructions mirror the tree's mutation surface one-to-one, plus a
kind guard that mutates nothing. A domain processor is an ordered instruction
list bound to one complex event kind; applying it is all-or-nothing: the
instructions run against a shadow copy which is grafted back only when every
instruction succeeded, so a failing processor leaves the tree byte-identical
and leaks no events.

The meta accessors (``mipt_*``) are the namespaced annotation toolkit the
instructions and the view layer build on, and :class:`UndoStack` turns the
recorded event stream into transactional undo/redo.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable

from .aslt import (
    AsltTree,
    ChangeEvent,
    MetaValue,
    NodeId,
    Scalar,
    inverse_of,
    is_node_id,
)
from .errors import (
    AnchorError,
    GuardFailed,
    InvalidArgument,
    NoProcessor,
    NothingToRedo,
    NothingToUndo,
    ReplaceRejected,
    TransactionRolledBack,
    WorkbenchError,
)

_PLACEHOLDER_RE = re.compile(r"\$\{payload\.([^}]+)\}")
_RESULT_ANCHOR_RE = re.compile(r"^@(\d+)$")


class AtomicOp(Enum):
    INSERT = "insert"
    REMOVE = "remove"
    MOVE = "move"
    SET_VALUE = "set_value"
    SET_META = "set_meta"
    REMOVE_META = "remove_meta"
    ASSERT_KIND = "assert_kind"


_REQUIRED_ARGS = {
    AtomicOp.INSERT: ("kind", "index"),
    AtomicOp.REMOVE: (),
    AtomicOp.MOVE: ("parent", "index"),
    AtomicOp.SET_VALUE: ("value",),
    AtomicOp.SET_META: ("key", "value"),
    AtomicOp.REMOVE_META: ("key",),
    AtomicOp.ASSERT_KIND: ("kind",),
}


@dataclass(frozen=True)
class AtomicInstruction:
    """One primitive tree mutation or guard.

    ``anchor`` addresses the node to operate on (for inserts: the parent) and
    is either a ``/``-path, a literal node id, or ``@k`` meaning "the node
    created by instruction k of the same processor application".
    """

    op: AtomicOp
    anchor: str
    args: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"op": self.op.value, "anchor": self.anchor, "args": dict(self.args)}

    @classmethod
    def from_json(cls, doc: dict) -> "AtomicInstruction":
        try:
            return cls(op=AtomicOp(doc["op"]), anchor=doc["anchor"], args=dict(doc.get("args", {})))
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidArgument(f"malformed instruction: {exc}") from exc

    def validated(self) -> "AtomicInstruction":
        for name in _REQUIRED_ARGS[self.op]:
            if name not in self.args:
                raise InvalidArgument(
                    f"{self.op.value} instruction missing argument {name!r}", anchor=self.anchor
                )
        return self


@dataclass(frozen=True)
class DomainProcessor:
    """An ordered, transactional instruction list serving one event kind.

    ``builder`` optionally names an expansion rule that derives the concrete
    instruction list from profile data and the triggering event (used where a
    fixed template cannot express variable arity, e.g. palette-driven inserts).
    """

    name: str
    domain: str
    trigger: str
    instructions: tuple[AtomicInstruction, ...] = ()
    builder: str | None = None

    def to_json(self) -> dict:
        doc = {
            "name": self.name,
            "trigger": self.trigger,
            "instructions": [i.to_json() for i in self.instructions],
        }
        if self.builder:
            doc["builder"] = self.builder
        return doc

    @classmethod
    def from_json(cls, domain: str, doc: dict) -> "DomainProcessor":
        try:
            return cls(
                name=doc["name"],
                domain=domain,
                trigger=doc["trigger"],
                instructions=tuple(
                    AtomicInstruction.from_json(i) for i in doc.get("instructions", [])
                ),
                builder=doc.get("builder"),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidArgument(f"malformed processor: {exc}") from exc


class ProcessorRegistry:
    """At most one processor per (domain, event kind)."""

    def __init__(self):
        self._processors: dict[tuple[str, str], DomainProcessor] = {}

    def register(self, processor: DomainProcessor) -> None:
        key = (processor.domain, processor.trigger)
        if key in self._processors:
            raise ReplaceRejected(
                "a processor is already registered for this event",
                domain=processor.domain,
                trigger=processor.trigger,
            )
        self._processors[key] = processor

    def resolve(self, domain: str, event_kind: str) -> DomainProcessor:
        try:
            return self._processors[(domain, event_kind)]
        except KeyError:
            raise NoProcessor(
                "no processor registered", domain=domain, trigger=event_kind
            ) from None

    def items(self) -> Iterable[DomainProcessor]:
        return list(self._processors.values())


def resolve_processor(registry: ProcessorRegistry, domain: str, event) -> DomainProcessor:
    kind = getattr(event, "kind", event)
    kind = kind.value if hasattr(kind, "value") else str(kind)
    return registry.resolve(domain, kind)


# --------------------------------------------------------------- placeholders


def bind_placeholders(
    instructions: Iterable[AtomicInstruction], payload: dict
) -> list[AtomicInstruction]:
    """Substitute ``${payload.field}`` in anchors and args.

    An argument that is exactly one placeholder keeps the payload value's
    type; placeholders embedded in longer text substitute textually. Missing
    payload fields are an error (caught before any mutation happens).
    """
    bound = []
    for instr in instructions:
        anchor = _bind_text(instr.anchor, payload)
        args = {name: _bind_value(value, payload) for name, value in instr.args.items()}
        bound.append(replace(instr, anchor=anchor, args=args).validated())
    return bound


def _lookup(payload: dict, name: str):
    if name not in payload:
        raise InvalidArgument(f"event payload has no field {name!r}")
    return payload[name]


def _bind_value(value, payload: dict):
    if not isinstance(value, str):
        return value
    whole = _PLACEHOLDER_RE.fullmatch(value)
    if whole:
        return _lookup(payload, whole.group(1))
    return _bind_text(value, payload)


def _bind_text(text: str, payload: dict) -> str:
    if not isinstance(text, str):
        return text
    return _PLACEHOLDER_RE.sub(lambda m: str(_lookup(payload, m.group(1))), text)


# --------------------------------------------------------------- application


def resolve_anchor(tree: AsltTree, anchor: str, results: list[NodeId | None]) -> NodeId:
    """Resolve an anchor to exactly one node id."""
    if not isinstance(anchor, str) or not anchor:
        raise AnchorError("empty anchor")
    match = _RESULT_ANCHOR_RE.match(anchor)
    if match:
        slot = int(match.group(1))
        if slot >= len(results) or results[slot] is None:
            raise AnchorError("anchor references an instruction without a result", anchor=anchor)
        return results[slot]
    if anchor.startswith("/"):
        found = tree.query(anchor)
        if len(found) != 1:
            raise AnchorError(
                "anchor must resolve to exactly one node", anchor=anchor, matches=len(found)
            )
        return found[0]
    if is_node_id(anchor):
        if anchor not in tree.nodes:
            raise AnchorError("anchor names an unknown node", anchor=anchor)
        return anchor
    raise AnchorError("anchor is neither a path, a node id, nor @k", anchor=anchor)


def apply_atomic(
    tree: AsltTree,
    instruction: AtomicInstruction,
    results: list[NodeId | None] | None = None,
) -> ChangeEvent | None:
    """Apply one instruction directly to the tree.

    Returns the committed change event, or None for a passing kind guard.
    """
    instruction.validated()
    results = results if results is not None else []
    node = resolve_anchor(tree, instruction.anchor, results)
    args = instruction.args
    op = instruction.op
    if op is AtomicOp.ASSERT_KIND:
        actual = tree.node(node).kind
        if actual != args["kind"]:
            raise GuardFailed(
                "kind guard failed", anchor=instruction.anchor,
                expected=args["kind"], actual=actual,
            )
        return None
    if op is AtomicOp.INSERT:
        tree.insert_node(node, _as_index(args["index"]), args["kind"], args.get("value"))
    elif op is AtomicOp.REMOVE:
        tree.remove_subtree(node)
    elif op is AtomicOp.MOVE:
        parent = resolve_anchor(tree, args["parent"], results)
        tree.move_node(node, parent, _as_index(args["index"]))
    elif op is AtomicOp.SET_VALUE:
        tree.set_value(node, args["value"])
    elif op is AtomicOp.SET_META:
        tree.set_meta(node, args["key"], args["value"])
    elif op is AtomicOp.REMOVE_META:
        tree.remove_meta(node, args["key"])
    return tree.last_event


def _as_index(value) -> int:
    if isinstance(value, bool):
        raise InvalidArgument("index must be an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            raise InvalidArgument("index must be an integer", index=value) from None
    raise InvalidArgument("index must be an integer", index=value)


def run_transaction(
    tree: AsltTree,
    instructions: list[AtomicInstruction],
    *,
    fault_at: int | None = None,
) -> list[ChangeEvent]:
    """Apply instructions all-or-nothing; publish events only on success.

    The work happens in a shadow copy that is grafted back once every
    instruction has succeeded, so failure leaves the original untouched and
    unobserved. ``fault_at`` injects a failure right after instruction k has
    run, for rollback testing.
    """
    shadow = tree.clone()
    events: list[ChangeEvent] = []
    shadow.subscribe(events.append)
    results: list[NodeId | None] = []
    try:
        for position, instruction in enumerate(instructions):
            event = apply_atomic(shadow, instruction, results)
            results.append(
                event.node
                if event is not None and event.kind.value == "NodeInserted"
                else None
            )
            if fault_at is not None and position == fault_at:
                raise GuardFailed("injected fault", position=position)
    except WorkbenchError as exc:
        raise TransactionRolledBack(
            "processor application failed", cause=exc, position=len(results)
        ) from exc
    tree.graft(shadow)
    for event in events:
        tree._notify(event)
    return events


def run_template_transaction(tree: AsltTree, templates: list[ChangeEvent]) -> list[ChangeEvent]:
    """Replay event templates all-or-nothing, like ``run_transaction``."""
    shadow = tree.clone()
    events: list[ChangeEvent] = []
    shadow.subscribe(events.append)
    try:
        for template in templates:
            shadow.apply_template(template)
    except WorkbenchError as exc:
        raise TransactionRolledBack("replay failed", cause=exc) from exc
    tree.graft(shadow)
    for event in events:
        tree._notify(event)
    return events


class InstructionRecorder:
    """Builds an instruction list, tracking the ids inserts will mint.

    The recorder applies every instruction to a scratch clone as it is added,
    so later instructions can embed the concrete ids earlier inserts created
    (wire endpoints, for example). Replaying the finished list through
    :func:`run_transaction` against the same tree state mints identical ids,
    because minting is a pure function of the tree's seeded counter.
    """

    def __init__(self, tree: AsltTree):
        self.scratch = tree.clone()
        self.instructions: list[AtomicInstruction] = []
        self._results: list[NodeId | None] = []

    def add(self, instruction: AtomicInstruction) -> NodeId | None:
        """Validate and record one instruction; returns a minted id for inserts."""
        event = apply_atomic(self.scratch, instruction, self._results)
        minted = (
            event.node
            if event is not None and event.kind.value == "NodeInserted"
            else None
        )
        self._results.append(minted)
        self.instructions.append(instruction)
        return minted

    def insert(self, parent: NodeId, kind: str, value: Scalar = None, index: int | None = None) -> NodeId:
        if index is None:
            index = len(self.scratch.node(parent).children)
        minted = self.add(
            AtomicInstruction(AtomicOp.INSERT, parent, {"kind": kind, "index": index, "value": value})
        )
        assert minted is not None
        return minted

    def set_meta(self, node: NodeId, key: str, value: MetaValue) -> None:
        self.add(AtomicInstruction(AtomicOp.SET_META, node, {"key": key, "value": value}))

    def set_value(self, node: NodeId, value: Scalar) -> None:
        self.add(AtomicInstruction(AtomicOp.SET_VALUE, node, {"value": value}))

    def assert_kind(self, node: NodeId, kind: str) -> None:
        self.add(AtomicInstruction(AtomicOp.ASSERT_KIND, node, {"kind": kind}))

    def move(self, node: NodeId, parent: NodeId, index: int | None = None) -> None:
        if index is None:
            index = len(self.scratch.node(parent).children)
            if self.scratch.node(node).parent == parent:
                index -= 1
        self.add(AtomicInstruction(AtomicOp.MOVE, node, {"parent": parent, "index": index}))

    def remove(self, node: NodeId) -> None:
        self.add(AtomicInstruction(AtomicOp.REMOVE, node))


def apply_processor(tree: AsltTree, processor: DomainProcessor, event) -> list[ChangeEvent]:
    """Apply a processor for its triggering event, transactionally.

    The caller is responsible for pushing the returned entry onto an undo
    stack; see :meth:`UndoStack.push_events`.
    """
    kind = getattr(event, "kind", None)
    kind = kind.value if hasattr(kind, "value") else kind
    if kind != processor.trigger:
        raise InvalidArgument(
            "processor does not serve this event kind",
            trigger=processor.trigger,
            got=kind,
        )
    payload = getattr(event, "payload", {}) or {}
    try:
        instructions = bind_placeholders(processor.instructions, payload)
    except InvalidArgument as exc:
        raise TransactionRolledBack("unresolvable placeholder", cause=exc) from exc
    return run_transaction(tree, instructions)


# ----------------------------------------------------------------------- mipt


def mipt_key(namespace: str, key: str) -> str:
    if not namespace:
        raise InvalidArgument("meta namespace must be non-empty")
    return f"{namespace}.{key}"


def mipt_get(tree: AsltTree, node: NodeId, namespace: str, key: str) -> MetaValue | None:
    return tree.get_meta(node, mipt_key(namespace, key))


def mipt_set(
    tree: AsltTree, node: NodeId, namespace: str, key: str, value: MetaValue
) -> ChangeEvent:
    tree.set_meta(node, mipt_key(namespace, key), value)
    assert tree.last_event is not None
    return tree.last_event


def mipt_remove(tree: AsltTree, node: NodeId, namespace: str, key: str) -> ChangeEvent:
    tree.remove_meta(node, mipt_key(namespace, key))
    assert tree.last_event is not None
    return tree.last_event


def mipt_query(
    tree: AsltTree,
    namespace: str,
    predicate: Callable[[str, MetaValue], bool] | None = None,
) -> list[tuple[NodeId, str, MetaValue]]:
    """All (node, key, value) entries of a namespace, in document order."""
    if not namespace:
        raise InvalidArgument("meta namespace must be non-empty")
    prefix = namespace + "."
    hits: list[tuple[NodeId, str, MetaValue]] = []
    for node in tree.walk():
        for full_key in sorted(node.meta):
            if not full_key.startswith(prefix):
                continue
            short = full_key[len(prefix):]
            value = node.meta[full_key]
            if predicate is None or predicate(short, value):
                hits.append((node.id, short, value))
    return hits


# ----------------------------------------------------------------------- undo


@dataclass(frozen=True)
class UndoEntry:
    label: str
    forward: tuple[ChangeEvent, ...]
    inverse: tuple[ChangeEvent, ...]


class UndoStack:
    """Linear undo/redo over transaction entries.

    ``cursor`` counts the entries currently in effect; pushing truncates any
    redo tail. Undo and redo apply the stored streams as fresh transactions,
    so the tree version keeps growing monotonically and the event log stays
    contiguous.
    """

    def __init__(self):
        self.entries: list[UndoEntry] = []
        self.cursor = 0
        self.push_count = 0

    def push_events(self, events: list[ChangeEvent], label: str = "") -> UndoEntry:
        inverse: list[ChangeEvent] = []
        for event in reversed(events):
            inverse.extend(inverse_of(event))
        entry = UndoEntry(label=label, forward=tuple(events), inverse=tuple(inverse))
        del self.entries[self.cursor:]
        self.entries.append(entry)
        self.cursor = len(self.entries)
        self.push_count += 1
        return entry

    @property
    def can_undo(self) -> bool:
        return self.cursor > 0

    @property
    def can_redo(self) -> bool:
        return self.cursor < len(self.entries)

    def undo(self, tree: AsltTree) -> list[ChangeEvent]:
        if not self.can_undo:
            raise NothingToUndo("undo stack is empty")
        entry = self.entries[self.cursor - 1]
        events = run_template_transaction(tree, list(entry.inverse))
        self.cursor -= 1
        return events

    def redo(self, tree: AsltTree) -> list[ChangeEvent]:
        if not self.can_redo:
            raise NothingToRedo("nothing to redo")
        entry = self.entries[self.cursor]
        templates = [event.template() for event in entry.forward]
        events = run_template_transaction(tree, templates)
        self.cursor += 1
        return events
