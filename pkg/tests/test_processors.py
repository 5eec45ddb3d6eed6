"""Processor engine: atomic instructions, transactions, MIPTs, undo/redo."""

from __future__ import annotations

import random
from types import SimpleNamespace

import pytest

from nbmvc.aslt import AsltTree, create_tree, trees_equal
from nbmvc.errors import (
    AnchorError,
    GuardFailed,
    InvalidArgument,
    NoProcessor,
    NothingToRedo,
    NothingToUndo,
    ReplaceRejected,
    TransactionRolledBack,
)
from nbmvc.processors import (
    AtomicInstruction,
    AtomicOp,
    DomainProcessor,
    ProcessorRegistry,
    UndoStack,
    apply_atomic,
    apply_processor,
    bind_placeholders,
    mipt_get,
    mipt_query,
    mipt_set,
    resolve_processor,
    run_transaction,
)

from conftest import grow_random_tree


def event_of(kind: str, payload: dict):
    return SimpleNamespace(kind=kind, payload=payload)


def pin_tree() -> AsltTree:
    tree = create_tree("io.device")
    for i, name in enumerate(["btn", "led"]):
        node = tree.insert_node(tree.root, i, "io.pin", name)
        tree.set_meta(node, "io.dir", "in" if name == "btn" else "out")
    return tree


class TestApplyAtomic:
    def test_set_value_by_path(self):
        tree = pin_tree()
        event = apply_atomic(
            tree, AtomicInstruction(AtomicOp.SET_VALUE, "/io.pin[0]", {"value": "button"})
        )
        assert event.kind.value == "ValueChanged"
        assert tree.node(tree.query("/io.pin[0]")[0]).value == "button"

    def test_assert_kind_passes(self):
        tree = create_tree("task.app")
        assert apply_atomic(tree, AtomicInstruction(AtomicOp.ASSERT_KIND, "/", {"kind": "task.app"})) is None

    def test_assert_kind_fails_without_mutation(self):
        tree = create_tree("task.app")
        before = tree.serialize()
        with pytest.raises(GuardFailed):
            apply_atomic(tree, AtomicInstruction(AtomicOp.ASSERT_KIND, "/", {"kind": "io.device"}))
        assert tree.serialize() == before

    def test_multi_match_anchor_rejected(self):
        tree = create_tree("box")
        for i in range(3):
            tree.insert_node(tree.root, i, "pin")
        with pytest.raises(AnchorError):
            apply_atomic(tree, AtomicInstruction(AtomicOp.SET_VALUE, "/*", {"value": 1}))

    def test_literal_id_anchor(self):
        tree = create_tree("box")
        node = tree.insert_node(tree.root, 0, "pin")
        apply_atomic(tree, AtomicInstruction(AtomicOp.SET_VALUE, node, {"value": 9}))
        assert tree.node(node).value == 9

    def test_unknown_literal_id(self):
        tree = create_tree("box")
        with pytest.raises(AnchorError):
            apply_atomic(tree, AtomicInstruction(AtomicOp.REMOVE, "e" * 32))

    def test_insert_uses_anchor_as_parent(self):
        tree = create_tree("box")
        apply_atomic(tree, AtomicInstruction(AtomicOp.INSERT, "/", {"kind": "pin", "index": 0}))
        assert len(tree.node(tree.root).children) == 1

    def test_result_anchor_outside_transaction_fails(self):
        tree = create_tree("box")
        with pytest.raises(AnchorError):
            apply_atomic(tree, AtomicInstruction(AtomicOp.REMOVE, "@0"))


class TestPlaceholders:
    def test_typed_whole_substitution(self):
        instr = AtomicInstruction(AtomicOp.SET_META, "/", {"key": "view.x", "value": "${payload.x}"})
        bound = bind_placeholders([instr], {"x": 40})
        assert bound[0].args["value"] == 40

    def test_textual_embedded_substitution(self):
        instr = AtomicInstruction(AtomicOp.SET_VALUE, "/${payload.kind}[0]", {"value": "${payload.name}!"})
        bound = bind_placeholders([instr], {"kind": "pin", "name": "a"})
        assert bound[0].anchor == "/pin[0]"
        assert bound[0].args["value"] == "a!"

    def test_missing_field_rejected(self):
        instr = AtomicInstruction(AtomicOp.SET_VALUE, "/", {"value": "${payload.absent}"})
        with pytest.raises(InvalidArgument):
            bind_placeholders([instr], {})


class TestTransactions:
    def proc(self, *instructions, trigger="ElementDropped") -> DomainProcessor:
        return DomainProcessor("test", "io", trigger, tuple(instructions))

    def test_three_inserts_three_events(self):
        tree = create_tree("box")
        proc = self.proc(
            *[AtomicInstruction(AtomicOp.INSERT, "/", {"kind": "pin", "index": i}) for i in range(3)]
        )
        events = apply_processor(tree, proc, event_of("ElementDropped", {}))
        assert len(events) == 3
        assert tree.version == 3
        assert [e.seq for e in events] == [1, 2, 3]

    def test_midway_failure_restores_bytes_and_leaks_nothing(self):
        tree = pin_tree()
        observed = []
        tree.subscribe(observed.append)
        before = tree.serialize()
        proc = self.proc(
            AtomicInstruction(AtomicOp.INSERT, "/", {"kind": "io.pin", "index": 0}),
            AtomicInstruction(AtomicOp.ASSERT_KIND, "/", {"kind": "not.this"}),
            AtomicInstruction(AtomicOp.INSERT, "/", {"kind": "io.pin", "index": 0}),
        )
        with pytest.raises(TransactionRolledBack):
            apply_processor(tree, proc, event_of("ElementDropped", {}))
        assert tree.serialize() == before
        assert observed == []

    def test_empty_instruction_list(self):
        tree = create_tree("box")
        events = apply_processor(tree, self.proc(), event_of("ElementDropped", {}))
        assert events == []
        assert tree.version == 0

    def test_trigger_mismatch(self):
        tree = create_tree("box")
        with pytest.raises(InvalidArgument):
            apply_processor(tree, self.proc(), event_of("ElementRemoved", {}))

    def test_result_anchor_chains_inserts(self):
        tree = create_tree("box")
        events = run_transaction(
            tree,
            [
                AtomicInstruction(AtomicOp.INSERT, "/", {"kind": "wire", "index": 0}),
                AtomicInstruction(AtomicOp.SET_META, "@0", {"key": "macro.from", "value": "a"}),
            ],
        )
        assert len(events) == 2
        wire = tree.query("/wire")[0]
        assert tree.get_meta(wire, "macro.from") == "a"

    def test_guard_only_processor_never_bumps_version(self):
        tree = create_tree("task.app")
        proc = self.proc(
            AtomicInstruction(AtomicOp.ASSERT_KIND, "/", {"kind": "task.app"}),
            AtomicInstruction(AtomicOp.ASSERT_KIND, "/", {"kind": "task.app"}),
        )
        apply_processor(tree, proc, event_of("ElementDropped", {}))
        assert tree.version == 0

    def test_fault_injection_at_every_position(self, rng):
        tree = grow_random_tree(rng, 12)
        instructions = [
            AtomicInstruction(AtomicOp.INSERT, "/", {"kind": "pin", "index": 0}),
            AtomicInstruction(AtomicOp.SET_META, "@0", {"key": "view.x", "value": 1}),
            AtomicInstruction(AtomicOp.SET_VALUE, "@0", {"value": 5}),
            AtomicInstruction(AtomicOp.REMOVE, "@0"),
        ]
        for position in range(len(instructions)):
            before = tree.serialize()
            with pytest.raises(TransactionRolledBack):
                run_transaction(tree, instructions, fault_at=position)
            assert tree.serialize() == before


class TestRegistry:
    def test_resolution_after_registration(self):
        registry = ProcessorRegistry()
        proc = DomainProcessor("drop", "io", "ElementDropped")
        registry.register(proc)
        assert resolve_processor(registry, "io", event_of("ElementDropped", {})) is proc

    def test_unknown_kind(self):
        registry = ProcessorRegistry()
        with pytest.raises(NoProcessor):
            resolve_processor(registry, "io", event_of("BindingCreated", {}))

    def test_duplicate_registration_rejected(self):
        registry = ProcessorRegistry()
        registry.register(DomainProcessor("a", "io", "ElementDropped"))
        with pytest.raises(ReplaceRejected):
            registry.register(DomainProcessor("b", "io", "ElementDropped"))


class TestMipt:
    def test_set_then_get(self):
        tree = create_tree("box")
        mipt_set(tree, tree.root, "view", "x", 40)
        assert mipt_get(tree, tree.root, "view", "x") == 40

    def test_get_absent(self):
        tree = create_tree("box")
        assert mipt_get(tree, tree.root, "view", "x") is None

    def test_query_enumerates_namespace(self):
        tree = create_tree("box")
        nodes = [tree.insert_node(tree.root, i, "pin") for i in range(5)]
        for i, node in enumerate(nodes):
            mipt_set(tree, node, "view", "x", i * 10)
            mipt_set(tree, node, "io", "addr", f"A{i}")
        hits = mipt_query(tree, "view", lambda key, value: key == "x")
        assert len(hits) == 5
        assert [h[0] for h in hits] == nodes  # document order

    def test_empty_namespace_rejected(self):
        tree = create_tree("box")
        with pytest.raises(InvalidArgument):
            mipt_set(tree, tree.root, "", "x", 1)


class TestUndoRedo:
    def apply(self, tree, stack, instructions, label=""):
        events = run_transaction(tree, instructions)
        stack.push_events(events, label)
        return events

    def test_undo_restores_pre_state(self):
        tree = pin_tree()
        stack = UndoStack()
        snapshot = tree.serialize()
        self.apply(tree, stack, [AtomicInstruction(AtomicOp.INSERT, "/", {"kind": "io.pin", "index": 0})])
        stack.undo(tree)
        assert trees_equal(tree, AsltTree.deserialize(snapshot), include_version=False)

    def test_undo_then_redo_restores_post_state(self):
        tree = pin_tree()
        stack = UndoStack()
        self.apply(
            tree,
            stack,
            [
                AtomicInstruction(AtomicOp.INSERT, "/", {"kind": "io.pin", "index": 0}),
                AtomicInstruction(AtomicOp.SET_META, "@0", {"key": "view.x", "value": 3}),
            ],
        )
        post = tree.serialize()
        stack.undo(tree)
        stack.redo(tree)
        assert trees_equal(tree, AsltTree.deserialize(post), include_version=False)

    def test_undo_empty_stack(self):
        with pytest.raises(NothingToUndo):
            UndoStack().undo(create_tree("box"))

    def test_redo_cleared_by_new_entry(self):
        tree = create_tree("box")
        stack = UndoStack()
        self.apply(tree, stack, [AtomicInstruction(AtomicOp.SET_VALUE, "/", {"value": 1})])
        stack.undo(tree)
        self.apply(tree, stack, [AtomicInstruction(AtomicOp.SET_VALUE, "/", {"value": 2})])
        with pytest.raises(NothingToRedo):
            stack.redo(tree)

    def test_full_unwind_and_replay(self, rng):
        tree = pin_tree()
        stack = UndoStack()
        initial = tree.serialize()
        for step in range(8):
            kind = rng.choice(["io.pin", "note"])
            self.apply(
                tree,
                stack,
                [
                    AtomicInstruction(AtomicOp.INSERT, "/", {"kind": kind, "index": 0}),
                    AtomicInstruction(AtomicOp.SET_VALUE, "@0", {"value": step}),
                ],
            )
        final = tree.serialize()
        for _ in range(8):
            stack.undo(tree)
        assert trees_equal(tree, AsltTree.deserialize(initial), include_version=False)
        for _ in range(8):
            stack.redo(tree)
        assert trees_equal(tree, AsltTree.deserialize(final), include_version=False)

    def test_undo_events_are_published(self):
        tree = create_tree("box")
        stack = UndoStack()
        self.apply(tree, stack, [AtomicInstruction(AtomicOp.SET_VALUE, "/", {"value": 1})])
        seen = []
        tree.subscribe(seen.append)
        stack.undo(tree)
        assert len(seen) == 1
        assert tree.version == 2  # undo is a forward mutation


class TestCompositionEquivalence:
    def random_instructions(self, tree: AsltTree, rng: random.Random, count: int):
        """Instructions valid against `tree` by construction."""
        instructions = []
        shadow = tree.clone()
        results: list[str | None] = []
        for _ in range(count):
            ids = list(shadow.nodes)
            op = rng.randrange(5)
            if op == 0:
                parent = rng.choice(ids)
                index = rng.randrange(len(shadow.node(parent).children) + 1)
                instr = AtomicInstruction(
                    AtomicOp.INSERT, parent, {"kind": rng.choice(["pin", "box"]), "index": index}
                )
            elif op == 1:
                instr = AtomicInstruction(AtomicOp.SET_VALUE, rng.choice(ids), {"value": rng.randrange(100)})
            elif op == 2:
                instr = AtomicInstruction(
                    AtomicOp.SET_META, rng.choice(ids), {"key": "view.x", "value": rng.randrange(100)}
                )
            elif op == 3:
                node = rng.choice(ids)
                instr = AtomicInstruction(AtomicOp.ASSERT_KIND, node, {"kind": shadow.node(node).kind})
            else:
                victims = [n for n in ids if n != shadow.root]
                if not victims:
                    continue
                instr = AtomicInstruction(AtomicOp.REMOVE, rng.choice(victims))
            apply_atomic(shadow, instr, results)
            results.append(None)
            instructions.append(instr)
        return instructions

    def test_transactional_apply_equals_sequential_atomic(self, rng):
        for case in range(25):
            tree = grow_random_tree(rng, 10, id_seed=case)
            instructions = self.random_instructions(tree, rng, rng.randrange(1, 11))
            solo = tree.clone()
            results = []
            for instr in instructions:
                event = apply_atomic(solo, instr, results)
                results.append(event.node if event and event.kind.value == "NodeInserted" else None)
            transactional = tree.clone()
            run_transaction(transactional, instructions)
            assert trees_equal(solo, transactional)
