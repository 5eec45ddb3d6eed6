"""The acceptance gate: every release criterion, one pass/fail line each.

All criteria run headless through the same public surfaces the CLI uses.
Tolerances are zero everywhere: any violation fails its criterion.
"""

from __future__ import annotations

import itertools
import random
from pathlib import Path

from nbmvc.aslt import AsltTree, trees_equal
from nbmvc.codegen import evaluate_task, generate_application
from nbmvc.domains import derive_extended_element, load_profile
from nbmvc.engine import ModelEvent, ModelEventKind, RawEvent, RawKind, RawSource, Session
from nbmvc.errors import SelectionError, TransactionRolledBack, WorkbenchError
from nbmvc.processors import apply_atomic, run_transaction
from nbmvc.sample import (
    build_and2_project,
    build_main_project,
    build_panel_project,
    sample_catalog,
)
from nbmvc.scene import apply_patch, construct_scene, scene_hash, scenes_equal
from nbmvc.service import ProjectStore

from conftest import grow_random_tree, mutate_randomly
from test_codegen import build_random_bool_macro, naive_macro_eval, wrap_in_task

GOLDEN = Path(__file__).parent / "golden"


def report(criterion: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {criterion}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def raw(source, kind, position=None, **payload):
    return RawEvent(source=source, kind=kind, position=position, payload=payload)


def drop(item, x=40, y=40, **payload):
    return raw(RawSource.TOOLBAR, RawKind.DROP, (x, y), palette_item=item, **payload)


def fresh_session(domain: str) -> Session:
    if domain == "io":
        return Session(build_panel_project(), load_profile("io"), session_id="acc-io")
    if domain == "macro":
        return Session(build_and2_project(), load_profile("macro"), session_id="acc-macro")
    return Session(
        build_main_project(),
        load_profile("task", catalog=sample_catalog()),
        session_id="acc-task",
    )


# ------------------------------------------------------- raw event generators


def _symbol_nodes(session):
    return [
        n.id
        for n in session.tree.walk()
        if n.id != session.tree.root and n.kind not in session.profile.relation_kinds
    ]


def _wire_nodes(session):
    return [n.id for n in session.tree.walk() if n.kind in session.profile.relation_kinds]


def _common_actions(session, rng):
    symbols = _symbol_nodes(session)
    actions = [
        lambda: raw(RawSource.MODELLING_PANE, RawKind.CLICK, (rng.randrange(900), rng.randrange(600))),
        lambda: raw(RawSource.EXTERNAL, RawKind.CLICK, None,
                    filter=f"kind:{rng.choice(sorted(session.profile.symbol_kinds))}",
                    filter_kind="by-kind",
                    arg=rng.choice(sorted(session.profile.symbol_kinds)),
                    active=rng.choice(["true", "false"])),
        lambda: raw(RawSource.TOOLBAR, RawKind.DROP, (1, 1)),  # malformed: no palette_item
    ]
    if symbols:
        actions += [
            lambda: raw(RawSource.MODELLING_PANE, RawKind.CLICK, (0, 0), target=rng.choice(symbols)),
            lambda: raw(RawSource.MODELLING_PANE, RawKind.DRAG_END,
                        (rng.randrange(900), rng.randrange(600)), target=rng.choice(symbols)),
            lambda: raw(RawSource.PROPERTY_INSPECTOR, RawKind.FIELD_EDIT, None,
                        target=rng.choice(symbols), field="name", value=f"n{rng.randrange(1000)}"),
            lambda: raw(RawSource.PROPERTY_INSPECTOR, RawKind.FIELD_EDIT, None,
                        target=rng.choice(symbols), field="bogus", value="x"),
            lambda: raw(RawSource.MODELLING_PANE, RawKind.KEY_COMMAND, None, command="group",
                        members=",".join(rng.sample(symbols, min(len(symbols), 2)))),
        ]
    wires = _wire_nodes(session)
    if wires:
        actions.append(
            lambda: raw(RawSource.MODELLING_PANE, RawKind.KEY_COMMAND, None,
                        command="delete", target=rng.choice(wires))
        )
    removable = [s for s in symbols if rng.random() < 0.3]
    if removable:
        actions.append(
            lambda: raw(RawSource.MODELLING_PANE, RawKind.KEY_COMMAND, None,
                        command="delete", target=rng.choice(removable))
        )
    return actions


def _io_actions(session, rng):
    devices = session.tree.query("/io.device")
    actions = [
        lambda: drop("io.device", rng.randrange(800), rng.randrange(500), name=f"dev{rng.randrange(1000)}"),
        lambda: drop("io.pin", rng.randrange(800), rng.randrange(500)),  # needs wizard
    ]
    if devices:
        actions += [
            lambda: drop("io.pin", rng.randrange(800), rng.randrange(500),
                         name=f"pin{rng.randrange(1000)}", dir=rng.choice(["in", "out"]),
                         target=rng.choice(devices)),
            lambda: raw(RawSource.MODELLING_PANE, RawKind.CLICK, None,
                        toggle_submodel=rng.choice(devices)),
        ]
    return actions


def _macro_endpoints(session, rng):
    tree = session.tree
    sources, sinks = [], []
    for node in tree.node(tree.root).children:
        kind = tree.node(node).kind
        if kind == "macro.port":
            (sources if tree.get_meta(node, "macro.dir") == "in" else sinks).append((node, "p"))
        elif kind == "macro.op":
            sources.append((node, "out"))
            sinks.append((node, rng.choice(["a", "b"])))
    return sources, sinks


def _macro_actions(session, rng):
    ops = ["AND", "OR", "XOR", "NOT", "PASS", "CONST"]
    actions = [
        lambda: drop(f"macro.op.{rng.choice(ops)}", rng.randrange(800), rng.randrange(500),
                     name=f"op{rng.randrange(1000)}"),
        lambda: drop("macro.port", rng.randrange(800), rng.randrange(500),
                     name=f"p{rng.randrange(1000)}", dir=rng.choice(["in", "out"])),
        lambda: drop("macro.composite", rng.randrange(800), rng.randrange(500)),  # wizard
    ]
    sources, sinks = _macro_endpoints(session, rng)
    if sources and sinks:
        def bind():
            src = rng.choice(sources)
            dst = rng.choice(sinks + sources)  # sometimes invalid on purpose
            return raw(
                RawSource.MODELLING_PANE, RawKind.DRAG_END, None,
                from_node=src[0], from_port=src[1], to_node=dst[0], to_port=dst[1],
            )
        actions.append(bind)
    composites = session.tree.query("/macro.composite")
    if composites:
        actions.append(
            lambda: raw(RawSource.MODELLING_PANE, RawKind.CLICK, None,
                        toggle_submodel=rng.choice(composites))
        )
    return actions


def _task_actions(session, rng):
    items = [e.item for e in session.palette if e.kind == "task.instance"]
    actions = []
    if items:
        actions.append(
            lambda: drop(rng.choice(items), rng.randrange(800), rng.randrange(500),
                         name=f"i{rng.randrange(1000)}")
        )
    instances = session.tree.query("/task.instance")
    if instances:
        def bind():
            src_inst = rng.choice(instances)
            dst_inst = rng.choice(instances)
            src_port = rng.choice(["btn", "out", "led", "x"])
            dst_port = rng.choice(["x", "y", "led", "btn"])
            return raw(
                RawSource.MODELLING_PANE, RawKind.DRAG_END, None,
                from_node=src_inst, from_port=src_port, to_node=dst_inst, to_port=dst_port,
            )
        actions.append(bind)
    return actions


DOMAIN_ACTIONS = {"io": _io_actions, "macro": _macro_actions, "task": _task_actions}


def scripted_session_check(domain: str, rng: random.Random, cycles: int = 120):
    """Run a mixed scripted session; returns violation list and counts."""
    session = fresh_session(domain)
    violations: list[str] = []
    applied = rejected = noop = rebuild_checks = 0

    mirror = {"scene": session.scene.copy()}
    session.subscribe_view(
        lambda events, patch: mirror.__setitem__("scene", apply_patch(mirror["scene"], patch))
    )

    def check_cycle(trace):
        nonlocal applied, rejected, noop, rebuild_checks
        steps = trace.step_numbers()
        if any(b <= a for a, b in zip(steps, steps[1:])):
            violations.append(f"steps not ascending: {steps}")
        if trace.outcome == "applied":
            applied += 1
            if session.undo_stack.push_count != pushes_before + 1:
                violations.append("applied cycle without exactly one undo entry")
            if not scenes_equal(mirror["scene"], session.scene):
                violations.append("incremental patch diverged from session scene")
            fresh = construct_scene(
                session.tree,
                session.profile,
                filters=session.scene.filters,
                layer_visibility={l.id: l.visible for l in session.scene.layers.values()},
            )
            if not scenes_equal(mirror["scene"], fresh):
                violations.append("incremental patch diverged from full reconstruction")
            rebuild_checks += 1
        else:
            if trace.outcome == "rejected":
                rejected += 1
            else:
                noop += 1
            if session.tree.version != version_before:
                violations.append(f"{trace.outcome} cycle changed the version")
            if scene_hash(session.scene) != scene_before:
                violations.append(f"{trace.outcome} cycle changed the scene")
            if session.undo_stack.push_count != pushes_before:
                violations.append(f"{trace.outcome} cycle pushed an undo entry")

    for _ in range(cycles):
        actions = _common_actions(session, rng) + DOMAIN_ACTIONS[domain](session, rng)
        event = rng.choice(actions)()
        version_before = session.tree.version
        scene_before = scene_hash(session.scene)
        pushes_before = session.undo_stack.push_count
        trace = session.run_cycle(event)
        check_cycle(trace)
        if trace.wizard_id and rng.random() < 0.7:
            answers = {"name": f"w{rng.randrange(1000)}"}
            version_before = session.tree.version
            scene_before = scene_hash(session.scene)
            pushes_before = session.undo_stack.push_count
            try:
                enriched = session.wizard_complete(trace.wizard_id, answers)
            except WorkbenchError:
                continue
            check_cycle(session.run_model_event(enriched))
    return violations, applied, rejected, noop, rebuild_checks


# ------------------------------------------------------------- the criteria


class TestAcceptance:
    def test_event_cycle_ordering_and_rebuild_equivalence(self):
        rng = random.Random(0xC0FFEE)
        all_violations = []
        stats = []
        total_rebuild = 0
        for domain in ("io", "macro", "task"):
            violations, applied, rejected, noop, rebuilds = scripted_session_check(domain, rng)
            all_violations.extend(f"{domain}: {v}" for v in violations)
            stats.append(f"{domain}: {applied}a/{rejected}r/{noop}n")
            total_rebuild += rebuilds
            if applied < 20 or rejected < 5 or noop < 5:
                all_violations.append(f"{domain}: unbalanced mix ({applied}a/{rejected}r/{noop}n)")
        report(
            "event-cycle ordering (>=100 mixed raw events per domain)",
            not all_violations,
            "; ".join(stats) + (f"; first: {all_violations[0]}" if all_violations else ""),
        )
        report(
            "rebuild equivalence (incremental patch == full reconstruction)",
            total_rebuild > 0 and not any("diverged" in v for v in all_violations),
            f"{total_rebuild} applied cycles checked",
        )

    def test_event_sourcing_replay(self, tmp_path):
        store = ProjectStore(tmp_path / "es")
        mismatches = 0
        for case in range(50):
            rng = random.Random(1000 + case)
            project = store.create(f"es{case}", "task")
            tree = store.load_tree(project)
            events = []
            tree.subscribe(events.append)
            mutate_randomly(tree, rng, 200)
            store.append_events(project, events)
            store.save_tree(project, tree)
            replayed = store.replay(project)
            if not trees_equal(replayed, store.load_tree(project)):
                mismatches += 1
        report(
            "event sourcing (50 sessions x 200 mutations replay)",
            mismatches == 0,
            f"{mismatches} mismatches",
        )

    def _builtin_cases(self):
        """(session, event) pairs covering every built-in processor."""
        cases = []

        io = fresh_session("io")
        device = io.tree.query("/io.device")[0]
        pin = io.tree.query("/io.device/io.pin")[0]
        me = lambda kind, subject, payload: ModelEvent(ModelEventKind(kind), subject, payload)
        cases += [
            (io, me("ElementDropped", None, {"palette_item": "io.pin", "kind": "io.pin",
                                             "x": 10, "y": 10, "name": "fz", "target": device})),
            (io, me("ElementDropped", None, {"palette_item": "io.device", "kind": "io.device",
                                             "x": 10, "y": 10, "name": "fz2"})),
            (io, me("ElementRemoved", pin, {"node": pin})),
            (io, me("ElementMoved", device, {"node": device, "x": 77, "y": 88})),
            (io, me("PropertyEdited", device, {"node": device, "field": "name", "value": "zz"})),
            (io, me("GroupCreated", pin, {"members": ",".join(io.tree.query("/io.device/io.pin"))})),
            (io, me("SubmodelToggled", device, {"node": device, "collapsed": True})),
        ]

        mac = fresh_session("macro")
        gate = mac.tree.query("/macro.op")[0]
        free_port = mac.tree.insert_node(mac.tree.root, 3, "macro.port", "spare")
        mac.tree.set_meta(free_port, "macro.dir", "out")
        mac.tree.set_meta(free_port, "macro.type", "bool")
        mac.scene = construct_scene(mac.tree, mac.profile)
        composite = mac.fold_selection("FoldedCore", [gate])
        clone_entry = mac.extra_palette[0]
        inner_gate = next(
            c for c in mac.tree.node(composite).children
            if mac.tree.node(c).kind == "macro.op"
        )
        ports = mac.tree.query("/macro.port")
        in_port = next(p for p in ports if mac.tree.get_meta(p, "macro.dir") == "in")
        cases += [
            (mac, me("ElementDropped", None, {"palette_item": "macro.op.XOR", "kind": "macro.op",
                                              "x": 5, "y": 5, "name": "x9"})),
            (mac, me("ElementDropped", None, {"palette_item": "macro.op.CONST", "kind": "macro.op",
                                              "x": 5, "y": 5, "name": "k9", "const": True})),
            (mac, me("ElementDropped", None, {"palette_item": "macro.port", "kind": "macro.port",
                                              "x": 5, "y": 5, "name": "p9", "dir": "in"})),
            (mac, me("ElementDropped", None, {"palette_item": "macro.composite", "kind": "macro.composite",
                                              "x": 5, "y": 5, "name": "c9", "ins": 2, "outs": 1})),
            (mac, me("ElementDropped", None, {"palette_item": clone_entry.item, "kind": clone_entry.kind,
                                              "x": 5, "y": 5, "name": "c10"})),
            (mac, me("BindingCreated", in_port, {"from_node": in_port, "from_port": "p",
                                                 "to_node": composite, "to_port": "in1"})),
            (mac, me("BindingRemoved", mac.tree.query("/macro.wire")[0],
                     {"node": mac.tree.query("/macro.wire")[0]})),
            (mac, me("ElementRemoved", inner_gate, {"node": inner_gate})),
            (mac, me("PropertyEdited", composite, {"node": composite, "field": "name", "value": "nn"})),
            (mac, me("SubmodelToggled", composite, {"node": composite, "collapsed": True})),
        ]

        task = fresh_session("task")
        inst = task.tree.query("/task.instance")[0]
        gate_inst = task.tree.query("/task.instance")[1]
        twire = task.tree.query("/task.wire")[0]
        cases += [
            (task, me("ElementDropped", None, {"palette_item": "task.instance.panel",
                                               "kind": "task.instance", "x": 1, "y": 1, "name": "p9"})),
            (task, me("BindingCreated", inst, {"from_node": inst, "from_port": "btn",
                                               "to_node": gate_inst, "to_port": "y"})),
            (task, me("BindingRemoved", twire, {"node": twire})),
            (task, me("ElementRemoved", gate_inst, {"node": gate_inst})),
            (task, me("ElementMoved", inst, {"node": inst, "x": 3, "y": 4})),
            (task, me("PropertyEdited", inst, {"node": inst, "field": "name", "value": "pz"})),
        ]
        return cases

    def test_processor_transactionality_fault_injection(self):
        leaks = []
        positions = 0
        for session, event in self._builtin_cases():
            processor, instructions, _ = session.preview_instructions(event)
            if not instructions:
                continue
            for k in range(len(instructions)):
                before = session.tree.serialize()
                observed = []
                subscription = session.tree.subscribe(observed.append)
                try:
                    run_transaction(session.tree, instructions, fault_at=k)
                    leaks.append(f"{processor.name}@{k}: no rollback raised")
                except TransactionRolledBack:
                    pass
                finally:
                    session.tree.unsubscribe(subscription)
                positions += 1
                if session.tree.serialize() != before:
                    leaks.append(f"{processor.name}@{k}: state leaked")
                if observed:
                    leaks.append(f"{processor.name}@{k}: events leaked")
        report(
            "processor transactionality (fault injection at every position)",
            positions > 40 and not leaks,
            f"{positions} injection points" + (f"; first: {leaks[0]}" if leaks else ""),
        )

    def test_composition_equivalence(self):
        from test_processors import TestCompositionEquivalence

        helper = TestCompositionEquivalence()
        mismatches = 0
        rng = random.Random(0xABCDE)
        for case in range(100):
            tree = grow_random_tree(rng, rng.randint(2, 12), id_seed=case * 7 + 1)
            instructions = helper.random_instructions(tree, rng, rng.randint(1, 10))
            solo = tree.clone()
            results = []
            for instruction in instructions:
                event = apply_atomic(solo, instruction, results)
                results.append(
                    event.node if event and event.kind.value == "NodeInserted" else None
                )
            transactional = tree.clone()
            run_transaction(transactional, instructions)
            if not trees_equal(solo, transactional):
                mismatches += 1
        report(
            "composition equivalence (100 random processors <= 10 instructions)",
            mismatches == 0,
            f"{mismatches} mismatches",
        )

    def test_golden_code_generation(self):
        diffs = []
        for _ in range(2):  # byte-identical across repeated runs
            artifacts = generate_application(
                build_main_project(), load_profile("task", catalog=sample_catalog())
            )
            if [a.path for a in artifacts] != ["And2.ndl", "main.app.ndl", "panel.ndl"]:
                diffs.append("artifact set differs")
                continue
            for artifact in artifacts:
                expected = (GOLDEN / artifact.path).read_bytes()
                if artifact.content.encode("utf-8") != expected:
                    diffs.append(artifact.path)
        report(
            "golden code generation (panel + And2 + main)",
            not diffs,
            ", ".join(diffs) if diffs else "3 artifacts byte-identical",
        )

    def test_evaluator_against_naive_interpreter(self):
        rng = random.Random(0x5EED)
        disagreements = 0
        vectors = 0
        for _ in range(100):
            tree, _ = build_random_bool_macro(rng, max_ops=12, max_ins=6)
            program = wrap_in_task(tree)
            in_keys = [key for key, _ in program.external_inputs]
            for bits in itertools.product([False, True], repeat=len(in_keys)):
                inputs = dict(zip(in_keys, bits))
                expected = naive_macro_eval(
                    tree, tree.root, {k.split(".", 1)[1]: v for k, v in inputs.items()}
                )
                if evaluate_task(program, inputs) != {f"m.{k}": v for k, v in expected.items()}:
                    disagreements += 1
                vectors += 1
        report(
            "evaluator oracle (100 random macros, exhaustive bool inputs)",
            disagreements == 0,
            f"{vectors} vectors, {disagreements} disagreements",
        )

    def test_extended_element_preservation(self):
        rng = random.Random(0xF01D)
        disagreements = 0
        folds = 0
        attempts = 0
        while folds < 100 and attempts < 1000:
            attempts += 1
            tree, _ = build_random_bool_macro(rng, max_ops=8, max_ins=4)
            ops = tree.query("/macro.op")
            if not ops:
                continue
            selection = (
                ops
                if rng.random() < 0.5
                else rng.sample(ops, rng.randint(1, len(ops)))
            )
            reference = tree.clone()
            try:
                derive_extended_element(tree, selection, f"Fold{folds}")
            except SelectionError:
                continue
            folds += 1
            program_before = wrap_in_task(reference)
            program_after = wrap_in_task(tree)
            keys = [key for key, _ in program_before.external_inputs]
            if sorted(keys) != sorted(k for k, _ in program_after.external_inputs):
                disagreements += 1
                continue
            for _ in range(100):
                inputs = {key: rng.random() < 0.5 for key in keys}
                if evaluate_task(program_before, inputs) != evaluate_task(program_after, inputs):
                    disagreements += 1
                    break
        report(
            "extended-element preservation (100 folds x 100 input vectors)",
            folds == 100 and disagreements == 0,
            f"{folds} folds, {disagreements} disagreements",
        )

    def test_serialization_roundtrip_bulk(self):
        rng = random.Random(0xD15C)
        mismatches = 0
        for case in range(1000):
            tree = grow_random_tree(rng, rng.randint(1, 500), id_seed=case)
            if not trees_equal(tree, AsltTree.deserialize(tree.serialize())):
                mismatches += 1
        report(
            "serialization (.nbm round-trip on 1000 random trees <= 500 nodes)",
            mismatches == 0,
            f"{mismatches} mismatches",
        )
