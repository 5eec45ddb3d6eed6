"""Shared fixtures and model builders for the test suite."""

from __future__ import annotations

import random

import pytest

from nbmvc.aslt import AsltTree, create_tree

KINDS = ["box", "pin", "wire", "group", "note"]
META_KEYS = ["view.x", "view.y", "view.layer", "io.addr", "macro.name"]
SCALARS = [None, True, False, 0, 7, -3, 2.5, "hello", "", 1.25]


def random_scalar(rng: random.Random):
    return rng.choice(SCALARS)


def random_meta_value(rng: random.Random):
    choice = rng.randrange(4)
    if choice == 0:
        return rng.randrange(-100, 100)
    if choice == 1:
        return rng.choice(["alpha", "beta", "gamma"])
    if choice == 2:
        return rng.random()
    return [rng.randrange(10) for _ in range(rng.randrange(1, 4))]


def grow_random_tree(rng: random.Random, size: int, *, id_seed: int = 0) -> AsltTree:
    """A tree of `size` nodes built by random inserts plus meta/value noise."""
    tree = create_tree("box", domain="task", id_seed=id_seed)
    ids = [tree.root]
    while len(ids) < size:
        parent = rng.choice(ids)
        index = rng.randrange(len(tree.node(parent).children) + 1)
        node = tree.insert_node(parent, index, rng.choice(KINDS), random_scalar(rng))
        ids.append(node)
        if rng.random() < 0.5:
            tree.set_meta(node, rng.choice(META_KEYS), random_meta_value(rng))
    return tree


def mutate_randomly(tree: AsltTree, rng: random.Random, steps: int) -> None:
    """Apply `steps` random successful mutations of every kind."""
    done = 0
    while done < steps:
        ids = list(tree.nodes)
        non_root = [n for n in ids if n != tree.root]
        op = rng.randrange(6)
        try:
            if op == 0 or not non_root:
                parent = rng.choice(ids)
                index = rng.randrange(len(tree.node(parent).children) + 1)
                tree.insert_node(parent, index, rng.choice(KINDS), random_scalar(rng))
            elif op == 1 and len(non_root) > 3:
                tree.remove_subtree(rng.choice(non_root))
            elif op == 2:
                node = rng.choice(non_root)
                candidates = [
                    t for t in ids if t != node and not tree.is_ancestor(node, t)
                ]
                target = rng.choice(candidates)
                size = len(tree.node(target).children)
                if tree.node(node).parent == target:
                    size -= 1
                tree.move_node(node, target, rng.randrange(size + 1))
            elif op == 3:
                tree.set_value(rng.choice(ids), random_scalar(rng))
            elif op == 4:
                tree.set_meta(rng.choice(ids), rng.choice(META_KEYS), random_meta_value(rng))
            else:
                node = rng.choice(ids)
                keys = list(tree.node(node).meta)
                if not keys:
                    continue
                tree.remove_meta(node, rng.choice(keys))
        except Exception:
            continue
        done += 1


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240811)
