import io
import json
import math
import random

import pytest

from smcts.tree import (SearchConfig, SearchNode, TieBreak, UcbVariant, backup,
                        dump_tree, expand, select_child, ucb1_score)

IDS = list(range(1, 11))


def config(**kw):
    kw.setdefault("M", 3)
    return SearchConfig(**kw)


def expanded_root(max_depth=3, ids=IDS):
    root = SearchNode(())
    expand(root, ids, max_depth)
    return root


def set_stats(node, visits, mean):
    node.visits = visits
    node.value_sum = visits * mean


def test_ucb_plain_ratio_exact():
    assert ucb1_score(0.5, 1, 9, 1.0, UcbVariant.PLAIN_RATIO) == 3.5


def test_ucb_zero_exploration_is_mean():
    assert ucb1_score(-0.25, 3, 40, 0.0) == -0.25
    assert ucb1_score(-0.25, 3, 40, 0.0, UcbVariant.LOG_RATIO) == -0.25


def test_ucb_log_ratio():
    assert ucb1_score(0.0, 1, math.e, 1.0, UcbVariant.LOG_RATIO) == pytest.approx(1.0)


def test_ucb_needs_visits():
    with pytest.raises(ValueError):
        ucb1_score(0.0, 0, 5, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(M=0)
    with pytest.raises(ValueError):
        SearchConfig(M=2, budget_iterations=0)
    with pytest.raises(ValueError):
        SearchConfig(M=2, exploration_C=-1)
    assert SearchConfig(M=2, ucb_variant="log").ucb_variant is UcbVariant.LOG_RATIO


def test_expand_root():
    root = expanded_root()
    assert len(root.children) == 10
    assert not root.leaf
    assert all(c.leaf and not c.terminal for c in root.children.values())


def test_expand_depth_one():
    root = expanded_root()
    child = root.children[4]
    expand(child, IDS, 3)
    assert len(child.children) == 9
    assert 4 not in child.children
    assert all(c.path == (4, a) for a, c in child.children.items())


def test_expand_terminal_raises():
    root = expanded_root(max_depth=1)
    leaf = root.children[1]
    assert leaf.terminal
    with pytest.raises(ValueError):
        expand(leaf, IDS, 1)


def test_paths_have_distinct_ids():
    root = expanded_root(max_depth=4)
    node = root
    for a in (3, 7, 1):
        node = node.children[a]
        if not node.terminal:
            expand(node, IDS, 4)
    for leaf in node.children.values():
        assert len(set(leaf.path)) == len(leaf.path) == 4
        assert leaf.terminal


def test_select_unvisited_first():
    root = expanded_root(ids=[1, 2, 3, 4, 5])
    for a, c in root.children.items():
        if a != 4:
            set_stats(c, 3, 10.0)
    root.visits = 12
    assert select_child(root, config(), random.Random(0)) == 4


def test_select_unvisited_lowest_id():
    root = expanded_root(ids=[5, 2, 9])
    assert select_child(root, config(tie_break="lowest"), random.Random(0)) == 2


def test_select_greedy_with_zero_c():
    root = expanded_root(ids=[1, 2, 3, 4])
    for a, mean in zip([1, 2, 3, 4], [-0.4, -0.1, -0.3, -0.2]):
        set_stats(root.children[a], 5, mean)
    root.visits = 20
    assert select_child(root, config(exploration_C=0.0), random.Random(0)) == 2


def test_select_hand_computed_argmax():
    root = expanded_root(ids=[1, 2, 3])
    set_stats(root.children[1], 8, 0.60)
    set_stats(root.children[2], 2, 0.30)
    set_stats(root.children[3], 6, 0.50)
    root.visits = 16
    # 0.60 + 0.2*sqrt(2) = 0.8828, 0.30 + 0.2*sqrt(8) = 0.8657, 0.50 + 0.2*sqrt(16/6) = 0.8266
    cfg = config(exploration_C=0.2)
    assert select_child(root, cfg, random.Random(0)) == 1
    # with C = 0.3: 1.0243, 1.1485, 0.9899
    cfg = config(exploration_C=0.3)
    assert select_child(root, cfg, random.Random(0)) == 2


def test_select_requires_children():
    with pytest.raises(ValueError):
        select_child(SearchNode(()), config(), random.Random(0))


def test_select_reads_refined_stats():
    root = expanded_root(ids=[1, 2])
    set_stats(root.children[1], 10, -0.2)
    set_stats(root.children[2], 10, -0.3)
    root.visits = 20
    cfg = config(exploration_C=0.0)
    assert select_child(root, cfg, random.Random(0)) == 1
    root.children[2].mark_refined(-0.05)
    assert root.children[2].value == -0.05
    assert select_child(root, cfg, random.Random(0)) == 2


def test_backup_single():
    node = SearchNode((1,))
    backup([node], 0.7)
    assert node.visits == 1
    assert node.mean == pytest.approx(0.7)


def test_backup_mean():
    node = SearchNode((1,))
    backup([node], 0.2)
    backup([node], 0.4)
    assert node.visits == 2
    assert node.mean == pytest.approx(0.3)


def test_backup_counts_on_root():
    root = expanded_root()
    rng = random.Random(5)
    for _ in range(37):
        child = root.children[rng.choice(IDS)]
        backup([root, child], rng.uniform(-1, 0))
    assert root.visits == 37
    assert root.visits == sum(c.visits for c in root.children.values())
    for n in root.iter_nodes():
        assert n.mean * n.visits == pytest.approx(n.value_sum, abs=1e-9)


def test_backup_empty_path():
    with pytest.raises(ValueError):
        backup([], 1.0)


def test_backup_updates_refined_pair_after_reevaluation():
    parent = SearchNode((1,))
    child = SearchNode((1, 2), parent)
    backup([parent, child], -0.5)
    child.mark_refined(-0.2)
    assert (child.refined_visits, child.refined_value_sum) == (1, -0.2)
    # a later surrogate score of the child enters its refined pair as its main value
    backup([parent, child], -0.6)
    assert child.visits == 2
    assert child.mean == pytest.approx(-0.55)
    assert child.refined_visits == 2
    assert child.refined_mean == pytest.approx(-0.2)
    # backups from below the re-evaluated node are recorded as they are
    grandchild = SearchNode((1, 2, 3), child)
    backup([parent, child, grandchild], -0.8)
    assert child.refined_visits == 3
    assert child.refined_value_sum == pytest.approx(-1.2)


def test_unrefined_nodes_leave_refined_stats_unused():
    node = SearchNode((3,))
    backup([node], -0.4)
    assert not node.reevaluated
    assert node.refined_visits == 0
    assert node.value == node.mean


def test_dump_tree_lines():
    root = expanded_root()
    backup([root, root.children[2]], -0.5)
    buf = io.StringIO()
    n = dump_tree(root, buf)
    lines = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert n == len(lines) == 2
    assert lines[1] == {"path": [2], "visits": 1, "mean": -0.5, "refined_mean": None,
                        "reevaluated": False}
    assert set(lines[0]) == {"path", "visits", "mean", "refined_mean", "reevaluated"}


def test_tie_break_policies():
    root = expanded_root(ids=[7, 3, 5])
    for c in root.children.values():
        set_stats(c, 2, -0.1)
    root.visits = 6
    assert select_child(root, config(tie_break=TieBreak.LOWEST_ID), random.Random(0)) == 3
    picks = {select_child(root, config(), random.Random(s)) for s in range(30)}
    assert picks == {7, 3, 5}
