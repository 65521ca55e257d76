"""Search tree for store-closure MCTS: nodes, UCB1 selection, expansion, backup.

A node is the ordered sequence of stores removed on the way down from the
root; nodes at depth ``M`` are terminal. Node values are rewards, i.e. the
negated (scaled) network loss, so selection maximises.

Besides the ordinary statistics each node carries a refined pair
(``refined_value_sum``, ``refined_visits``) that is seeded when the main
evaluator re-scores the node. From then on both pairs receive every backup
and selection reads the refined pair; the one exception is the node's own
later (surrogate) score, which enters the refined pair as the node's known
main-evaluator value so the refinement does not decay.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional


class UcbVariant(enum.Enum):
    PLAIN_RATIO = "ratio"  # mean + C * sqrt(N_p / N_s)
    LOG_RATIO = "log"  # mean + C * sqrt(ln(N_p) / N_s)


class TieBreak(enum.Enum):
    LOWEST_ID = "lowest"
    RANDOM_SEEDED = "random"


@dataclass
class SearchConfig:
    """Knobs of one search run. ``M`` is the number of stores to close."""

    M: int
    exploration_C: float = 0.05
    budget_iterations: int = 1000
    budget_seconds: Optional[float] = None
    seed: int = 0
    ucb_variant: UcbVariant = UcbVariant.PLAIN_RATIO
    tie_break: TieBreak = TieBreak.RANDOM_SEEDED
    reevaluation_enabled: bool = True
    # loss is divided by this before negation; None means the network's total sales
    reward_scale: Optional[float] = None

    def __post_init__(self):
        self.ucb_variant = UcbVariant(self.ucb_variant)
        self.tie_break = TieBreak(self.tie_break)
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.exploration_C < 0:
            raise ValueError("exploration_C must be >= 0")
        if self.budget_iterations < 1:
            raise ValueError("budget_iterations must be >= 1")
        if self.budget_seconds is not None and self.budget_seconds <= 0:
            raise ValueError("budget_seconds must be > 0")
        if self.reward_scale is not None and self.reward_scale <= 0:
            raise ValueError("reward_scale must be > 0")


class SearchNode:
    __slots__ = ("path", "parent", "value_sum", "visits", "refined_value_sum",
                 "refined_visits", "reevaluated", "main_value", "children", "terminal",
                 "leaf", "_closed")

    def __init__(self, path=(), parent=None, terminal=False):
        self.path = tuple(path)
        self.parent = parent
        self.value_sum = 0.0
        self.visits = 0
        self.refined_value_sum = 0.0
        self.refined_visits = 0
        self.reevaluated = False
        self.main_value = None
        self.children = {}
        self.terminal = terminal
        self.leaf = True
        self._closed = None

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def closed(self) -> frozenset:
        if self._closed is None:
            self._closed = frozenset(self.path)
        return self._closed

    @property
    def mean(self) -> float:
        return self.value_sum / self.visits if self.visits else 0.0

    @property
    def refined_mean(self) -> float:
        return self.refined_value_sum / self.refined_visits if self.refined_visits else 0.0

    @property
    def value(self) -> float:
        """The value selection and re-evaluation read."""
        if self.reevaluated:
            return self.refined_mean
        return self.mean

    @property
    def effective_visits(self) -> int:
        return self.refined_visits if self.reevaluated else self.visits

    def mark_refined(self, value: float) -> None:
        """Record a main-evaluator value into the refined statistics only."""
        if not self.reevaluated:
            self.reevaluated = True
            self.refined_value_sum = 0.0
            self.refined_visits = 0
        self.main_value = value
        self.refined_value_sum += value
        self.refined_visits += 1

    def iter_nodes(self):
        """Depth-first walk over this subtree, children in action order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(list(node.children.values())))

    def to_dict(self) -> dict:
        return {
            "path": list(self.path),
            "visits": self.visits,
            "mean": self.mean,
            "refined_mean": self.refined_mean if self.reevaluated else None,
            "reevaluated": self.reevaluated,
        }

    def __repr__(self):
        return (f"SearchNode(path={list(self.path)}, visits={self.visits}, "
                f"mean={self.mean:.6g}, reevaluated={self.reevaluated})")


def ucb1_score(node_value_mean: float, node_visits: int, parent_visits: int,
               C: float, variant=UcbVariant.PLAIN_RATIO) -> float:
    if node_visits < 1 or parent_visits < 1:
        raise ValueError("UCB1 needs at least one visit to node and parent")
    if variant is UcbVariant.PLAIN_RATIO:
        return node_value_mean + C * math.sqrt(parent_visits / node_visits)
    if variant is UcbVariant.LOG_RATIO:
        return node_value_mean + C * math.sqrt(math.log(parent_visits) / node_visits)
    raise ValueError(f"unknown UCB variant {variant!r}")


def _break_tie(actions, tie_break, rng):
    if len(actions) == 1:
        return actions[0]
    if tie_break is TieBreak.LOWEST_ID:
        return min(actions)
    return actions[rng.randrange(len(actions))]


def select_child(node: SearchNode, config: SearchConfig, rng):
    """Pick the next action below ``node``.

    Unvisited children go first. Otherwise the UCB1 argmax is taken, reading
    refined statistics for re-evaluated children (with the parent's refined
    visit count when the parent itself was re-evaluated).
    """
    if not node.children:
        raise ValueError(f"node {list(node.path)} has no children; expand it first")
    unvisited = [a for a, c in node.children.items() if c.visits == 0]
    if unvisited:
        return _break_tie(unvisited, config.tie_break, rng)

    C = config.exploration_C
    variant = config.ucb_variant
    parent_n = node.visits
    parent_refined_n = node.effective_visits
    best = -math.inf
    best_actions = []
    for a, child in node.children.items():
        if child.reevaluated:
            score = ucb1_score(child.refined_mean, child.refined_visits,
                               max(parent_refined_n, 1), C, variant)
        else:
            score = ucb1_score(child.mean, child.visits, parent_n, C, variant)
        if score > best:
            best = score
            best_actions = [a]
        elif score == best:
            best_actions.append(a)
    return _break_tie(best_actions, config.tie_break, rng)


def expand(node: SearchNode, store_ids, max_depth: int) -> None:
    """Create one child per store not yet removed on the path to ``node``."""
    if node.terminal:
        raise ValueError(f"cannot expand terminal node {list(node.path)}")
    if not node.leaf:
        raise ValueError(f"node {list(node.path)} is already expanded")
    removed = node.closed
    child_terminal = node.depth + 1 >= max_depth
    for sid in store_ids:
        if sid not in removed:
            node.children[sid] = SearchNode(node.path + (sid,), node, child_terminal)
    node.leaf = False


def backup(node_path, value: float) -> None:
    """Add ``value`` to every node on a root-to-node path.

    Re-evaluated nodes also update their refined pair. For the evaluated node
    itself (last on the path) that update uses its main-evaluator value.
    """
    if not node_path:
        raise ValueError("backup needs a non-empty path")
    last = node_path[-1]
    for node in node_path:
        node.visits += 1
        node.value_sum += value
        if node.reevaluated:
            node.refined_visits += 1
            node.refined_value_sum += node.main_value if node is last else value


def dump_tree(root: SearchNode, fh, visited_only: bool = True) -> int:
    """Write one JSON line per node; returns the number of lines."""
    count = 0
    for node in root.iter_nodes():
        if visited_only and node.visits == 0 and node is not root:
            continue
        fh.write(json.dumps(node.to_dict()) + "\n")
        count += 1
    return count
