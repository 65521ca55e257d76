"""Surrogate-assisted MCTS for choosing which ``M`` stores to close.

One *iteration* is a single select / expand / evaluate / backup step, so a
descent from the root to a terminal node spends ``M`` iterations. Every node
passed on the way down is scored: with the surrogate in SMCTS, with the main
evaluator in the plain MCTS baseline. When a scored node's children have all
been visited equally often, siblings whose values are within the surrogate
error band of each other are re-scored with the main evaluator.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .evaluation import Evaluator
from .network import StoreNetwork
from .tree import (SearchConfig, SearchNode, TieBreak, backup, expand,
                   select_child)


class BudgetError(RuntimeError):
    """The search ended before any terminal node was reached."""


@dataclass
class SearchResult:
    best_closure_set: frozenset
    best_loss_main: float
    fs_calls: int
    fm_calls: int
    reevaluation_invocations: int
    reevaluated_children: int
    iterations_used: int
    wall_seconds: float
    seed: int
    trace: list = field(default_factory=list, repr=False)
    root: Optional[SearchNode] = field(default=None, repr=False, compare=False)

    @property
    def closed(self) -> list:
        return sorted(self.best_closure_set)

    def to_dict(self) -> dict:
        return {
            "closed": self.closed,
            "loss": self.best_loss_main,
            "fs_calls": self.fs_calls,
            "fm_calls": self.fm_calls,
            "reevals": self.reevaluated_children,
            "reeval_invocations": self.reevaluation_invocations,
            "iterations": self.iterations_used,
            "seconds": self.wall_seconds,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def equally_visited(node: SearchNode) -> bool:
    """True when every child has the same, positive, visit count."""
    if not node.children:
        return False
    it = iter(node.children.values())
    first = next(it).visits
    if first < 1:
        return False
    return all(c.visits == first for c in it)


def reevaluate_children(node: SearchNode, main_value: Callable[[SearchNode], float],
                        sigma: float) -> int:
    """Re-score adjacent siblings whose error bands overlap.

    Children are sorted by current value; for each adjacent pair with
    ``v[i+1] - sigma < v[i] + sigma`` both are scored with ``main_value`` and
    the result is recorded in their refined statistics. A child is scored at
    most once per call. Returns the number of children re-scored.
    """
    children = list(node.children.values())
    if len(children) < 2:
        return 0
    children.sort(key=lambda c: c.value)
    values = [c.value for c in children]
    done = set()
    for i in range(len(children) - 1):
        if values[i + 1] - sigma < values[i] + sigma:
            for j in (i + 1, i):
                if j not in done:
                    done.add(j)
                    children[j].mark_refined(main_value(children[j]))
    return len(done)


def best_terminal(root: SearchNode, tie_break=TieBreak.LOWEST_ID, rng=None) -> SearchNode:
    """Visited terminal node with the highest value."""
    best_value = None
    ties = []
    for node in root.iter_nodes():
        if not (node.terminal and node.visits > 0):
            continue
        v = node.value
        if best_value is None or v > best_value:
            best_value = v
            ties = [node]
        elif v == best_value:
            ties.append(node)
    if not ties:
        raise BudgetError("no terminal node reached; increase the iteration budget")
    if len(ties) == 1 or TieBreak(tie_break) is TieBreak.LOWEST_ID or rng is None:
        return min(ties, key=lambda n: sorted(n.path))
    return ties[rng.randrange(len(ties))]


def extract_solution(root: SearchNode, main: Evaluator, network: StoreNetwork,
                     tie_break=TieBreak.LOWEST_ID, rng=None):
    """Best visited terminal node by value, re-scored once with ``main``.

    Returns ``(closure_set, loss)``.
    """
    closed = best_terminal(root, tie_break, rng).closed
    return closed, main.evaluate(network, closed)


def _check(network: StoreNetwork, config: SearchConfig, sigma_s: float) -> None:
    if config.M >= network.n_stores:
        raise ValueError(f"M={config.M} must be smaller than the number of stores "
                         f"N={network.n_stores}")
    if sigma_s < 0:
        raise ValueError("sigma_s must be >= 0")


def _search(network, step_eval, main, sigma_s, config, assisted):
    _check(network, config, sigma_s)
    rng = random.Random(config.seed)
    scale = config.reward_scale or network.total_sales or 1.0
    sigma = sigma_s / scale
    ids = network.store_ids
    M = config.M
    deadline = None
    if config.budget_seconds is not None:
        deadline = time.perf_counter() + config.budget_seconds

    counters = {"fm": 0}

    def main_value(node):
        counters["fm"] += 1
        return -main.evaluate(network, node.closed) / scale

    start = time.perf_counter()
    root = SearchNode(())
    expand(root, ids, M)
    trace = []
    exact = {}
    step_calls = 0
    invocations = 0
    reevaluated = 0
    it = 0
    budget = config.budget_iterations
    reeval_on = assisted and config.reevaluation_enabled

    while it < budget:
        if deadline is not None and time.perf_counter() >= deadline:
            break
        node = root
        path = [root]
        # the root is never scored, so its trigger is checked before each descent
        if reeval_on and equally_visited(root):
            invocations += 1
            n = reevaluate_children(root, main_value, sigma)
            if n:
                reevaluated += n
                trace.append(("reeval", root.path, n))
        while not node.terminal and it < budget:
            a = select_child(node, config, rng)
            node = node.children[a]
            path.append(node)
            trace.append((node.depth, a))
            if node.leaf and not node.terminal:
                expand(node, ids, M)
            loss = step_eval.evaluate(network, node.closed)
            if node.terminal and not assisted:
                exact[node.closed] = loss
            v = -loss / scale
            step_calls += 1
            it += 1
            backup(path, v)
            if reeval_on and not node.leaf and equally_visited(node):
                invocations += 1
                n = reevaluate_children(node, main_value, sigma)
                if n:
                    reevaluated += n
                    trace.append(("reeval", node.path, n))
            if deadline is not None and time.perf_counter() >= deadline:
                break

    closed = best_terminal(root, config.tie_break, rng).closed
    if closed in exact:
        # the baseline already scored this set with the main evaluator
        loss = exact[closed]
    else:
        loss = main.evaluate(network, closed)
        counters["fm"] += 1
    if assisted:
        fs_calls, fm_calls = step_calls, counters["fm"]
    else:
        fs_calls, fm_calls = 0, step_calls + counters["fm"]
    return SearchResult(
        best_closure_set=closed,
        best_loss_main=loss,
        fs_calls=fs_calls,
        fm_calls=fm_calls,
        reevaluation_invocations=invocations,
        reevaluated_children=reevaluated,
        iterations_used=it,
        wall_seconds=time.perf_counter() - start,
        seed=config.seed,
        trace=trace,
        root=root,
    )


def run_smcts(network: StoreNetwork, F_m: Evaluator, F_s: Evaluator, sigma_s: float,
              config: SearchConfig) -> SearchResult:
    """Surrogate-assisted MCTS.

    ``sigma_s`` is the surrogate error bound in loss units (see
    :func:`smcts.evaluation.calibrate_sigma`); it is scaled into reward units
    alongside the node values.
    """
    return _search(network, F_s, F_m, sigma_s, config, assisted=True)


def run_mcts(network: StoreNetwork, F_m: Evaluator, config: SearchConfig) -> SearchResult:
    """Unassisted baseline: every node is scored with ``F_m``; no re-evaluation."""
    return _search(network, F_m, F_m, 0.0, config, assisted=False)
