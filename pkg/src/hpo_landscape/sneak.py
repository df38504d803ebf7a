"""niSNEAK: global landscape analysis over a full cluster tree.

The composition is ``select(ypass(xpass(tree(rows))))``:

* ``tree`` clusters every candidate without evaluating anything;
* ``xpass`` repeatedly finds the split whose children most reduce weighted
  entropy, scores its two poles and deletes the worse child;
* ``ypass`` pairs neighbouring survivors and keeps the better of each pair;
* ``select`` reduces the finalists to one answer (see ``POLICIES``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cluster import TreeNode, _Rows, _split, as_rng, tree
from .evaluation import Evaluator
from .objectives import rank_d2h
from .space import Candidate, ConfigSpace
from .sway import SwayParams, sway

POLICIES = ("any", "sany", "all", "sall")
_TIE = 1e-9


def _column_entropy(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts[counts > 0] / n
    return float(-(p * np.log2(p)).sum())


def entropy_of(index_rows: np.ndarray, sizes: Sequence[int]) -> float:
    """Sum over columns of the symbol entropy of grid indices."""
    if len(index_rows) == 0:
        return 0.0
    return sum(_column_entropy(np.bincount(index_rows[:, j], minlength=s))
               for j, s in enumerate(sizes))


def node_entropy(node: TreeNode, space: ConfigSpace) -> float:
    if not node.rows:
        raise ValueError("entropy of an empty node")
    return entropy_of(space.index_matrix(node.rows), space.sizes)


class _Stats:
    """Per-node symbol counts, kept in step with pruning."""

    def __init__(self, root: TreeNode, space: ConfigSpace):
        self.space = space
        self.counts: dict[int, list[np.ndarray]] = {}
        self.entropy: dict[int, float] = {}
        self.signature: dict[int, frozenset] = {}
        for node in root.nodes():
            M = space.index_matrix(node.rows)
            self.counts[id(node)] = [np.bincount(M[:, j], minlength=s)
                                     for j, s in enumerate(space.sizes)]
            self._refresh(node)

    def _refresh(self, node: TreeNode) -> None:
        self.entropy[id(node)] = sum(_column_entropy(c) for c in self.counts[id(node)])
        self.signature.pop(id(node), None)

    def rows_signature(self, node: TreeNode) -> frozenset:
        sig = self.signature.get(id(node))
        if sig is None:
            sig = frozenset(c.index for c in node.rows)
            self.signature[id(node)] = sig
        return sig

    def remove(self, node: TreeNode, dead: Sequence[Candidate]) -> None:
        M = self.space.index_matrix(dead)
        for j, s in enumerate(self.space.sizes):
            self.counts[id(node)][j] -= np.bincount(M[:, j], minlength=s)
        self._refresh(node)


def _live(node: TreeNode | None) -> bool:
    return node is not None and not node.pruned and len(node.rows) > 0


def _eligible(node: TreeNode, stats: _Stats) -> bool:
    if node.queried or not (_live(node.left) and _live(node.right)):
        return False
    if stats.entropy[id(node)] <= 0.0:
        return False
    return stats.rows_signature(node.left) != stats.rows_signature(node.right)


def _gain(node: TreeNode, stats: _Stats) -> float:
    e = stats.entropy
    return (len(node.rows) * e[id(node)]
            - len(node.left.rows) * e[id(node.left)]
            - len(node.right.rows) * e[id(node.right)])


def _pole_key(node: TreeNode) -> tuple[str, str]:
    return (node.left_pole.id, node.right_pole.id)


def best_subtree(root: TreeNode, space: ConfigSpace, stats: _Stats | None = None) -> TreeNode | None:
    """The eligible node maximizing ``n_i*H_i - (n_j*H_j + n_k*H_k)``, or None.

    Eligible: not yet queried, both children alive with differing rows, and
    positive entropy. Ties go to the shallower node, then the lower pole ids.
    """
    stats = stats or _Stats(root, space)
    best, best_key = None, None
    for node in root.nodes():
        if node.is_leaf or not _eligible(node, stats):
            continue
        g = _gain(node, stats)
        if best is None or g > best_key[0] + _TIE or (
            abs(g - best_key[0]) <= _TIE and (node.depth, _pole_key(node)) < best_key[1:]
        ):
            best, best_key = node, (g, node.depth, _pole_key(node))
    return best


def _prune(node: TreeNode, stats: _Stats) -> int:
    """Delete ``node``'s subtree; drop its rows from every ancestor."""
    dead = list(node.rows)
    if not dead:
        node.pruned = True
        return 0
    dead_ids = {c.id for c in dead}
    node.pruned = True
    up = node.parent
    while up is not None:
        up.rows = [c for c in up.rows if c.id not in dead_ids]
        stats.remove(up, dead)
        up = up.parent
    return len(dead)


def xpass(root: TreeNode, evaluator: Evaluator, space: ConfigSpace, log: list | None = None,
          min_rows: float | None = None) -> list[Candidate]:
    """Probe-and-prune until fewer than sqrt(N) rows survive or nothing is eligible."""
    n0 = len(root.rows)
    floor = math.sqrt(n0) if min_rows is None else min_rows
    stats = _Stats(root, space)
    while len(root.rows) >= floor:
        node = best_subtree(root, space, stats)
        if node is None:
            break
        lscore = evaluator(node.left_pole)
        rscore = evaluator(node.right_pole)
        loser = node.left if evaluator.better(rscore, lscore) else node.right
        node.queried = True
        removed = _prune(loser, stats)
        if log is not None:
            log.append({"node_depth": node.depth, "node_rows": len(node.rows) + removed,
                        "pruned": "left" if loser is node.left else "right",
                        "removed": removed, "survivors": len(root.rows)})
    return list(root.rows)


def ypass(survivors: Sequence[Candidate], evaluator: Evaluator, space: ConfigSpace,
          seed=None) -> list[Candidate]:
    """Order survivors by pole projection, pair neighbours, keep each pair's better half."""
    survivors = list(survivors)
    if len(survivors) < 2:
        return survivors
    view = _Rows(survivors, space)
    idx = np.arange(len(survivors))
    _, _, lefts, rights, _ = _split(view, idx, as_rng(seed), 0.95)
    ordered = [survivors[i] for i in np.concatenate([lefts, rights])]
    kept = []
    for k in range(0, len(ordered) - 1, 2):
        a, b = ordered[k], ordered[k + 1]
        va, vb = evaluator(a), evaluator(b)
        kept.append(b if evaluator.better(vb, va) else a)
    if len(ordered) % 2:
        kept.append(ordered[-1])
    return kept


@dataclass
class SelectInfo:
    policy: str
    stop: float
    sway_levels: int = 0
    sway_survivors: int = 0
    finals_evaluated: int = 0

    @property
    def law(self) -> int:
        """Evaluation requests the policy is expected to make."""
        return 2 * self.sway_levels + self.finals_evaluated


def _best_of(cands: Sequence[Candidate], evaluator: Evaluator) -> Candidate:
    scored = [(c, evaluator(c)) for c in cands]
    return rank_d2h(scored, evaluator.goals)[0][0]


def select(finalists: Sequence[Candidate], policy: str, evaluator: Evaluator,
           space: ConfigSpace, seed=None, pool_size: int | None = None,
           info: SelectInfo | None = None) -> Candidate:
    """Reduce finalists to one candidate.

    any:  evaluate one random finalist.
    sany: second SWAY round down to N**0.25 items, return a random one.
    all:  evaluate every finalist, return the best by D2H.
    sall: second SWAY round, evaluate its survivors, return the best by D2H.

    ``pool_size`` is the original N (default: ``len(finalists)**2``).
    """
    finalists = list(finalists)
    if not finalists:
        raise ValueError("no finalists")
    policy = policy.lower()
    if policy not in POLICIES:
        raise ValueError(f"unknown SELECT policy {policy!r}; expected one of {POLICIES}")
    rng = as_rng(seed)
    n = pool_size if pool_size is not None else len(finalists) ** 2
    info = info if info is not None else SelectInfo(policy, 0.0)
    info.policy = policy
    info.stop = max(2.0, n ** 0.25)
    if policy == "any":
        pick = finalists[int(rng.integers(len(finalists)))]
        evaluator(pick)
        info.finals_evaluated = 1
        return pick
    if policy == "all":
        info.finals_evaluated = len(finalists)
        return _best_of(finalists, evaluator)
    if len(finalists) > 1:
        trail = []
        pool = sway(finalists, evaluator, space, SwayParams(stop=info.stop), rng, log=trail)
        info.sway_levels = len(trail)
    else:
        pool = finalists
    info.sway_survivors = len(pool)
    if policy == "sany":
        return pool[int(rng.integers(len(pool)))]
    info.finals_evaluated = len(pool)
    return _best_of(pool, evaluator)


@dataclass
class SneakRun:
    best: Candidate
    events: list
    tree_rows: int
    xpass_survivors: int
    finalists: int
    select: SelectInfo


def nisneak(rows: Sequence[Candidate], evaluator: Evaluator, space: ConfigSpace,
            policy: str = "sall", seed=None) -> Candidate:
    return run_nisneak(rows, evaluator, space, policy, seed).best


def run_nisneak(rows: Sequence[Candidate], evaluator: Evaluator, space: ConfigSpace,
                policy: str = "sall", seed=None) -> SneakRun:
    """Full pipeline with per-stage bookkeeping."""
    rows = list(rows)
    if not rows:
        raise ValueError("nisneak needs rows")
    rng = as_rng(seed)
    events = []
    root = tree(rows, space, seed=rng)
    events.append(("tree", {"rows": len(rows), "height": root.height()}))
    with evaluator.phase("xpass"):
        trail = []
        survivors = xpass(root, evaluator, space, log=trail)
    events.append(("xpass", {"iterations": len(trail), "survivors": len(survivors)}))
    with evaluator.phase("ypass"):
        finalists = ypass(survivors, evaluator, space, seed=rng)
    events.append(("ypass", {"finalists": len(finalists)}))
    info = SelectInfo(policy, 0.0)
    with evaluator.phase("select"):
        best = select(finalists, policy, evaluator, space, seed=rng, pool_size=len(rows), info=info)
    events.append(("select", {"policy": info.policy, "sway_levels": info.sway_levels,
                              "evaluated": info.finals_evaluated}))
    return SneakRun(best, events, len(rows), len(survivors), len(finalists), info)
