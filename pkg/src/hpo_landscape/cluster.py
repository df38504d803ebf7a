"""Candidate distance, pole projection (half) and recursive cluster trees."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .space import Candidate, ConfigSpace


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def dist(a: Candidate, b: Candidate, space: ConfigSpace) -> float:
    """Normalized Euclidean distance in [0, 1].

    Numeric parameters contribute ``|a_i - b_i| / (max_i - min_i)``,
    categoricals 0 or 1; the root of the summed squares is divided by
    sqrt(#params).
    """
    space.check(a)
    space.check(b)
    total = 0.0
    for p, i, j in zip(space.params, a.index, b.index):
        if p.is_numeric:
            d = abs(i - j) * p.step / (p.span or 1.0)
        else:
            d = 0.0 if i == j else 1.0
        total += d * d
    return math.sqrt(total) / math.sqrt(len(space.params))


def project(a: float, b: float, c: float) -> float:
    """Cosine-rule position of a point at distances a, b from poles c apart."""
    return (a * a + c * c - b * b) / (2 * c)


@dataclass
class SplitResult:
    left_pole: Candidate
    right_pole: Candidate
    lefts: list[Candidate]
    rights: list[Candidate]
    x: dict[str, float] = field(default_factory=dict, repr=False)


class _Rows:
    """Embedded view of a candidate list so splits run on index arrays."""

    def __init__(self, rows: Sequence[Candidate], space: ConfigSpace):
        self.rows = list(rows)
        self.emb = space.embed(self.rows)
        self.scale = math.sqrt(max(len(space.params), 1))
        ids = np.array([c.id for c in self.rows])
        # rank of each id in lexicographic order, for tiebreaks
        self.id_rank = np.empty(len(ids), dtype=np.int64)
        self.id_rank[np.argsort(ids, kind="stable")] = np.arange(len(ids))

    def dists(self, idx: np.ndarray, k: int) -> np.ndarray:
        diff = self.emb[idx] - self.emb[k]
        return np.sqrt(np.einsum("ij,ij->i", diff, diff)) / self.scale


def _quantile_row(d: np.ndarray, idx: np.ndarray, rank: np.ndarray, furthest: float) -> int:
    order = np.lexsort((rank[idx], d))
    q = max(1, int(round(furthest * (len(idx) - 1))))
    return int(idx[order[min(q, len(idx) - 1)]])


def _split(view: _Rows, idx: np.ndarray, rng: np.random.Generator, furthest: float):
    """Core of ``half`` on row indices. Returns (left, right, lefts, rights, x)."""
    n = len(idx)
    tmp = int(idx[rng.integers(n)])
    left = _quantile_row(view.dists(idx, tmp), idx, view.id_rank, furthest)
    a = view.dists(idx, left)
    right = _quantile_row(a, idx, view.id_rank, furthest)
    c = float(a[idx == right][0])
    if c == 0.0:
        # quantile landed on a duplicate of left; fall back to the true extreme
        right = int(idx[np.lexsort((view.id_rank[idx], a))[-1]])
        c = float(a[idx == right][0])
    if c == 0.0:
        half = (n + 1) // 2
        return idx[0], idx[-1], idx[:half], idx[half:], np.zeros(n)
    b = view.dists(idx, right)
    x = np.clip((a * a + c * c - b * b) / (2 * c), 0.0, c)
    order = np.lexsort((view.id_rank[idx], x))
    half = (n + 1) // 2  # rows with position i < n/2 go left
    return left, right, idx[order[:half]], idx[order[half:]], x


def half(rows: Sequence[Candidate], space: ConfigSpace, seed=None, furthest: float = 0.95) -> SplitResult:
    """Split ``rows`` in two at the median of their projection between two poles."""
    if len(rows) < 2:
        raise ValueError("half needs at least two rows")
    view = _Rows(rows, space)
    idx = np.arange(len(view.rows))
    left, right, lefts, rights, x = _split(view, idx, as_rng(seed), furthest)
    r = view.rows
    return SplitResult(
        r[left], r[right], [r[i] for i in lefts], [r[i] for i in rights],
        {r[i].id: float(v) for i, v in zip(idx, x)},
    )


@dataclass(eq=False)
class TreeNode:
    rows: list[Candidate]
    left_pole: Candidate | None = None
    right_pole: Candidate | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    depth: int = 0
    queried: bool = False
    parent: "TreeNode | None" = field(default=None, repr=False)
    pruned: bool = False

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def nodes(self):
        """Pre-order walk over live nodes."""
        stack = [self]
        while stack:
            node = stack.pop()
            if node.pruned:
                continue
            yield node
            if node.right is not None:
                stack.append(node.right)
            if node.left is not None:
                stack.append(node.left)

    def leaves(self):
        return [n for n in self.nodes() if n.is_leaf]

    def height(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.height() for c in (self.left, self.right) if c is not None)


def tree(rows: Sequence[Candidate], space: ConfigSpace, stop: float | None = None,
         seed=None, furthest: float = 0.95) -> TreeNode:
    """Recursively ``half`` the rows until a node holds fewer than ``stop`` rows.

    Nothing is evaluated here; the tree only reflects the geometry of the
    hyperparameter grid.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("tree needs at least one row")
    if stop is None:
        stop = math.sqrt(len(rows))
    rng = as_rng(seed)
    view = _Rows(rows, space)

    def grow(idx, depth, parent):
        node = TreeNode([view.rows[i] for i in idx], depth=depth, parent=parent)
        if len(idx) < stop or len(idx) < 2:
            return node
        left, right, lefts, rights, _ = _split(view, idx, rng, furthest)
        node.left_pole, node.right_pole = view.rows[left], view.rows[right]
        node.left = grow(lefts, depth + 1, node)
        node.right = grow(rights, depth + 1, node)
        return node

    return grow(np.arange(len(rows)), 0, None)
