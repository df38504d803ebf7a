"""SWAY: greedy recursive halving that evaluates only the two poles per level."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cluster import _Rows, _split, as_rng
from .evaluation import Evaluator
from .objectives import rank_d2h
from .space import Candidate, ConfigSpace


@dataclass(frozen=True)
class SwayParams:
    stop: float | None = None  # None: sqrt(len(rows))
    furthest: float = 0.95

    def stop_for(self, n: int) -> float:
        stop = math.sqrt(n) if self.stop is None else self.stop
        return max(2.0, stop)


def sway(rows: Sequence[Candidate], evaluator: Evaluator, space: ConfigSpace,
         params: SwayParams | None = None, seed=None, log: list | None = None) -> list[Candidate]:
    """Halve ``rows`` until at most ``stop`` remain, always keeping the better pole's side.

    Each level costs two pole evaluations (fewer if a pole was scored
    before). When neither pole is better the left half is kept. If ``log``
    is a list, one dict per level is appended.
    """
    rows = list(rows)
    if len(rows) < 2:
        raise ValueError("sway needs at least two rows")
    params = params or SwayParams()
    stop = params.stop_for(len(rows))
    rng = as_rng(seed)
    view = _Rows(rows, space)
    idx = np.arange(len(rows))
    level = 0
    while len(idx) > stop:
        left, right, lefts, rights, _ = _split(view, idx, rng, params.furthest)
        lscore = evaluator(view.rows[left])
        rscore = evaluator(view.rows[right])
        go_right = evaluator.better(rscore, lscore)
        idx = rights if go_right else lefts
        if log is not None:
            log.append({
                "level": level,
                "left_pole": view.rows[left].id,
                "right_pole": view.rows[right].id,
                "kept": "right" if go_right else "left",
                "rows": [view.rows[i].id for i in idx],
            })
        level += 1
    return [view.rows[i] for i in idx]


def sway_best(rows: Sequence[Candidate], evaluator: Evaluator, space: ConfigSpace,
              params: SwayParams | None = None, seed=None) -> Candidate:
    """Run ``sway``, certify the survivors and return the one ranked first."""
    survivors = sway(rows, evaluator, space, params, seed) if len(rows) > 1 else list(rows)
    scored = evaluator.certify(survivors)
    ranked = rank_d2h([(c, o.vector(evaluator.goals)) for c, o in scored], evaluator.goals)
    return ranked[0][0]
