"""Error measures, the Zitzler preference and D2H ranking."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

PRED_THRESHOLD = 0.40
SA_FLOOR = -1000.0


@dataclass(frozen=True)
class GoalSpec:
    names: tuple[str, ...]
    weights: tuple[int, ...]  # -1 minimize, +1 maximize

    def __post_init__(self):
        if len(self.names) != len(self.weights):
            raise ValueError("names and weights differ in length")
        if any(w not in (-1, 1) for w in self.weights):
            raise ValueError("weights must be -1 or +1")

    def __len__(self):
        return len(self.names)


# d2h is derived from a Zitzler ranking, so search compares the other three
SEARCH_GOALS = GoalSpec(("mre", "pred40", "sa"), (-1, 1, 1))
REPORT_GOALS = GoalSpec(("mre", "pred40", "sa", "d2h"), (-1, 1, 1, -1))


@dataclass(frozen=True)
class Objectives:
    mre: float
    pred40: float
    sa: float
    d2h: float | None = None

    def vector(self, goals: GoalSpec = SEARCH_GOALS) -> np.ndarray:
        return np.array([getattr(self, n) for n in goals.names], dtype=float)

    def with_d2h(self, d2h: float) -> "Objectives":
        return replace(self, d2h=d2h)


def mre(actual: float, predicted: float) -> float:
    """Magnitude of relative error. A zero actual falls back to ``|predicted|``."""
    if actual == 0:
        return abs(predicted)
    return abs(actual - predicted) / abs(actual)


def window_mre(actuals: Sequence[float], predictions: Sequence[float]) -> float:
    return float(np.median([mre(a, p) for a, p in zip(actuals, predictions)]))


def pred40(mres: Sequence[float], threshold: float = PRED_THRESHOLD) -> float:
    if len(mres) == 0:
        raise ValueError("pred40 of an empty list")
    return sum(1 for m in mres if m <= threshold) / len(mres)


def mae(predictions: Sequence[float], actuals: Sequence[float]) -> float:
    p, a = np.asarray(predictions, float), np.asarray(actuals, float)
    return float(np.mean(np.abs(p - a)))


def sa(predictions: Sequence[float], actuals: Sequence[float], guesses: Sequence[float]) -> float:
    """Standardized accuracy, ``(1 - MAE/MAE_guess) * 100``.

    Negative values mean the model is worse than the median guess.
    """
    if not (len(predictions) == len(actuals) == len(guesses)) or len(actuals) == 0:
        raise ValueError("sa needs equal, non-empty sequences")
    err, base = mae(predictions, actuals), mae(guesses, actuals)
    if base == 0:
        return 100.0 if err == 0 else SA_FLOOR
    return (1.0 - err / base) * 100.0


def normalizer(vectors) -> tuple[np.ndarray, np.ndarray]:
    """Per-goal (lo, hi) over a comparison pool."""
    v = np.atleast_2d(np.asarray(vectors, float))
    return v.min(axis=0), v.max(axis=0)


def _scale(v, bounds):
    v = np.asarray(v, float)
    if bounds is None:
        return v
    lo, hi = bounds
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    return (v - lo) / span


def zitzler_loss(a, b, goals: GoalSpec, bounds=None) -> float:
    """``sum_j -exp(w_j (a_j - b_j) / n) / n`` on (optionally) normalized goals."""
    a, b = _scale(a, bounds), _scale(b, bounds)
    n = len(goals)
    if a.shape != (n,) or b.shape != (n,):
        raise ValueError(f"goal vectors must have length {n}")
    w = np.asarray(goals.weights, float)
    return float(np.sum(-np.exp(w * (a - b) / n) / n))


def better(a, b, goals: GoalSpec, bounds=None) -> bool:
    """True when moving from ``a`` to ``b`` loses more than the reverse."""
    return zitzler_loss(b, a, goals, bounds) > zitzler_loss(a, b, goals, bounds)


def wins(vectors, goals: GoalSpec, bounds=None, against=None) -> np.ndarray:
    """For every row of ``vectors``, how many rows of ``against`` it is better than."""
    V = _scale(np.atleast_2d(np.asarray(vectors, float)), bounds)
    A = V if against is None else _scale(np.atleast_2d(np.asarray(against, float)), bounds)
    n = len(goals)
    w = np.asarray(goals.weights, float)
    out = np.zeros(len(V), dtype=np.int64)
    # chunked to keep the (rows x pool x goals) tensor small
    step = max(1, 2_000_000 // max(len(A) * n, 1))
    for s in range(0, len(V), step):
        d = w * (V[s:s + step, None, :] - A[None, :, :]) / n
        loss_va = -np.exp(d).sum(axis=2) / n
        loss_av = -np.exp(-d).sum(axis=2) / n
        out[s:s + step] = (loss_av > loss_va).sum(axis=1)
    return out


def rank_d2h(evaluated, goals: GoalSpec = SEARCH_GOALS, normalize: bool = True):
    """Order (candidate, vector) pairs best-first and give each ``i / |Z|``.

    Items are ranked by how many others they beat under ``better``; ties go
    to the lower candidate id. Goals are min-max scaled over the pool.
    """
    evaluated = list(evaluated)
    if not evaluated:
        return []
    V = np.array([np.asarray(v, float) for _, v in evaluated])
    bounds = normalizer(V) if normalize else None
    score = wins(V, goals, bounds)
    order = sorted(range(len(evaluated)), key=lambda i: (-score[i], evaluated[i][0].id))
    n = len(evaluated)
    return [(evaluated[i][0], k / n) for k, i in enumerate(order)]


def boolean_dominates(a, b, goals: GoalSpec) -> bool:
    """Classic Pareto domination (no worse everywhere, strictly better somewhere)."""
    w = np.asarray(goals.weights, float)
    a, b = w * np.asarray(a, float), w * np.asarray(b, float)
    return bool(np.all(a >= b) and np.any(a > b))

