"""Reference optimizers: random search, grid search, differential evolution, FLASH."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import forest
from .cluster import as_rng
from .evaluation import Evaluator
from .objectives import rank_d2h, wins
from .space import Candidate, ConfigSpace

# strides over the default space giving 20 * 4 * 4 * 4 * 2 = 2560 grid points
DEFAULT_GS_STRIDES = {
    "n_estimators": 1,
    "min_sample_leaves": 5,
    "min_impurity_decrease": 11,
    "max_depth": 5,
    "criterion": 2,
}


@dataclass(frozen=True)
class BaselineParams:
    budget_evals: int = 120
    de_population: int | None = None  # None: 10 per parameter
    de_generations: int = 2
    de_f: float = 0.5
    de_cr: float = 0.9
    gs_strides: tuple[int, ...] | None = None
    flash_initial: int = 20

    def __post_init__(self):
        if self.budget_evals < 1:
            raise ValueError("budget_evals must be >= 1")
        if not 0 <= self.de_f < 2 or not 0 <= self.de_cr <= 1:
            raise ValueError("need 0 <= F < 2 and 0 <= CR <= 1")
        if self.de_population is not None and self.de_population < 4:
            raise ValueError("DE needs a population of at least 4")
        if self.flash_initial < 1:
            raise ValueError("flash_initial must be >= 1")


def best_evaluated(cands: Sequence[Candidate], evaluator: Evaluator) -> Candidate:
    """The d2h = 0 member of ``cands`` (all must have been scored already)."""
    scored = [(c, evaluator.objectives(c).vector(evaluator.goals)) for c in cands]
    return rank_d2h(scored, evaluator.goals)[0][0]


def random_search(pool: Sequence[Candidate], evaluator: Evaluator, budget_evals: int = 120,
                  seed=None) -> Candidate:
    pool = list(pool)
    if not pool:
        raise ValueError("empty pool")
    rng = as_rng(seed)
    pick = rng.choice(len(pool), size=min(budget_evals, len(pool)), replace=False)
    chosen = [pool[i] for i in pick]
    for c in chosen:
        evaluator(c)
    return best_evaluated(chosen, evaluator)


def default_strides(space: ConfigSpace) -> tuple[int, ...]:
    return tuple(DEFAULT_GS_STRIDES.get(p.name, 1) for p in space.params)


def grid_search(space: ConfigSpace, evaluator: Evaluator, strides: Sequence[int] | None = None,
                seed=None) -> Candidate:
    """Evaluate the whole strided cross product. ``seed`` is unused; kept for a uniform signature."""
    strides = default_strides(space) if strides is None else tuple(strides)
    grid = list(space.enumerate(strides))
    for c in grid:
        evaluator(c)
    return best_evaluated(grid, evaluator)


def _de_trial(x: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray, space: ConfigSpace,
              f: float, cr: float, rng: np.random.Generator) -> np.ndarray:
    sizes = np.asarray(space.sizes)
    numeric = np.array([p.is_numeric for p in space.params])
    v = np.where(numeric, np.rint(a + f * (b - c)), a)
    v = np.clip(v, 0, sizes - 1).astype(np.int64)
    take = rng.random(len(x)) < cr
    take[rng.integers(len(x))] = True
    return np.where(take, v, x)


def differential_evolution(space: ConfigSpace, evaluator: Evaluator,
                           params: BaselineParams | None = None, seed=None) -> Candidate:
    """DE/rand/1/bin in grid-index space.

    Numeric trial components are ``a + F*(b - c)`` rounded and clipped to the
    grid; categorical ones copy ``a``. A member is replaced only when its
    trial is strictly better.
    """
    params = params or BaselineParams()
    rng = as_rng(seed)
    npop = params.de_population or 10 * len(space.params)
    pop = space.sample(npop, rng)
    while len(pop) < npop:  # top up after duplicate removal
        extra = [c for c in space.sample(npop, rng) if c not in pop]
        pop.extend(extra[: npop - len(pop)])
        if space.cardinality <= len(pop):
            break
    if len(pop) < 4:
        raise ValueError("DE needs a population of at least 4 distinct candidates")
    score = [evaluator(c) for c in pop]
    for _ in range(params.de_generations):
        for i in range(len(pop)):
            others = [j for j in range(len(pop)) if j != i]
            ja, jb, jc = rng.choice(others, size=3, replace=False)
            x = np.asarray(pop[i].index)
            t = _de_trial(x, np.asarray(pop[ja].index), np.asarray(pop[jb].index),
                          np.asarray(pop[jc].index), space, params.de_f, params.de_cr, rng)
            trial = space.decode(t)
            tscore = evaluator(trial)
            if evaluator.better(tscore, score[i]):
                pop[i], score[i] = trial, tscore
    return best_evaluated(pop, evaluator)


def flash(pool: Sequence[Candidate], evaluator: Evaluator, space: ConfigSpace,
          flash_initial: int = 20, budget_evals: int = 120, seed=None) -> Candidate:
    """Sequential model-based search over a fixed pool.

    One regression tree per goal is refit after every evaluation. The next
    candidate is the unevaluated one whose predicted goals beat the most
    evaluated vectors; ties go to the earliest pool position.
    """
    pool = list(pool)
    if len(pool) <= flash_initial:
        raise ValueError("pool must be larger than the initial sample")
    rng = as_rng(seed)
    budget_evals = min(budget_evals, len(pool))
    X = space.index_matrix(pool).astype(float)
    open_ = np.ones(len(pool), bool)
    done: list[int] = []
    for i in rng.choice(len(pool), size=min(flash_initial, budget_evals), replace=False):
        evaluator(pool[i])
        open_[i] = False
        done.append(int(i))
    tree_params = forest.ForestParams(n_estimators=1, min_sample_leaves=1, max_depth=len(pool))
    while len(done) < budget_evals:
        Y = np.array([evaluator(pool[i]) for i in done])
        cand = np.flatnonzero(open_)
        P = np.column_stack([
            forest.predict(forest.fit(tree_params, X[done], Y[:, g], bootstrap=False), X[cand])
            for g in range(Y.shape[1])
        ])
        # a tree predicts few distinct vectors, so score those once
        uniq, inv = np.unique(P, axis=0, return_inverse=True)
        score = wins(uniq, evaluator.goals, evaluator.bounds, against=Y)[inv.ravel()]
        pick = int(cand[int(np.argmax(score))])
        evaluator(pool[pick])
        open_[pick] = False
        done.append(pick)
    return best_evaluated([pool[i] for i in done], evaluator)
