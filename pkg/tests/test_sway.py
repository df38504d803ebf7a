import math

import pytest

from hpo_landscape.evaluation import FunctionEvaluator
from hpo_landscape.space import default_space
from hpo_landscape.sway import SwayParams, sway, sway_best

SPACE = default_space()


def surface(c):
    d = c.as_dict(SPACE)
    m = abs(d["n_estimators"] - 120) / 190 + abs(d["max_depth"] - 6) / 19 + d["min_impurity_decrease"] / 20
    return [m, 1 - m / 2, 100 - 60 * m]


def test_two_rows_cost_nothing():
    ev = FunctionEvaluator(surface)
    rows = SPACE.sample(2, 0)
    assert sway(rows, ev, SPACE, seed=0) == rows and ev.budget.e == 0
    with pytest.raises(ValueError):
        sway(rows[:1], ev, SPACE)


@pytest.mark.parametrize("n", [100, 1000, 10_000])
def test_levels_and_survivors(n):
    rows = SPACE.sample(n, n)
    ev = FunctionEvaluator(surface)
    log = []
    out = sway(rows, ev, SPACE, seed=1, log=log)
    stop = math.sqrt(len(rows))
    assert len(out) <= stop < 2 * len(out) + 1
    assert ev.requests["run"] == 2 * len(log)
    assert ev.budget.e <= 2 * len(log)
    sizes = [len(rows)] + [len(entry["rows"]) for entry in log]
    assert all(s > stop for s in sizes[:-1]) and sizes[-1] == len(out)
    assert all(b in (a // 2, a - a // 2) for a, b in zip(sizes, sizes[1:]))


def test_greedy_descent_is_nested():
    rows = SPACE.sample(2000, 3)
    log = []
    sway(rows, FunctionEvaluator(surface), SPACE, seed=2, log=log)
    prev = {c.id for c in rows}
    for entry in log:
        now = set(entry["rows"])
        assert now < prev
        prev = now


def test_dominating_pole_is_never_dropped():
    rows = SPACE.sample(1000, 4)
    for seed in range(10):
        log = []
        sway(rows, FunctionEvaluator(surface), SPACE, seed=seed, log=log)
        for entry in log:
            ev = FunctionEvaluator(surface)
            lv, rv = ev(SPACE.decode(_index(rows, entry["left_pole"]))), ev(SPACE.decode(_index(rows, entry["right_pole"])))
            if lv[0] < rv[0]:
                assert entry["kept"] == "left" and entry["left_pole"] in entry["rows"]
            elif rv[0] < lv[0]:
                assert entry["kept"] == "right" and entry["right_pole"] in entry["rows"]


def _index(rows, cid):
    return next(c.index for c in rows if c.id == cid)


def test_deterministic():
    rows = SPACE.sample(3000, 5)
    a = sway(rows, FunctionEvaluator(surface), SPACE, seed=9)
    b = sway(rows, FunctionEvaluator(surface), SPACE, seed=9)
    assert a == b


def test_explicit_stop_and_best():
    rows = SPACE.sample(256, 6)
    out = sway(rows, FunctionEvaluator(surface), SPACE, SwayParams(stop=4), seed=0)
    assert len(out) == 4
    ev = FunctionEvaluator(surface)
    best = sway_best(rows, ev, SPACE, seed=0)
    survivors = sway(rows, FunctionEvaluator(surface), SPACE, seed=0)
    assert best in survivors
    assert surface(best)[0] == min(surface(c)[0] for c in survivors)
    assert ev.budget.e_plus >= 1
