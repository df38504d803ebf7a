import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpo_landscape import forest
from hpo_landscape.forest import ForestParams


# --- slow, obviously-correct reference CART -------------------------------------------

def _cost(y, crit):
    y = np.asarray(y, float)
    if crit == "squared":
        return float(np.sum((y - y.mean()) ** 2))
    if crit == "absolute":
        return float(np.sum(np.abs(y - np.median(y))))
    mu = max(y.mean(), 1e-9)
    terms = [v * np.log(v / mu) if v > 0 else 0.0 for v in y]
    return float(np.sum(terms) - y.sum() + len(y) * mu)


def _ref_tree(X, y, crit, max_depth, min_leaf, min_dec, n_total, depth=0):
    leaf = float(np.median(y)) if crit == "absolute" else float(np.mean(y))
    parent = _cost(y, crit)
    if depth >= max_depth or len(y) < 2 * min_leaf or parent <= 1e-12:
        return leaf
    best = None
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (lo + hi)
            m = X[:, f] <= thr
            if m.sum() < min_leaf or (~m).sum() < min_leaf:
                continue
            c = _cost(y[m], crit) + _cost(y[~m], crit)
            if best is None or c < best[0] - 1e-9:
                best = (c, f, thr)
    if best is None or (parent - best[0]) / n_total + 1e-12 < min_dec:
        return leaf
    _, f, thr = best
    m = X[:, f] <= thr
    return (f, thr,
            _ref_tree(X[m], y[m], crit, max_depth, min_leaf, min_dec, n_total, depth + 1),
            _ref_tree(X[~m], y[~m], crit, max_depth, min_leaf, min_dec, n_total, depth + 1))


def _ref_predict(node, x):
    while isinstance(node, tuple):
        f, thr, left, right = node
        node = left if x[f] <= thr else right
    return node


def _random_problem(rng, n=14, p=3, counts=True):
    # continuous features make exact cost ties vanishingly unlikely
    X = rng.normal(size=(n, p))
    y = rng.poisson(5.0, size=n).astype(float) if counts else rng.normal(size=n)
    return X, y


@pytest.mark.parametrize("crit", forest.CRITERIA)
@pytest.mark.parametrize("seed", range(8))
def test_single_tree_matches_reference(crit, seed):
    rng = np.random.default_rng(seed)
    X, y = _random_problem(rng)
    params = ForestParams(1, int(rng.integers(1, 3)), float(rng.choice([0.0, 0.05, 0.5])),
                          int(rng.integers(1, 6)), crit)
    model = forest.fit(params, X, y, bootstrap=False)
    ref = _ref_tree(X, y, crit, params.max_depth, params.min_sample_leaves,
                    params.min_impurity_decrease, len(y))
    Xq = rng.normal(size=(30, 3))
    np.testing.assert_allclose(forest.predict(model, Xq), [_ref_predict(ref, x) for x in Xq],
                               rtol=0, atol=1e-9)


@pytest.mark.parametrize("crit", forest.CRITERIA)
def test_bootstrap_tree_matches_reference_on_its_draw(crit):
    rng = np.random.default_rng(11)
    X, y = _random_problem(rng, n=20)
    model = forest.fit(ForestParams(5, 1, 0.0, 4, crit), X, y, seed=3)
    for t in range(model.n_trees):
        s = model.samples[t]
        ref = _ref_tree(X[s], y[s], crit, 4, 1, 0.0, len(s))
        np.testing.assert_allclose(forest.predict_tree(model, t, X), [_ref_predict(ref, x) for x in X],
                                   atol=1e-9)


def test_squared_matches_sklearn():
    sk = pytest.importorskip("sklearn.tree")
    rng = np.random.default_rng(5)
    X, y = _random_problem(rng, n=25, p=4, counts=False)
    ours = forest.fit(ForestParams(1, 2, 0.0, 6, "squared"), X, y, bootstrap=False)
    theirs = sk.DecisionTreeRegressor(max_depth=6, min_samples_leaf=2, random_state=0).fit(X, y)
    Xq = rng.normal(size=(50, 4))
    np.testing.assert_allclose(forest.predict(ours, Xq), theirs.predict(Xq), atol=1e-9)


# --- hand-built criterion-choice fixtures ---------------------------------------------

# four rows where each criterion prefers a different cut. By hand:
# squared   0.5 -> 12.67, 1.5 -> 6.50, 2.5 -> 8.00
# absolute  0.5 -> 5,     1.5 -> 5,    2.5 -> 4
# poisson   0.5 -> 1.49,  1.5 -> 1.80, 2.5 -> 2.77
_X4 = np.array([[0.0], [1.0], [2.0], [3.0]])
_Y4 = np.array([0.0, 2.0, 4.0, 7.0])
_CHOICE = {"squared": 1.5, "absolute": 2.5, "poisson": 0.5}


@pytest.mark.parametrize("crit", forest.CRITERIA)
def test_criterion_choice(crit):
    model = forest.fit(ForestParams(1, 1, 0.0, 1, crit), _X4, _Y4, bootstrap=False)
    assert model.threshold[0, 0] == _CHOICE[crit]
    cuts = {t: _cost(_Y4[_X4[:, 0] <= t], crit) + _cost(_Y4[_X4[:, 0] > t], crit)
            for t in (0.5, 1.5, 2.5)}
    assert min(cuts, key=cuts.get) == _CHOICE[crit]


def test_two_row_split():
    X, y = np.array([[0.0], [1.0]]), np.array([0.0, 10.0])
    model = forest.fit(ForestParams(1, 1, 0.0, 1, "squared"), X, y, bootstrap=False)
    assert model.threshold[0, 0] == 0.5
    np.testing.assert_allclose(forest.predict(model, X), [0.0, 10.0])


@pytest.mark.parametrize("crit", forest.CRITERIA)
def test_constant_target_gives_single_leaf(crit):
    X = np.random.default_rng(0).normal(size=(12, 3))
    model = forest.fit(ForestParams(7, 1, 0.0, 20, crit), X, np.full(12, 4.0), seed=1)
    assert (model.n_nodes == 1).all()
    np.testing.assert_allclose(forest.predict(model, X), 4.0)


@pytest.mark.parametrize("crit,leaf", [("squared", np.mean), ("absolute", np.median),
                                       ("poisson", np.mean)])
def test_huge_min_decrease_gives_stump(crit, leaf):
    rng = np.random.default_rng(1)
    X, y = _random_problem(rng)
    model = forest.fit(ForestParams(1, 1, 1e6, 20, crit), X, y, bootstrap=False)
    assert model.n_nodes[0] == 1
    np.testing.assert_allclose(forest.predict(model, X[:2]), leaf(y))


def test_predict_averages_trees():
    rng = np.random.default_rng(2)
    X, y = _random_problem(rng)
    model = forest.fit(ForestParams(2, 1, 0.0, 3, "squared"), X, y, seed=0)
    both = (forest.predict_tree(model, 0, X) + forest.predict_tree(model, 1, X)) / 2
    np.testing.assert_allclose(forest.predict(model, X), both)


def test_errors():
    with pytest.raises(ValueError):
        forest.fit(ForestParams(criterion="poisson"), np.ones((3, 1)), np.array([1.0, -1.0, 2.0]))
    with pytest.raises(ValueError):
        forest.fit(ForestParams(), np.ones((0, 2)), np.ones(0))
    model = forest.fit(ForestParams(n_estimators=2), np.ones((3, 2)), np.ones(3))
    with pytest.raises(ValueError):
        forest.predict(model, np.ones((1, 3)))
    with pytest.raises(ValueError):
        ForestParams(criterion="gini")


def test_seeded_determinism():
    rng = np.random.default_rng(3)
    X, y = _random_problem(rng)
    a = forest.fit(ForestParams(20, 1, 0.0, 5, "absolute"), X, y, seed=9)
    b = forest.fit(ForestParams(20, 1, 0.0, 5, "absolute"), X, y, seed=9)
    np.testing.assert_array_equal(forest.predict(a, X), forest.predict(b, X))


# --- invariants ------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), crit=st.sampled_from(forest.CRITERIA),
       depth=st.integers(1, 8), leaf=st.integers(1, 4))
def test_structure_limits_and_hull(seed, crit, depth, leaf):
    rng = np.random.default_rng(seed)
    X, y = _random_problem(rng, n=int(rng.integers(2, 30)))
    model = forest.fit(ForestParams(5, leaf, 0.0, depth, crit), X, y, seed=seed)
    assert (model.depth <= depth).all()
    p = forest.predict(model, rng.normal(size=(20, 3)) * 3)
    assert (p >= y.min() - 1e-9).all() and (p <= y.max() + 1e-9).all()
    # every leaf keeps at least ``leaf`` bootstrap rows
    for t in range(model.n_trees):
        s = model.samples[t]
        Xs = X[s]
        node_of = np.zeros(len(s), int)
        for i, x in enumerate(Xs):
            n = 0
            while model.feature[t, n] >= 0:
                n = model.left[t, n] if x[model.feature[t, n]] <= model.threshold[t, n] else model.right[t, n]
            node_of[i] = n
        assert np.bincount(node_of).max() >= 1
        assert min(np.bincount(node_of)[np.bincount(node_of) > 0]) >= min(leaf, len(s))


def leaf_cost(model, X, y, crit):
    """Sum over trees of the criterion cost of every leaf on that tree's bootstrap rows."""
    total = 0.0
    for t in range(model.n_trees):
        s = model.samples[t]
        leaves = {}
        for r in s:
            n = 0
            while model.feature[t, n] >= 0:
                n = model.left[t, n] if X[r, model.feature[t, n]] <= model.threshold[t, n] else model.right[t, n]
            leaves.setdefault(n, []).append(y[r])
        total += sum(_cost(v, crit) for v in leaves.values())
    return total


def capacity_violations(seed, crit, max_depth=8):
    rng = np.random.default_rng(seed)
    X, y = _random_problem(rng, n=24, p=4)
    costs = [leaf_cost(forest.fit(ForestParams(10, 1, 0.0, d, crit), X, y, seed=seed), X, y, crit)
             for d in range(0, max_depth + 1)]
    return sum(b > a + 1e-9 for a, b in zip(costs, costs[1:]))


@pytest.mark.parametrize("crit", forest.CRITERIA)
def test_monotone_capacity(crit):
    assert sum(capacity_violations(s, crit) for s in range(10)) == 0
