import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpo_landscape.cluster import dist, half, project, tree
from hpo_landscape.evaluation import FunctionEvaluator
from hpo_landscape.space import default_space

SPACE = default_space()


def test_dist_examples():
    c = SPACE.candidate(n_estimators=50, min_sample_leaves=3, min_impurity_decrease=1.0,
                        max_depth=4, criterion="squared")
    d = SPACE.candidate(n_estimators=50, min_sample_leaves=3, min_impurity_decrease=1.0,
                        max_depth=4, criterion="poisson")
    assert dist(c, c, SPACE) == 0
    assert dist(c, d, SPACE) == pytest.approx(1 / math.sqrt(5))
    lo = SPACE.decode((0, 0, 0, 0, 0))
    hi = SPACE.decode((19, 19, 40, 19, 2))
    assert dist(lo, hi, SPACE) == pytest.approx(1.0)


def test_dist_matches_embedding_and_triangle():
    rows = SPACE.sample(300, 3)
    rng = np.random.default_rng(0)
    emb = SPACE.embed(rows)
    for _ in range(1000):
        i, j, k = rng.integers(len(rows), size=3)
        a, b, c = rows[i], rows[j], rows[k]
        assert dist(a, b, SPACE) == pytest.approx(np.linalg.norm(emb[i] - emb[j]) / math.sqrt(5))
        assert dist(a, c, SPACE) <= dist(a, b, SPACE) + dist(b, c, SPACE) + 1e-12
        assert dist(a, b, SPACE) == dist(b, a, SPACE)


def test_project_examples():
    assert project(0.5, 0.5, 1.0) == 0.5
    assert project(0.0, 2.0, 2.0) == 0.0


def test_half_sizes_and_poles():
    rows = SPACE.sample(100, 1)
    s = half(rows, SPACE, seed=4)
    assert len(s.lefts) == len(s.rights) == 50
    assert s.left_pole in rows and s.right_pole in rows and s.left_pole != s.right_pole
    assert set(s.lefts) | set(s.rights) == set(rows)
    # lefts sit no further along the projection than rights
    assert max(s.x[c.id] for c in s.lefts) <= min(s.x[c.id] for c in s.rights)


def test_half_identical_rows_splits_in_input_order():
    c = SPACE.sample(1, 0)[0]
    # five copies of one point: every distance is zero
    s = half([c] * 5, SPACE, seed=0)
    assert len(s.lefts) == 3 and len(s.rights) == 2
    with pytest.raises(ValueError):
        half([c], SPACE)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 300), seed=st.integers(0, 1000))
def test_tree_partitions(n, seed):
    rows = SPACE.sample(n, seed)
    root = tree(rows, SPACE, seed=seed)
    stop = math.sqrt(len(rows))
    for node in root.nodes():
        if node.is_leaf:
            assert len(node.rows) < stop or len(node.rows) < 2
        else:
            assert sorted(node.left.rows + node.right.rows, key=lambda c: c.id) == \
                sorted(node.rows, key=lambda c: c.id)
            assert abs(len(node.left.rows) - len(node.right.rows)) <= 1
    assert sum(len(leaf.rows) for leaf in root.leaves()) == len(rows)


def test_tree_shape_and_determinism():
    rows = SPACE.sample(10_000, 2)
    a = tree(rows, SPACE, seed=5)
    b = tree(rows, SPACE, seed=5)
    assert [len(n.rows) for n in a.nodes()] == [len(n.rows) for n in b.nodes()]
    assert [n.left_pole.id for n in a.nodes() if not n.is_leaf] == \
        [n.left_pole.id for n in b.nodes() if not n.is_leaf]
    assert all(len(leaf.rows) < 100 for leaf in a.leaves())
    assert 6 <= a.height() <= 7


def test_tree_small_cases():
    rows = SPACE.sample(3, 8)
    root = tree(rows, SPACE, stop=3, seed=0)
    assert sorted(len(c.rows) for c in (root.left, root.right)) == [1, 2]
    assert tree(rows[:1], SPACE).is_leaf


def test_tree_evaluates_nothing():
    ev = FunctionEvaluator(lambda c: [0, 0, 0])
    tree(SPACE.sample(500, 1), SPACE, seed=1)
    assert ev.budget.e == 0 and ev.budget.e_plus == 0
