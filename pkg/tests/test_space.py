import itertools

import pytest
from hypothesis import given, strategies as st

from hpo_landscape.space import CAT, INT, REAL, ConfigSpace, ParamSpec, default_space, load_space

SPACE = default_space()


def test_default_grid():
    grids = {p.name: p.grid() for p in SPACE.params}
    assert grids["n_estimators"] == list(range(10, 201, 10))
    assert len(grids["min_impurity_decrease"]) == 41
    assert grids["min_impurity_decrease"][:3] == [0.0, 0.25, 0.5]
    assert grids["criterion"] == ["squared", "absolute", "poisson"]
    assert SPACE.sizes == (20, 20, 41, 20, 3)
    assert SPACE.cardinality == 984_000


def test_strided_count():
    assert SPACE.count((2, 4, 10, 4, 1)) == 10 * 5 * 5 * 5 * 3
    assert SPACE.count((1, 5, 11, 5, 2)) == 2560
    assert sum(1 for _ in SPACE.enumerate((1, 5, 11, 5, 2))) == 2560


def test_small_enumeration_is_complete():
    space = ConfigSpace((ParamSpec("k", CAT, choices=("a", "b")),))
    assert [c.values for c in space.enumerate()] == [("a",), ("b",)]
    space = ConfigSpace((ParamSpec("i", INT, 0, 2, 1), ParamSpec("r", REAL, 0, 1, 0.5),
                         ParamSpec("k", CAT, choices=("u", "v"))))
    got = list(space.enumerate())
    assert len(set(got)) == len(got) == space.cardinality == 18
    assert [c.index for c in got] == list(itertools.product(range(3), range(3), range(2)))


def test_sample_is_deterministic_and_on_grid():
    a = SPACE.sample(10_000, seed=1)
    b = SPACE.sample(10_000, seed=1)
    assert a == b and [c.id for c in a] == [c.id for c in b]
    assert len(a) <= 10_000 and len(set(a)) == len(a)
    for c in a[:200]:
        SPACE.check(c)
    # ids never collide on distinct grid points
    assert len({c.id for c in a}) == len(a)


def test_sample_of_single_point_space():
    space = ConfigSpace((ParamSpec("k", CAT, choices=("only",)), ParamSpec("n", INT, 3, 3, 1)))
    assert len(space.sample(5, seed=9)) == 1


@given(st.lists(st.integers(0, 10_000), min_size=5, max_size=5))
def test_round_trip(raw):
    idx = [r % s for r, s in zip(raw, SPACE.sizes)]
    c = SPACE.decode(idx)
    assert SPACE.encode(c.values) == c.index
    assert SPACE.candidate(**c.as_dict(SPACE)) == c
    assert SPACE.decode(c.index).id == c.id


def test_invalid_specs():
    with pytest.raises(ValueError):
        ParamSpec("x", INT, 5, 1, 1)
    with pytest.raises(ValueError):
        ParamSpec("x", REAL, 0, 1, 0)
    with pytest.raises(ValueError):
        ParamSpec("x", CAT, choices=("a", "a"))
    with pytest.raises(ValueError):
        SPACE.candidate(n_estimators=15, min_sample_leaves=1, min_impurity_decrease=0.0,
                        max_depth=1, criterion="squared")
    with pytest.raises(ValueError):
        SPACE.count((1, 1, 0, 1, 1))


def test_load_space(tmp_path):
    p = tmp_path / "space.ini"
    p.write_text("[depth]\nkind = integer-range\nmin = 1\nmax = 4\nstep = 1\n\n"
                 "[rate]\nkind = real\nmin = 0\nmax = 1\nstep = 0.25\n\n"
                 "[crit]\nkind = categorical\nchoices = a, b\n")
    space = load_space(p)
    assert space.names == ("depth", "rate", "crit")
    assert space.sizes == (4, 5, 2)
