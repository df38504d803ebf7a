"""Hyperparameter grids: parameter specs, candidates, sampling and enumeration."""

from __future__ import annotations

import configparser
import hashlib
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

INT, REAL, CAT = "integer-range", "real-range", "categorical"
_KIND_ALIASES = {
    "int": INT, "integer": INT, INT: INT,
    "real": REAL, "float": REAL, REAL: REAL,
    "cat": CAT, "categorical": CAT, "choice": CAT,
}


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    min: float | None = None
    max: float | None = None
    step: float | None = None
    choices: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (INT, REAL, CAT):
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == CAT:
            if not self.choices:
                raise ValueError(f"{self.name}: categorical needs choices")
            if len(set(self.choices)) != len(self.choices):
                raise ValueError(f"{self.name}: duplicate choices")
        else:
            if self.min is None or self.max is None or self.step is None:
                raise ValueError(f"{self.name}: ranges need min, max and step")
            if self.min > self.max:
                raise ValueError(f"{self.name}: min > max")
            if self.step <= 0:
                raise ValueError(f"{self.name}: step must be positive")

    @property
    def is_numeric(self) -> bool:
        return self.kind != CAT

    @property
    def size(self) -> int:
        if self.kind == CAT:
            return len(self.choices)
        # small epsilon so 10/0.25 does not land on 39.999...
        return int(math.floor((self.max - self.min) / self.step + 1e-9)) + 1

    @property
    def span(self) -> float:
        return float(self.max - self.min) if self.is_numeric else 1.0

    def value(self, index: int):
        if not 0 <= index < self.size:
            raise IndexError(f"{self.name}: index {index} off grid (size {self.size})")
        if self.kind == CAT:
            return self.choices[index]
        v = self.min + index * self.step
        return int(round(v)) if self.kind == INT else round(float(v), 10)

    def index(self, value) -> int:
        if self.kind == CAT:
            try:
                return self.choices.index(value)
            except ValueError:
                raise ValueError(f"{self.name}: {value!r} not in {self.choices}") from None
        i = int(round((float(value) - self.min) / self.step))
        if not 0 <= i < self.size or not math.isclose(self.value(i), float(value), abs_tol=1e-9):
            raise ValueError(f"{self.name}: {value!r} is not on the grid")
        return i

    def grid(self) -> list:
        return [self.value(i) for i in range(self.size)]


@dataclass(frozen=True, order=False)
class Candidate:
    """One point of a grid: per-parameter grid indices plus decoded values."""

    index: tuple[int, ...]
    values: tuple
    id: str = field(compare=False)

    def __eq__(self, other):
        return isinstance(other, Candidate) and self.index == other.index

    def __hash__(self):
        return hash(self.index)

    def as_dict(self, space: "ConfigSpace") -> dict:
        return dict(zip(space.names, self.values))


def _candidate_id(names: Sequence[str], values: Sequence) -> str:
    text = ";".join(f"{n}={v!r}" for n, v in zip(names, values))
    return hashlib.sha1(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ConfigSpace:
    params: tuple[ParamSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(p.size for p in self.params)

    @property
    def cardinality(self) -> int:
        return math.prod(self.sizes)

    def __len__(self):
        return len(self.params)

    def decode(self, index: Sequence[int]) -> Candidate:
        index = tuple(int(i) for i in index)
        if len(index) != len(self.params):
            raise ValueError(f"expected {len(self.params)} indices, got {len(index)}")
        values = tuple(p.value(i) for p, i in zip(self.params, index))
        return Candidate(index, values, _candidate_id(self.names, values))

    def encode(self, values: Sequence) -> tuple[int, ...]:
        if len(values) != len(self.params):
            raise ValueError(f"expected {len(self.params)} values, got {len(values)}")
        return tuple(p.index(v) for p, v in zip(self.params, values))

    def candidate(self, **values) -> Candidate:
        return self.decode(self.encode([values[n] for n in self.names]))

    def check(self, c: Candidate) -> None:
        """Raise if ``c`` was not produced by this space."""
        if len(c.index) != len(self.params) or any(
            not 0 <= i < s for i, s in zip(c.index, self.sizes)
        ):
            raise ValueError(f"candidate {c.id} does not belong to this space")

    def sample(self, n: int, seed=None) -> list[Candidate]:
        """Draw ``n`` grid points with replacement, then drop duplicates (first wins)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        cols = [rng.integers(0, s, size=n) for s in self.sizes]
        seen, out = set(), []
        for row in zip(*cols):
            if row not in seen:
                seen.add(row)
                out.append(self.decode(row))
        return out

    def enumerate(self, strides: Sequence[int] | None = None) -> Iterator[Candidate]:
        """Lazily yield every ``stride``-th grid point per parameter, lexicographically."""
        strides = self._strides(strides)
        axes = [range(0, s, k) for s, k in zip(self.sizes, strides)]
        for row in itertools.product(*axes):
            yield self.decode(row)

    def count(self, strides: Sequence[int] | None = None) -> int:
        strides = self._strides(strides)
        return math.prod(-(-s // k) for s, k in zip(self.sizes, strides))

    def _strides(self, strides):
        if strides is None:
            return (1,) * len(self.params)
        strides = tuple(int(k) for k in strides)
        if len(strides) != len(self.params) or any(k < 1 for k in strides):
            raise ValueError("need one stride >= 1 per parameter")
        return strides

    def embed(self, rows: Sequence[Candidate]) -> np.ndarray:
        """Coordinates whose scaled Euclidean norm is the candidate distance.

        Numerics map to ``(v - min) / (max - min)``; each categorical becomes a
        one-hot block scaled by 1/sqrt(2) so two different symbols sit at distance 1.
        """
        idx = np.asarray([c.index for c in rows], dtype=float).reshape(len(rows), len(self.params))
        blocks = []
        for j, p in enumerate(self.params):
            if p.is_numeric:
                span = p.span or 1.0
                blocks.append((idx[:, j] * p.step / span)[:, None])
            else:
                onehot = np.zeros((len(rows), p.size))
                onehot[np.arange(len(rows)), idx[:, j].astype(int)] = 1.0 / math.sqrt(2.0)
                blocks.append(onehot)
        return np.hstack(blocks) if blocks else np.zeros((len(rows), 0))

    def index_matrix(self, rows: Sequence[Candidate]) -> np.ndarray:
        return np.asarray([c.index for c in rows], dtype=np.int64).reshape(len(rows), len(self.params))


def default_space() -> ConfigSpace:
    """The five random-forest knobs tuned throughout this package."""
    return ConfigSpace((
        ParamSpec("n_estimators", INT, 10, 200, 10),
        ParamSpec("min_sample_leaves", INT, 1, 20, 1),
        ParamSpec("min_impurity_decrease", REAL, 0.0, 10.0, 0.25),
        ParamSpec("max_depth", INT, 1, 20, 1),
        ParamSpec("criterion", CAT, choices=("squared", "absolute", "poisson")),
    ))


def load_space(path: str | Path) -> ConfigSpace:
    """Read a space from an INI file, one section per parameter.

    ::

        [n_estimators]
        kind = integer-range
        min = 10
        max = 200
        step = 10

        [criterion]
        kind = categorical
        choices = squared, absolute, poisson
    """
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    params = []
    for name in parser.sections():
        sec = parser[name]
        kind = _KIND_ALIASES.get(sec.get("kind", "").strip().lower())
        if kind is None:
            raise ValueError(f"[{name}] unknown kind {sec.get('kind')!r}")
        if kind == CAT:
            choices = tuple(s.strip() for s in sec["choices"].split(",") if s.strip())
            params.append(ParamSpec(name, kind, choices=choices))
        else:
            num = int if kind == INT else float
            params.append(ParamSpec(name, kind, num(sec["min"]), num(sec["max"]), num(sec["step"])))
    if not params:
        raise ValueError(f"{path}: no parameters defined")
    return ConfigSpace(tuple(params))

