"""Candidate evaluation, the persistent result cache and E / E+ accounting.

Two layers keep costs honest:

* ``ResultCache`` remembers learner results across runs (and processes via
  its append-only file) so nothing is trained twice;
* each ``Evaluator`` belongs to one optimizer run and charges its budget the
  first time that run asks for a candidate, whether or not the result came
  from the cache. A warm cache therefore changes wall time, never ``e``.
"""

from __future__ import annotations

import contextlib
import hashlib
import logging
import math
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import forest
from .health import ProjectSeries, TrainTestSplit, build_splits, design, naive_guesses
from .objectives import SEARCH_GOALS, GoalSpec, Objectives, better, mre, pred40, sa
from .space import Candidate, ConfigSpace

log = logging.getLogger(__name__)

CACHE_ENV = "HPO_LANDSCAPE_CACHE"
CACHE_FIELDS = ("key", "values", "dataset_id", "target", "seed", "mre", "pred40", "sa", "wall_time")


class EvaluationError(RuntimeError):
    def __init__(self, candidate_id: str, reason: str):
        super().__init__(f"evaluation of {candidate_id} failed: {reason}")
        self.candidate_id = candidate_id


@dataclass
class EvalBudget:
    e: int = 0
    e_plus: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def charge(self, certify: bool = False) -> None:
        with self._lock:
            if certify:
                self.e_plus += 1
            else:
                self.e += 1


@dataclass(frozen=True)
class EvalRecord:
    key: str
    candidate_id: str
    values: tuple
    dataset_id: str
    target: str
    seed: int
    objectives: Objectives
    wall_time: float


def cache_key(candidate_id: str, dataset_id: str, target: str, seed: int) -> str:
    text = f"{candidate_id}|{dataset_id}|{target}|{seed}"
    return hashlib.sha1(text.encode()).hexdigest()


def default_cache_path() -> Path | None:
    root = os.environ.get(CACHE_ENV)
    return Path(root) / "evaluations.tsv" if root else None


class ResultCache:
    """Append-only, tab-separated store of learner results.

    One record per line with the columns of ``CACHE_FIELDS``; ``values`` is
    the candidate's decoded values joined by commas. Lines starting with
    ``#`` are comments. A torn last line (e.g. from a killed writer) is cut
    off on load.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._records: dict[str, EvalRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        good_bytes = 0
        with open(self.path, "rb") as fh:
            data = fh.read()
        for raw in data.splitlines(keepends=True):
            line = raw.decode("utf-8", errors="replace")
            if line.startswith("#"):
                good_bytes += len(raw)
                continue
            try:
                if not line.endswith("\n"):
                    raise ValueError("unterminated record")
                rec = _parse_record(line.rstrip("\n"))
            except (ValueError, IndexError):
                log.warning("truncating corrupt cache tail at byte %d of %s", good_bytes, self.path)
                with open(self.path, "r+b") as fh:
                    fh.truncate(good_bytes)
                break
            self._records[rec.key] = rec
            good_bytes += len(raw)

    def __len__(self):
        return len(self._records)

    def __contains__(self, key):
        return key in self._records

    def get(self, key: str) -> EvalRecord | None:
        return self._records.get(key)

    def records(self) -> list[EvalRecord]:
        return list(self._records.values())

    def put(self, rec: EvalRecord) -> None:
        with self._lock:
            if rec.key in self._records:
                return
            self._records[rec.key] = rec
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                new = not self.path.exists()
                with open(self.path, "a") as fh:
                    if new:
                        fh.write("# " + "\t".join(CACHE_FIELDS) + "\n")
                    fh.write(_format_record(rec) + "\n")

    def merge(self, records: Iterable[EvalRecord]) -> None:
        for rec in records:
            self.put(rec)

    def clear(self) -> None:
        with self._lock:
            self._records.clear()
            if self.path is not None and self.path.exists():
                self.path.unlink()


def _format_record(r: EvalRecord) -> str:
    o = r.objectives
    return "\t".join((
        r.key, ",".join(str(v) for v in r.values), r.dataset_id, r.target, str(r.seed),
        repr(o.mre), repr(o.pred40), repr(o.sa), f"{r.wall_time:.6f}",
    ))


def _parse_record(line: str) -> EvalRecord:
    f = line.split("\t")
    if len(f) != len(CACHE_FIELDS):
        raise ValueError(f"expected {len(CACHE_FIELDS)} fields, got {len(f)}")
    values = tuple(_parse_value(v) for v in f[1].split(","))
    obj = Objectives(float(f[5]), float(f[6]), float(f[7]))
    if not all(math.isfinite(x) for x in (obj.mre, obj.pred40, obj.sa)):
        raise ValueError("non-finite objective")
    # candidate id is not stored separately: the key already binds it
    return EvalRecord(f[0], "", values, f[2], f[3], int(f[4]), obj, float(f[8]))


def _parse_value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


@dataclass(frozen=True)
class ForecastTask:
    """One (project, target) pair with its rolling splits."""

    series: ProjectSeries
    target: str
    splits: tuple[TrainTestSplit, ...]

    @classmethod
    def build(cls, series: ProjectSeries, target: str, **kw) -> "ForecastTask":
        return cls(series, target, tuple(build_splits(series, target, **kw)))

    @property
    def dataset_id(self) -> str:
        return self.series.dataset_id


def learner_seed(seed: int, candidate_id: str) -> int:
    return int(hashlib.sha1(f"{seed}:{candidate_id}".encode()).hexdigest()[:8], 16)


def forecast(params: forest.ForestParams, task: ForecastTask, seed: int):
    """Train once per split; return (predictions, actuals, guesses)."""
    rng = np.random.default_rng(seed)
    preds, actuals, guesses = [], [], []
    for split in task.splits:
        Xtr, ytr, Xte, yte = design(task.series, split)
        model = forest.fit(params, Xtr, ytr, seed=rng)
        preds.extend(forest.predict(model, Xte))
        actuals.extend(yte)
        guesses.extend(naive_guesses(ytr, len(yte)))
    return np.asarray(preds), np.asarray(actuals), np.asarray(guesses)


def score(predictions, actuals, guesses) -> Objectives:
    mres = [mre(a, p) for a, p in zip(actuals, predictions)]
    return Objectives(float(np.median(mres)), pred40(mres), sa(predictions, actuals, guesses))


class Evaluator:
    """Per-run evaluation front end: budget counters, memo and the comparison pool.

    Subclasses implement ``_compute``. ``better`` normalizes goals over every
    vector this run has seen so far.
    """

    def __init__(self, goals: GoalSpec = SEARCH_GOALS, budget: EvalBudget | None = None):
        self.goals = goals
        self.budget = budget if budget is not None else EvalBudget()
        self._memo: dict[str, Objectives] = {}
        self._order: list[Candidate] = []
        self._lo = None
        self._hi = None
        self._phase = "run"
        self.requests: Counter = Counter()
        self.charges: Counter = Counter()

    def _compute(self, c: Candidate) -> Objectives:
        raise NotImplementedError

    @contextlib.contextmanager
    def phase(self, name: str):
        prev, self._phase = self._phase, name
        try:
            yield self
        finally:
            self._phase = prev

    def objectives(self, c: Candidate, certify: bool = False) -> Objectives:
        self.requests[self._phase] += 1
        obj = self._memo.get(c.id)
        if obj is None:
            obj = self._compute(c)
            self._memo[c.id] = obj
            self._order.append(c)
            self.budget.charge(certify)
            if not certify:
                self.charges[self._phase] += 1
            v = obj.vector(self.goals)
            self._lo = v if self._lo is None else np.minimum(self._lo, v)
            self._hi = v if self._hi is None else np.maximum(self._hi, v)
        return obj

    def __call__(self, c: Candidate) -> np.ndarray:
        return self.objectives(c).vector(self.goals)

    def certify(self, candidates: Sequence[Candidate]) -> list[tuple[Candidate, Objectives]]:
        """Score candidates for reporting only; misses are charged to ``e_plus``."""
        return [(c, self.objectives(c, certify=True)) for c in candidates]

    def seen(self, c: Candidate) -> bool:
        return c.id in self._memo

    def evaluated(self) -> list[tuple[Candidate, np.ndarray]]:
        return [(c, self._memo[c.id].vector(self.goals)) for c in self._order]

    @property
    def bounds(self):
        if self._lo is None:
            return None
        return self._lo, self._hi

    def better(self, a, b) -> bool:
        return better(a, b, self.goals, self.bounds)


class FunctionEvaluator(Evaluator):
    """Wrap any ``candidate -> goal values`` callable (synthetic landscapes, tests)."""

    def __init__(self, fn: Callable[[Candidate], Sequence[float]], goals: GoalSpec = SEARCH_GOALS,
                 budget: EvalBudget | None = None):
        super().__init__(goals, budget)
        self.fn = fn

    def _compute(self, c: Candidate) -> Objectives:
        v = [float(x) for x in self.fn(c)]
        if len(v) != len(self.goals):
            raise EvaluationError(c.id, f"expected {len(self.goals)} goal values")
        fields = dict(zip(self.goals.names, v))
        return Objectives(fields.get("mre", 0.0), fields.get("pred40", 0.0), fields.get("sa", 0.0),
                          fields.get("d2h"))


class ForestEvaluator(Evaluator):
    """Score a candidate by tuning the forest on a task's rolling splits."""

    def __init__(self, task: ForecastTask, space: ConfigSpace, seed: int = 0,
                 cache: ResultCache | None = None, budget: EvalBudget | None = None,
                 goals: GoalSpec = SEARCH_GOALS):
        super().__init__(goals, budget)
        self.task = task
        self.space = space
        self.seed = int(seed)
        self.cache = cache if cache is not None else ResultCache()
        self.hits = 0
        self.misses = 0

    def key(self, c: Candidate) -> str:
        return cache_key(c.id, self.task.dataset_id, self.task.target, self.seed)

    def _compute(self, c: Candidate) -> Objectives:
        key = self.key(c)
        rec = self.cache.get(key)
        if rec is not None:
            self.hits += 1
            return rec.objectives
        self.misses += 1
        rec = evaluate_record(c, self.space, self.task, self.seed)
        self.cache.put(rec)
        return rec.objectives


def evaluate_record(c: Candidate, space: ConfigSpace, task: ForecastTask, seed: int) -> EvalRecord:
    """Train and score without touching any cache or budget."""
    t0 = time.perf_counter()
    try:
        params = forest.ForestParams.from_mapping(c.as_dict(space))
        obj = score(*forecast(params, task, learner_seed(seed, c.id)))
    except (ValueError, KeyError, FloatingPointError) as exc:
        raise EvaluationError(c.id, str(exc)) from exc
    return EvalRecord(cache_key(c.id, task.dataset_id, task.target, seed), c.id, c.values,
                      task.dataset_id, task.target, seed, obj, time.perf_counter() - t0)


def default_candidate(space: ConfigSpace) -> Candidate:
    """The untuned learner: 100 trees, leaves of 1, no impurity floor, deepest grid depth, squared."""
    want = {"n_estimators": 100, "min_sample_leaves": 1, "min_impurity_decrease": 0.0,
            "criterion": "squared"}
    idx = []
    for p in space.params:
        if p.name in want:
            idx.append(p.index(want[p.name]))
        elif p.name == "max_depth":
            idx.append(p.size - 1)
        else:
            idx.append(0)
    return space.decode(idx)

