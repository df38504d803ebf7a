"""Optimizer registry, single tuning runs and the full benchmark loop."""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import baselines, sneak
from .baselines import BaselineParams
from .evaluation import ForecastTask, ForestEvaluator, ResultCache, default_candidate
from .health import TARGETS, load_series
from .objectives import rank_d2h
from .space import Candidate, ConfigSpace, default_space
from .sway import sway_best

log = logging.getLogger(__name__)

OPTIMIZERS = (
    "default", "rs", "gs", "de", "flash", "sway",
    "nisneak+any", "nisneak+sany", "nisneak+all", "nisneak+sall",
)


def derive_seed(*parts) -> int:
    text = ":".join(str(p) for p in parts)
    return int(hashlib.sha1(text.encode()).hexdigest()[:8], 16)


def repeat_seed(global_seed: int, repeat: int) -> int:
    return derive_seed(global_seed, "repeat", repeat)


def check_optimizer(name: str) -> str:
    if name not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {name!r}; valid names: {', '.join(OPTIMIZERS)}")
    return name


def run_optimizer(name: str, pool: Sequence[Candidate], evaluator: ForestEvaluator,
                  space: ConfigSpace, seed: int, params: BaselineParams | None = None) -> Candidate:
    """Dispatch one registry name. The returned candidate is always scored."""
    params = params or BaselineParams()
    check_optimizer(name)
    if name == "default":
        best = default_candidate(space)
    elif name == "rs":
        best = baselines.random_search(pool, evaluator, params.budget_evals, seed)
    elif name == "gs":
        best = baselines.grid_search(space, evaluator, params.gs_strides, seed)
    elif name == "de":
        best = baselines.differential_evolution(space, evaluator, params, seed)
    elif name == "flash":
        best = baselines.flash(pool, evaluator, space, params.flash_initial,
                               params.budget_evals, seed)
    elif name == "sway":
        best = sway_best(pool, evaluator, space, seed=seed)
    else:
        best = sneak.nisneak(pool, evaluator, space, name.split("+", 1)[1], seed)
    evaluator.certify([best])
    return best


@dataclass
class RunRecord:
    dataset: str
    target: str
    optimizer: str
    repeat: int
    seed: int
    candidate_id: str = ""
    values: dict = field(default_factory=dict)
    mre: float | None = None
    pred40: float | None = None
    sa: float | None = None
    d2h: float | None = None  # rank of the pick among everything this run scored
    e: int = 0
    e_plus: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        return cls(**json.loads(line))


def tune(name: str, task: ForecastTask, space: ConfigSpace, seed: int, pool_size: int = 10_000,
         cache: ResultCache | None = None, eval_seed: int | None = None,
         params: BaselineParams | None = None, repeat: int = 0) -> tuple[RunRecord, float]:
    """One optimizer run on one task. Returns the record and its wall time.

    ``seed`` drives the candidate pool and the optimizer; ``eval_seed``
    (default ``seed``) drives learner training, so evaluations can be shared
    between repeats that use different search seeds.
    """
    check_optimizer(name)
    eval_seed = seed if eval_seed is None else eval_seed
    rec = RunRecord(task.series.project_id, task.target, name, repeat, seed)
    t0 = time.perf_counter()
    evaluator = ForestEvaluator(task, space, seed=eval_seed, cache=cache)
    try:
        pool = space.sample(pool_size, derive_seed(seed, "pool")) if name != "default" else []
        best = run_optimizer(name, pool, evaluator, space, derive_seed(seed, name), params)
    except Exception as exc:  # recorded per run; the bench keeps going
        log.exception("run %s/%s/%s/%d failed", rec.dataset, rec.target, name, repeat)
        rec.error = f"{type(exc).__name__}: {exc}"
        rec.e, rec.e_plus = evaluator.budget.e, evaluator.budget.e_plus
        return rec, time.perf_counter() - t0
    obj = evaluator.objectives(best)
    ranked = dict((c.id, d) for c, d in rank_d2h(evaluator.evaluated(), evaluator.goals))
    rec.candidate_id = best.id
    rec.values = best.as_dict(space)
    rec.mre, rec.pred40, rec.sa = obj.mre, obj.pred40, obj.sa
    rec.d2h = ranked[best.id]
    rec.e, rec.e_plus = evaluator.budget.e, evaluator.budget.e_plus
    return rec, time.perf_counter() - t0


@dataclass
class ExperimentPlan:
    datasets: tuple[str, ...]
    targets: tuple[str, ...] = tuple(TARGETS)
    optimizers: tuple[str, ...] = ("rs", "gs", "de", "flash", "sway", "nisneak+sall")
    repeats: int = 20
    pool_size: int = 10_000
    seed: int = 0
    baseline: BaselineParams = field(default_factory=BaselineParams)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not self.optimizers:
            raise ValueError("no optimizers")
        if not self.datasets:
            raise ValueError("no datasets")
        for name in self.optimizers:
            check_optimizer(name)
        for t in self.targets:
            if t not in TARGETS:
                raise ValueError(f"unknown target {t!r}; expected one of {sorted(TARGETS)}")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentPlan":
        """Read ``key = value`` lines (an optional ``[plan]`` header is allowed).

        Lists are comma separated; dataset paths are relative to the file.

        Recognized keys: datasets, targets, optimizers, repeats, pool_size,
        seed, budget_evals, flash_initial, de_generations.
        """
        path = Path(path)
        text = path.read_text()
        if not text.lstrip().startswith("[plan]"):
            text = "[plan]\n" + text
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ValueError(f"bad plan file {path}: {exc}") from None
        sec = cp["plan"]

        def items(key):
            return tuple(s.strip() for s in sec[key].split(",") if s.strip())

        kw = {}
        if "datasets" in sec:
            kw["datasets"] = tuple(str((path.parent / p).resolve()) if not Path(p).is_absolute() else p
                                   for p in items("datasets"))
        for key in ("targets", "optimizers"):
            if key in sec:
                kw[key] = items(key)
        for key in ("repeats", "pool_size", "seed"):
            if key in sec:
                kw[key] = sec.getint(key)
        bp = {k: sec.getint(k) for k in ("budget_evals", "flash_initial", "de_generations") if k in sec}
        if bp:
            kw["baseline"] = BaselineParams(**bp)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        if "datasets" not in kw:
            raise ValueError(f"{path}: plan names no datasets")
        return cls(**kw)


def _bench_job(args):
    name, path, target, repeat, plan, cache_path = args
    series = load_series(path)
    task = ForecastTask.build(series, target)
    cache = ResultCache(cache_path)
    return tune(name, task, default_space(), repeat_seed(plan.seed, repeat), plan.pool_size,
                cache, eval_seed=plan.seed, params=plan.baseline, repeat=repeat)


def bench(plan: ExperimentPlan, cache: ResultCache | None = None, jobs: int = 1,
          progress: Callable[[RunRecord, float], None] | None = None) -> list[tuple[RunRecord, float]]:
    """Run the whole cross product; records come back in a fixed order."""
    jobs_list = [(name, path, target, r)
                 for path in plan.datasets
                 for target in plan.targets
                 for r in range(plan.repeats)
                 for name in plan.optimizers]
    space = default_space()
    out = []
    if jobs <= 1:
        cache = cache if cache is not None else ResultCache()
        tasks = {}
        for name, path, target, r in jobs_list:
            key = (path, target)
            if key not in tasks:
                tasks[key] = ForecastTask.build(load_series(path), target)
            rec, wall = tune(name, tasks[key], space, repeat_seed(plan.seed, r), plan.pool_size,
                             cache, eval_seed=plan.seed, params=plan.baseline, repeat=r)
            if progress:
                progress(rec, wall)
            out.append((rec, wall))
        return out
    cache_path = cache.path if cache is not None else None
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        args = [(n, p, t, r, plan, cache_path) for n, p, t, r in jobs_list]
        for rec, wall in ex.map(_bench_job, args):
            if progress:
                progress(rec, wall)
            out.append((rec, wall))
    return out


def write_runs(records: Sequence[RunRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_runs(path: str | Path) -> list[RunRecord]:
    with open(path) as fh:
        return [RunRecord.from_json(line) for line in fh if line.strip()]

