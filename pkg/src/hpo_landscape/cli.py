"""Command line entry point: tune, bench, fixture, report, cache."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .evaluation import CACHE_ENV, ForecastTask, ResultCache, default_cache_path
from .experiment import OPTIMIZERS, ExperimentPlan, bench, read_runs, tune, write_runs
from .health import SeriesError, TARGETS, load_series, synthetic_series
from .report import write_report
from .space import default_space, load_space

log = logging.getLogger("hpo_landscape")


def _cache(arg: str | None) -> ResultCache:
    if arg:
        return ResultCache(Path(arg) / "evaluations.tsv")
    return ResultCache(default_cache_path())


def cmd_tune(args) -> int:
    series = load_series(args.dataset)
    task = ForecastTask.build(series, args.target)
    space = load_space(args.space) if args.space else default_space()
    rec, wall = tune(args.optimizer, task, space, args.seed, args.pool, _cache(args.cache))
    print(rec.to_json())
    log.info("wall time %.2fs", wall)
    return 0 if rec.ok else 1


def cmd_bench(args) -> int:
    overrides = dict(
        optimizers=tuple(args.optimizer) if args.optimizer else None,
        targets=tuple(args.target) if args.target else None,
        repeats=args.repeats, seed=args.seed, pool_size=args.pool,
        datasets=tuple(args.dataset) if args.dataset else None,
    )
    if args.plan:
        plan = ExperimentPlan.from_file(args.plan, **overrides)
    else:
        plan = ExperimentPlan(**{k: v for k, v in overrides.items() if v is not None})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = []

    def progress(rec, wall):
        status = "ok" if rec.ok else "FAILED"
        log.info("%s %s %s r%d e=%d %s %.2fs", rec.dataset, rec.target, rec.optimizer,
                 rec.repeat, rec.e, status, wall)
        timings.append((rec, wall))

    results = bench(plan, _cache(args.cache), jobs=args.jobs, progress=progress)
    records = [r for r, _ in results]
    write_runs(records, out / "runs.jsonl")
    write_report(records, out, plan.optimizers, plan.targets, figures=not args.no_figures)
    # wall times vary run to run, so they live apart from the reproducible reports
    with open(out / "timings.tsv", "w") as fh:
        fh.write("dataset\ttarget\toptimizer\trepeat\tseconds\n")
        for rec, wall in results:
            fh.write(f"{rec.dataset}\t{rec.target}\t{rec.optimizer}\t{rec.repeat}\t{wall:.3f}\n")
    failed = sum(not r.ok for r in records)
    print(json.dumps({"runs": len(records), "failed": failed, "out": str(out)}))
    return 0 if failed == 0 else 1


def cmd_fixture(args) -> int:
    series = synthetic_series(args.months, seed=args.seed, project_id=Path(args.out).stem)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(series.to_csv())
    print(args.out)
    return 0


def cmd_report(args) -> int:
    records = read_runs(args.runs)
    write_report(records, args.out, figures=not args.no_figures)
    print(args.out)
    return 0


def cmd_cache(args) -> int:
    cache = _cache(args.cache)
    if cache.path is None:
        raise SeriesError(f"no cache directory: pass --cache or set {CACHE_ENV}")
    if args.action == "clear":
        n = len(cache)
        cache.clear()
        print(json.dumps({"cleared": n, "path": str(cache.path)}))
        return 0
    by = {}
    for rec in cache.records():
        key = f"{rec.dataset_id}/{rec.target}/{rec.seed}"
        by[key] = by.get(key, 0) + 1
    print(json.dumps({"path": str(cache.path), "records": len(cache), "by_task": by},
                     indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hpo-landscape",
                                description="Tune forest forecasters of project health.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--cache", help=f"cache directory (default: ${CACHE_ENV})")

    t = sub.add_parser("tune", help="run one optimizer on one dataset and target")
    t.add_argument("--optimizer", required=True, help="one of: " + ", ".join(OPTIMIZERS))
    t.add_argument("--dataset", required=True, help="monthly CSV")
    t.add_argument("--target", default="commits", choices=sorted(TARGETS))
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--pool", type=int, default=10_000)
    t.add_argument("--space", help="INI file describing the search space")
    common(t)
    t.set_defaults(func=cmd_tune)

    b = sub.add_parser("bench", help="run the full comparison and write reports")
    b.add_argument("--plan", help="key = value plan file")
    b.add_argument("--dataset", action="append")
    b.add_argument("--optimizer", action="append")
    b.add_argument("--target", action="append", choices=sorted(TARGETS))
    b.add_argument("--repeats", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--pool", type=int)
    b.add_argument("--out", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--no-figures", action="store_true")
    common(b)
    b.set_defaults(func=cmd_bench)

    f = sub.add_parser("fixture", help="write a synthetic monthly series")
    f.add_argument("--months", type=int, default=40)
    f.add_argument("--seed", type=int, default=1)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fixture)

    r = sub.add_parser("report", help="rebuild tables and figures from runs.jsonl")
    r.add_argument("--runs", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_report)

    c = sub.add_parser("cache", help="inspect or clear the evaluation cache")
    c.add_argument("action", choices=("inspect", "clear"))
    common(c)
    c.set_defaults(func=cmd_cache)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s", datefmt="%H:%M:%S")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:  # SeriesError is a ValueError
        print(f"hpo-landscape: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
