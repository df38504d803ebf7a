"""Per-metric ranked tables (Markdown and TSV) and summary figures."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import RunRecord  # noqa: E402
from .objectives import SEARCH_GOALS, rank_d2h  # noqa: E402
from .stats import RankRow, median_iqr, rank_report  # noqa: E402

METRICS = ("mre", "pred40", "sa", "d2h")
LOWER_IS_BETTER = {"mre": True, "pred40": False, "sa": False, "d2h": True}


class _Pick:
    # rank_d2h wants objects with an ``id``
    def __init__(self, ident: str):
        self.id = ident


def block_d2h(records: Sequence[RunRecord]) -> dict[tuple, float]:
    """D2H of each optimizer's pick within its (dataset, target, repeat) block.

    Every pick in a block is ranked against the others under the Zitzler
    preference, so the value is comparable across optimizers.
    """
    blocks = defaultdict(list)
    for r in records:
        if r.ok:
            blocks[(r.dataset, r.target, r.repeat)].append(r)
    out = {}
    for key, recs in blocks.items():
        scored = [(_Pick(r.optimizer), np.array([r.mre, r.pred40, r.sa])) for r in recs]
        for pick, d in rank_d2h(scored, SEARCH_GOALS):
            out[key + (pick.id,)] = d
    return out


def metric_table(records: Sequence[RunRecord], metric: str, target: str,
                 optimizers: Sequence[str]):
    """(treatments x blocks array, block keys, incomplete block keys) for one metric and target."""
    d2h = block_d2h(records) if metric == "d2h" else None
    cells = defaultdict(dict)
    for r in records:
        if r.target != target or not r.ok:
            continue
        key = (r.dataset, r.repeat)
        v = d2h[(r.dataset, r.target, r.repeat, r.optimizer)] if d2h is not None else getattr(r, metric)
        cells[key][r.optimizer] = v
    all_blocks = sorted({(r.dataset, r.repeat) for r in records if r.target == target})
    full = [b for b in all_blocks if all(o in cells[b] for o in optimizers)]
    partial = [b for b in all_blocks if b not in full]
    table = np.array([[cells[b][o] for b in full] for o in optimizers], float).reshape(len(optimizers), len(full))
    return table, full, partial


def _fmt(x: float) -> str:
    return "nan" if x is None or not math.isfinite(x) else f"{x:.4f}"


def summarize(records: Sequence[RunRecord], optimizers: Sequence[str] | None = None,
              targets: Sequence[str] | None = None) -> list[dict]:
    """One row per (metric, target, optimizer) with median, IQR, mean rank and tier."""
    optimizers = list(optimizers or dict.fromkeys(r.optimizer for r in records))
    targets = list(targets or dict.fromkeys(r.target for r in records))
    rows = []
    for metric in METRICS:
        for target in targets:
            table, full, partial = metric_table(records, metric, target, optimizers)
            lower = LOWER_IS_BETTER[metric]
            if table.shape[1] >= 2 and len(optimizers) >= 2:
                ranked, stat, p = rank_report(optimizers, table, lower)
            else:
                # too few blocks to rank: one shared tier
                ranked, stat, p = [], float("nan"), float("nan")
                for i, o in enumerate(optimizers):
                    med, iqr = median_iqr(table[i]) if table.shape[1] else (float("nan"), float("nan"))
                    ranked.append(RankRow(o, med, iqr, float("nan"), 1))
            for r in ranked:
                rows.append(dict(metric=metric, target=target, optimizer=r.treatment,
                                 median=r.median, iqr=r.iqr, mean_rank=r.mean_rank, tier=r.tier,
                                 blocks=table.shape[1], incomplete=len(partial),
                                 friedman=stat, p=p))
    return rows


def to_tsv(rows: Sequence[dict], metric: str) -> str:
    cols = ("target", "optimizer", "median", "iqr", "mean_rank", "tier", "blocks",
            "incomplete", "friedman", "p")
    lines = ["\t".join(cols)]
    for r in rows:
        if r["metric"] != metric:
            continue
        lines.append("\t".join(_fmt(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def to_markdown(rows: Sequence[dict], metric: str) -> str:
    """Optimizers down, targets across; each cell is ``median (IQR) tier``. Tier 1 is best."""
    mine = [r for r in rows if r["metric"] == metric]
    targets = list(dict.fromkeys(r["target"] for r in mine))
    optimizers = list(dict.fromkeys(r["optimizer"] for r in mine))
    cell = {(r["target"], r["optimizer"]): r for r in mine}
    arrow = "lower is better" if LOWER_IS_BETTER[metric] else "higher is better"
    out = [f"## {metric} ({arrow})", "",
           "| optimizer | " + " | ".join(targets) + " |",
           "|---|" + "---|" * len(targets)]
    for o in optimizers:
        parts = []
        for t in targets:
            r = cell.get((t, o))
            parts.append("" if r is None else f"{_fmt(r['median'])} ({_fmt(r['iqr'])}) {r['tier']}")
        out.append(f"| {o} | " + " | ".join(parts) + " |")
    out.append("")
    for t in targets:
        r = next(x for x in mine if x["target"] == t)
        out.append(f"- {t}: Friedman {_fmt(r['friedman'])}, p = {_fmt(r['p'])}, "
                   f"{r['blocks']} blocks, {r['incomplete']} incomplete")
    return "\n".join(out) + "\n"


def plot_metric(records: Sequence[RunRecord], metric: str, optimizers: Sequence[str],
                targets: Sequence[str], path: str | Path) -> None:
    """Box plots of one metric, one panel per target."""
    fig, axes = plt.subplots(1, len(targets), figsize=(3.2 * len(targets) + 1, 3.4),
                             squeeze=False, sharey=True)
    for ax, target in zip(axes[0], targets):
        table, _, _ = metric_table(records, metric, target, optimizers)
        data = [row[np.isfinite(row)] for row in table]
        ax.boxplot(data, showfliers=False)
        ax.set_xticks(range(1, len(optimizers) + 1), optimizers, rotation=60, ha="right", fontsize=7)
        ax.set_title(target, fontsize=9)
        ax.grid(axis="y", alpha=0.3)
    axes[0][0].set_ylabel(metric)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def write_report(records: Sequence[RunRecord], out_dir: str | Path,
                 optimizers: Sequence[str] | None = None, targets: Sequence[str] | None = None,
                 figures: bool = True) -> list[Path]:
    """Write ``<metric>.md``, ``<metric>.tsv``, ``summary.json`` and optional ``<metric>.png``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    optimizers = list(optimizers or dict.fromkeys(r.optimizer for r in records))
    targets = list(targets or dict.fromkeys(r.target for r in records))
    rows = summarize(records, optimizers, targets)
    written = []
    for metric in METRICS:
        for ext, text in (("md", to_markdown(rows, metric)), ("tsv", to_tsv(rows, metric))):
            p = out / f"{metric}.{ext}"
            p.write_text(text)
            written.append(p)
        if figures:
            p = out / f"{metric}.png"
            plot_metric(records, metric, optimizers, targets, p)
            written.append(p)
    failed = [r for r in records if not r.ok]
    summary = {
        "runs": len(records),
        "failed": len(failed),
        "failures": [dict(dataset=r.dataset, target=r.target, optimizer=r.optimizer,
                          repeat=r.repeat, error=r.error) for r in failed],
        "budget": {o: {"e": float(np.median([r.e for r in records if r.optimizer == o])),
                       "e_plus": float(np.median([r.e_plus for r in records if r.optimizer == o]))}
                   for o in optimizers if any(r.optimizer == o for r in records)},
    }
    p = out / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(p)
    return written
