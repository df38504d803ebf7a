"""Monthly project-health series: CSV loading, rolling splits, naive guesses."""

from __future__ import annotations

import csv
import hashlib
import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DATE_COLUMN = "dates"
INDICATORS = (
    "monthly_commits",
    "monthly_commit_comments",
    "monthly_contributors",
    "monthly_open_PRs",
    "monthly_closed_PRs",
    "monthly_merged_PRs",
    "monthly_PR_mergers",
    "monthly_PR_comments",
    "monthly_open_issues",
    "monthly_closed_issues",
    "monthly_issue_comments",
    "monthly_stargazer",
    "monthly_forks",
    "monthly_watchers",
)
TARGETS = {
    "commits": "monthly_commits",
    "closed_prs": "monthly_closed_PRs",
    "closed_issues": "monthly_closed_issues",
}
HORIZON = 12
MIN_TRAIN = 12


class SeriesError(ValueError):
    """Malformed project-health input."""


def _norm(name: str) -> str:
    return re.sub(r"[\s_]+", "_", name.strip().lower())


_CANON = {_norm(c): c for c in (DATE_COLUMN, *INDICATORS)}


def _parse_month(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d{4})-(\d{1,2})(?:-\d{1,2})?\s*", text)
    if not m or not 1 <= int(m.group(2)) <= 12:
        raise ValueError(text)
    return int(m.group(1)), int(m.group(2))


@dataclass(frozen=True)
class ProjectSeries:
    project_id: str
    months: tuple[tuple[int, int], ...]
    values: np.ndarray  # (months, len(INDICATORS)) non-negative counts

    def __len__(self):
        return len(self.months)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, INDICATORS.index(name)]

    @property
    def dataset_id(self) -> str:
        h = hashlib.sha1(self.values.astype(np.int64).tobytes())
        h.update(repr(self.months).encode())
        return f"{self.project_id}-{h.hexdigest()[:10]}"

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow((DATE_COLUMN, *INDICATORS))
        for (y, m), row in zip(self.months, self.values):
            w.writerow((f"{y:04d}-{m:02d}", *(int(v) for v in row)))
        return out.getvalue()


def load_series(path: str | Path, project_id: str | None = None) -> ProjectSeries:
    """Parse and validate one project's monthly CSV.

    Header names are matched case-insensitively with spaces and underscores
    treated alike, in any order. Extra columns are ignored.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesError(f"{path}: empty file") from None
        pos = {}
        for i, name in enumerate(header):
            canon = _CANON.get(_norm(name))
            if canon is not None:
                pos[canon] = i
        for col in (DATE_COLUMN, *INDICATORS):
            if col not in pos:
                raise SeriesError(f"{path}: missing column {col.replace('_', ' ')!r}")
        months, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            try:
                months.append(_parse_month(rec[pos[DATE_COLUMN]]))
            except (ValueError, IndexError):
                raise SeriesError(f"{path}:{lineno}: unparseable date") from None
            row = []
            for col in INDICATORS:
                try:
                    v = float(rec[pos[col]])
                except (ValueError, IndexError):
                    raise SeriesError(f"{path}:{lineno}: bad value in {col!r}") from None
                if v < 0 or v != int(v):
                    raise SeriesError(f"{path}:{lineno}: {col!r} must be a non-negative count")
                row.append(v)
            rows.append(row)
    if not rows:
        raise SeriesError(f"{path}: no data rows")
    order = sorted(range(len(months)), key=months.__getitem__)
    months = [months[i] for i in order]
    values = np.asarray([rows[i] for i in order], dtype=float)
    for k in range(1, len(months)):
        (y0, m0), (y1, m1) = months[k - 1], months[k]
        gap = (y1 - y0) * 12 + (m1 - m0)
        if gap == 0:
            raise SeriesError(f"{path}: duplicate month {y1:04d}-{m1:02d}")
        if gap != 1:
            raise SeriesError(f"{path}: gap before {y1:04d}-{m1:02d}")
    return ProjectSeries(project_id or path.stem, tuple(months), values)


@dataclass(frozen=True)
class TrainTestSplit:
    """Rows are 0-based month positions; ``test`` months are predicted."""

    train: range
    test: range
    target: str
    horizon: int = HORIZON


def build_splits(series: ProjectSeries | int, target: str, horizon: int = HORIZON,
                 min_train: int = MIN_TRAIN) -> list[TrainTestSplit]:
    """One split per month of the last ``horizon`` months.

    Month ``m`` (1-based) is predicted from rows ``1..m-horizon``; months
    whose prefix is shorter than ``min_train`` are skipped. For 40 months
    this predicts months 29..40 from prefixes of 17..28 rows.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {sorted(TARGETS)}")
    L = series if isinstance(series, int) else len(series)
    splits = []
    for m in range(max(L - horizon + 1, 1), L + 1):
        prefix = m - horizon
        if prefix >= min_train:
            splits.append(TrainTestSplit(range(0, prefix), range(m - 1, m), target, horizon))
    if not splits:
        raise SeriesError(
            f"series of {L} months is too short: need at least {horizon + min_train}"
        )
    return splits


def naive_guesses(train_targets: Sequence[float], n_test: int = 1) -> list[float]:
    """Median of the training-window targets, once per test month."""
    if len(train_targets) == 0:
        raise ValueError("no training targets")
    return [float(np.median(train_targets))] * n_test


def design(series: ProjectSeries, split: TrainTestSplit):
    """(X_train, y_train, X_test, y_test) for one split.

    X holds the 13 non-target indicators of the same month; y is the target.
    """
    col = TARGETS[split.target]
    j = INDICATORS.index(col)
    feats = [i for i in range(len(INDICATORS)) if i != j]
    tr, te = list(split.train), list(split.test)
    V = series.values
    return V[np.ix_(tr, feats)], V[tr, j], V[np.ix_(te, feats)], V[te, j]


def synthetic_series(n_months: int = 40, seed=0, project_id: str | None = None,
                     start: tuple[int, int] = (2018, 1)) -> ProjectSeries:
    """A seeded monthly count series with a shared latent activity level.

    Log-activity follows an AR(1) walk with drift; every indicator is a
    Poisson draw around its own scale times that activity, so indicators are
    correlated the way real project-health counts tend to be.
    """
    if n_months < HORIZON + MIN_TRAIN:
        raise SeriesError(f"fixtures need at least {HORIZON + MIN_TRAIN} months")
    rng = np.random.default_rng(seed)
    scale = np.array([25, 2, 3, 3, 1.5, 2, 1, 6, 4, 6, 20, 20, 6, 0.8])
    scale = scale * rng.lognormal(0.0, 0.4, size=scale.size)
    loading = rng.uniform(0.6, 1.4, size=scale.size)
    drift = rng.normal(0.0, 0.03)
    level = np.empty(n_months)
    z = rng.normal(0.0, 0.3)
    for t in range(n_months):
        z = 0.8 * z + drift + rng.normal(0.0, 0.35)
        level[t] = z
    rate = scale[None, :] * np.exp(loading[None, :] * level[:, None])
    values = rng.poisson(rate).astype(float)
    y0, m0 = start
    months = tuple(((y0 * 12 + m0 - 1 + t) // 12, (m0 - 1 + t) % 12 + 1) for t in range(n_months))
    return ProjectSeries(project_id or f"synthetic-{seed}", months, values)
