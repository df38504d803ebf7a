"""Median/IQR summaries and Friedman + Nemenyi ranking of treatments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Nemenyi critical values q_0.05 for k = 2..20 treatments: the studentized
# range quantile at infinite degrees of freedom divided by sqrt(2)
# (standard tabulated values).
Q_05 = {
    2: 1.960, 3: 2.344, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.948, 8: 3.031,
    9: 3.102, 10: 3.164, 11: 3.219, 12: 3.268, 13: 3.313, 14: 3.354,
    15: 3.391, 16: 3.426, 17: 3.458, 18: 3.489, 19: 3.517, 20: 3.544,
}


def median_iqr(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, float)
    if v.size == 0:
        raise ValueError("median_iqr of nothing")
    q25, q50, q75 = np.percentile(v, [25, 50, 75])
    return float(q50), float(q75 - q25)


def _gamma_series(a: float, x: float) -> float:
    # regularized lower incomplete gamma P(a, x) for x < a + 1
    term = total = 1.0 / a
    ap = a
    for _ in range(1000):
        ap += 1
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-15:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    # regularized upper incomplete gamma Q(a, x) for x >= a + 1 (modified Lentz)
    tiny = 1e-300
    b = x + 1 - a
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-15:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x <= 0:
        return 1.0
    a, h = df / 2.0, x / 2.0
    if h < a + 1:
        return max(0.0, 1.0 - _gamma_series(a, h))
    return _gamma_cf(a, h)


def _check_table(table) -> np.ndarray:
    t = np.asarray(table, float)
    if t.ndim != 2 or t.shape[0] < 2 or t.shape[1] < 2:
        raise ValueError("need a treatments x blocks table with at least 2 of each")
    if not np.all(np.isfinite(t)):
        raise ValueError("table has missing or non-finite cells")
    return t


def block_ranks(table, lower_is_better: bool = True) -> np.ndarray:
    """Rank treatments within each block (column); ties share the average rank."""
    t = _check_table(table)
    t = t if lower_is_better else -t
    k, n = t.shape
    ranks = np.empty_like(t)
    for b in range(n):
        col = t[:, b]
        order = np.argsort(col, kind="stable")
        r = np.empty(k)
        i = 0
        while i < k:
            j = i
            while j + 1 < k and col[order[j + 1]] == col[order[i]]:
                j += 1
            r[order[i:j + 1]] = (i + j) / 2 + 1
            i = j + 1
        ranks[:, b] = r
    return ranks


def mean_ranks(table, lower_is_better: bool = True) -> np.ndarray:
    return block_ranks(table, lower_is_better).mean(axis=1)


def friedman(table, lower_is_better: bool = True) -> tuple[float, float]:
    """Friedman chi-square statistic and its p-value (k - 1 degrees of freedom)."""
    t = _check_table(table)
    k, n = t.shape
    R = mean_ranks(t, lower_is_better)
    stat = 12 * n / (k * (k + 1)) * (np.sum(R ** 2) - k * (k + 1) ** 2 / 4)
    stat = max(float(stat), 0.0)
    return stat, chi2_sf(stat, k - 1)


def critical_distance(k: int, n: int, alpha: float = 0.05) -> float:
    if alpha != 0.05:
        raise ValueError("only alpha = 0.05 is tabulated")
    if k not in Q_05:
        raise ValueError(f"no Nemenyi constant for k = {k} (supported: 2..20)")
    return Q_05[k] * math.sqrt(k * (k + 1) / (6 * n))


def tiers(ranks: Sequence[float], cd: float) -> list[int]:
    """Contiguous groups over mean-rank order; 1 is the best tier.

    Walking from the best rank, a new tier starts whenever a treatment is
    at least ``cd`` behind the first member of the current tier.
    """
    ranks = np.asarray(ranks, float)
    order = np.argsort(ranks, kind="stable")
    out = [0] * len(ranks)
    tier, head = 1, ranks[order[0]]
    for i in order:
        if ranks[i] - head >= cd:
            tier += 1
            head = ranks[i]
        out[i] = tier
    return out


def nemenyi(table, alpha: float = 0.05, lower_is_better: bool = True):
    """(mean ranks, critical distance, tier per treatment)."""
    t = _check_table(table)
    k, n = t.shape
    R = mean_ranks(t, lower_is_better)
    cd = critical_distance(k, n, alpha)
    return R, cd, tiers(R, cd)


@dataclass(frozen=True)
class RankRow:
    treatment: str
    median: float
    iqr: float
    mean_rank: float
    tier: int


def rank_report(names: Sequence[str], table, lower_is_better: bool = True,
                alpha: float = 0.05) -> tuple[list[RankRow], float, float]:
    """Summarize a treatments x blocks table.

    Nemenyi tiers are computed only when the Friedman test rejects at
    ``alpha``; otherwise every treatment shares tier 1. Returns the rows
    (best mean rank first) with the Friedman statistic and p-value.
    """
    t = _check_table(table)
    if len(names) != t.shape[0]:
        raise ValueError("one name per treatment row")
    stat, p = friedman(t, lower_is_better)
    R = mean_ranks(t, lower_is_better)
    tier = nemenyi(t, alpha, lower_is_better)[2] if p < alpha else [1] * len(names)
    rows = [RankRow(nm, *median_iqr(t[i]), float(R[i]), tier[i]) for i, nm in enumerate(names)]
    rows.sort(key=lambda r: (r.mean_rank, r.treatment))
    return rows, stat, p
