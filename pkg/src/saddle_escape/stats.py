"""Medians with percentile-bootstrap intervals and the Wilcoxon signed-rank test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

EXACT_MAX_N = 20


@dataclass(frozen=True)
class StatsSummary:
    n: int
    median: float
    ci_low: float
    ci_high: float
    resamples: int = 10_000
    seed: int = 0


def _percentile(sorted_vals: np.ndarray, q: float) -> float:
    # linear interpolation that tolerates +inf (censored) entries
    pos = q / 100.0 * (len(sorted_vals) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(sorted_vals) - 1)
    a, b = float(sorted_vals[lo]), float(sorted_vals[hi])
    if a == b or pos == lo:
        return a
    return a + (b - a) * (pos - lo)


def bootstrap_median_ci(samples, resamples: int = 10_000, seed: int = 0) -> StatsSummary:
    """Sample median with a 95% percentile-bootstrap interval.

    Censored observations may be passed as ``inf``; they never turn into a
    finite value, and a median or bound that lands on them is ``inf``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    n = x.size
    med = float(np.median(x))
    rng = np.random.default_rng(seed)
    meds = np.empty(resamples)
    chunk = max(1, 2_000_000 // n)
    for start in range(0, resamples, chunk):
        stop = min(resamples, start + chunk)
        idx = rng.integers(0, n, size=(stop - start, n))
        meds[start:stop] = np.median(x[idx], axis=1)
    meds.sort()
    lo, hi = _percentile(meds, 2.5), _percentile(meds, 97.5)
    return StatsSummary(n, med, min(lo, med), max(hi, med), resamples, seed)


def _signed_rank_stat(diffs):
    d = np.asarray(diffs, dtype=float).ravel()
    d = d[d != 0]
    if d.size == 0:
        raise ValueError("all differences are zero; the signed-rank test is undefined")
    if d.size < 5:
        raise ValueError("need at least 5 non-zero differences")
    ranks = rankdata(np.abs(d))
    return d, ranks, float(ranks[d > 0].sum())


def _exact_p(ranks: np.ndarray, w_plus: float) -> float:
    doubled = np.rint(2 * ranks).astype(int)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] = counts[r:] + counts[: total + 1 - r]
    probs = counts / counts.sum()
    w = int(round(2 * w_plus))
    lower = probs[: w + 1].sum()
    upper = probs[w:].sum()
    return float(min(1.0, 2.0 * min(lower, upper)))


def _normal_p(ranks: np.ndarray, w_plus: float) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    _, t = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(t**3 - t)) / 48.0
    dev = abs(w_plus - mean) - 0.5
    if dev <= 0:
        return 1.0
    return float(min(1.0, 2.0 * ndtr(-dev / math.sqrt(var))))


def wilcoxon_signed_rank(paired_diffs, method: str = "auto") -> float:
    """Two-sided signed-rank p-value; zero differences are dropped.

    ``method="auto"`` enumerates the null distribution for up to 20
    differences and uses the continuity-corrected normal approximation above.
    """
    _, ranks, w_plus = _signed_rank_stat(paired_diffs)
    if method == "auto":
        method = "exact" if ranks.size <= EXACT_MAX_N else "normal"
    if method == "exact":
        return _exact_p(ranks, w_plus)
    if method == "normal":
        return _normal_p(ranks, w_plus)
    raise ValueError(f"unknown method {method!r}")
