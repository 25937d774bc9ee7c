"""Statistics used across the analyses: rank correlation, two-sample tests,
effect size, bootstrap intervals and k-means partitioning.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import norm, rankdata

__all__ = [
    "spearman",
    "MannWhitneyResult",
    "mann_whitney_u",
    "cohens_d",
    "bootstrap_ci",
    "KMeansResult",
    "kmeans",
    "match_rate",
]

EXACT_MAX_PRODUCT = 64


def _clean(values, name="values") -> np.ndarray:
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


def spearman(x, y) -> float:
    """Spearman's rho: Pearson correlation of mid-ranks."""
    x, y = _clean(x, "x"), _clean(y, "y")
    if x.size != y.size or x.size < 2:
        raise ValueError("x and y need equal lengths of at least 2")
    rx, ry = rankdata(x) - (x.size + 1) / 2, rankdata(y) - (y.size + 1) / 2
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        raise ValueError("correlation undefined: one input has constant ranks")
    return max(-1.0, min(1.0, float(rx @ ry) / denom))


@dataclass(frozen=True)
class MannWhitneyResult:
    U: float
    p: float
    method: str


def mann_whitney_u(a, b, alternative: str = "two-sided", method: str = "auto") -> MannWhitneyResult:
    """Mann-Whitney U test; ``U`` is the statistic of sample ``a``.

    ``method='auto'`` enumerates every split of the pooled ranks when
    ``len(a) * len(b) <= 64`` and otherwise uses the tie-corrected normal
    approximation with continuity correction.
    """
    a, b = _clean(a, "a"), _clean(b, "b")
    if alternative not in ("two-sided", "less", "greater"):
        raise ValueError("alternative must be 'two-sided', 'less' or 'greater'")
    n, m = a.size, b.size
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:n].sum() - n * (n + 1) / 2)
    if method == "auto":
        method = "exact" if n * m <= EXACT_MAX_PRODUCT else "asymptotic"
    if method == "exact":
        p = _exact_p(ranks, n, u, alternative)
    elif method == "asymptotic":
        p = _normal_p(ranks, n, m, u, alternative)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MannWhitneyResult(u, min(1.0, p), method)


def _exact_p(ranks, n, u, alternative):
    # permutation distribution of U over all ways to draw sample a from the pooled ranks
    offset = n * (n + 1) / 2
    scaled = np.rint(2 * ranks).astype(np.int64)  # mid-ranks are multiples of 1/2
    u2 = round(2 * (u + offset))
    us = np.fromiter(
        (sum(c) for c in itertools.combinations(scaled.tolist(), n)), dtype=np.int64
    )
    total = us.size
    le = np.count_nonzero(us <= u2) / total
    ge = np.count_nonzero(us >= u2) / total
    if alternative == "less":
        return le
    if alternative == "greater":
        return ge
    return 2.0 * min(le, ge)


def _normal_p(ranks, n, m, u, alternative):
    big_n = n + m
    _, counts = np.unique(ranks, return_counts=True)
    tie = float(((counts**3) - counts).sum())
    var = n * m / 12.0 * ((big_n + 1) - tie / (big_n * (big_n - 1)))
    if var == 0:
        return 1.0
    mu = n * m / 2.0
    sd = math.sqrt(var)
    if alternative == "greater":
        return float(norm.sf((u - mu - 0.5) / sd))
    if alternative == "less":
        return float(norm.cdf((u - mu + 0.5) / sd))
    z = (abs(u - mu) - 0.5) / sd
    return float(2.0 * norm.sf(max(z, 0.0)))


def cohens_d(a, b) -> float:
    """Absolute standardized mean difference with pooled (n - 1) standard deviation."""
    a, b = _clean(a, "a"), _clean(b, "b")
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least 2 values")
    pooled = ((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2)
    if pooled == 0:
        raise ValueError("pooled standard deviation is zero")
    return abs(float(a.mean() - b.mean())) / math.sqrt(pooled)


def bootstrap_ci(
    values,
    statistic: Callable[[np.ndarray], float] = np.mean,
    iterations: int = 1000,
    level: float = 0.95,
    seed: int | None = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval of ``statistic``.

    Resample ``i`` draws from its own child of ``SeedSequence(seed)``, so the
    interval does not depend on how resamples are scheduled.
    """
    x = _clean(values)
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    children = np.random.SeedSequence(seed).spawn(iterations)
    stats = np.empty(iterations)
    for i, child in enumerate(children):
        idx = np.random.default_rng(child).integers(0, x.size, x.size)
        stats[i] = statistic(x[idx])
    alpha = (1 - level) / 2
    lo, hi = np.quantile(stats, [alpha, 1 - alpha])
    return float(lo), float(hi)


@dataclass(frozen=True, eq=False)
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    sse: float
    history: tuple[float, ...]
    iterations: int


def _assign(x, centroids):
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)  # argmin breaks ties toward the lowest index
    return labels, float(d2[np.arange(x.shape[0]), labels].sum())


def _init_centroids(x, k, rng):
    centroids = [x[rng.integers(x.shape[0])]]
    for _ in range(1, k):
        d2 = ((x[:, None, :] - np.array(centroids)[None]) ** 2).sum(axis=2).min(axis=1)
        total = d2.sum()
        if total == 0:
            # every point already coincides with a centroid
            centroids.append(x[int(np.argmax(d2))])
            continue
        cum = np.cumsum(d2 / total)
        idx = int(np.searchsorted(cum, rng.random(), side="right"))
        centroids.append(x[min(idx, x.shape[0] - 1)])
    return np.array(centroids, dtype=float)


def kmeans(points, k: int, seed: int | None = 0, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm from a seeded k-means++ start.

    Iterates until the assignment stops changing or ``max_iter`` is hit.
    ``history`` records the SSE after each assignment step; it never
    increases. An empty cluster keeps its previous centroid.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k must lie in [1, {x.shape[0]}]")
    rng = np.random.default_rng(seed)
    centroids = _init_centroids(x, k, rng)
    labels, sse = _assign(x, centroids)
    history = [sse]
    it = 0
    for it in range(1, max_iter + 1):
        for c in range(k):
            members = x[labels == c]
            if members.size:
                centroids[c] = members.mean(axis=0)
        new_labels, sse = _assign(x, centroids)
        history.append(sse)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return KMeansResult(labels, centroids, sse, tuple(history), it)


def match_rate(truth, assigned) -> float:
    """Best agreement between two labelings over one-to-one relabelings."""
    truth = np.asarray(truth)
    assigned = np.asarray(assigned)
    if truth.shape != assigned.shape:
        raise ValueError("labelings must have equal lengths")
    if truth.size == 0:
        raise ValueError("labelings are empty")
    t_vals, t_idx = np.unique(truth, return_inverse=True)
    a_vals, a_idx = np.unique(assigned, return_inverse=True)
    table = np.zeros((t_vals.size, a_vals.size), dtype=int)
    np.add.at(table, (t_idx, a_idx), 1)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / truth.size
