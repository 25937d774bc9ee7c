import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softcue.stats import (
    bootstrap_ci,
    cohens_d,
    kmeans,
    mann_whitney_u,
    match_rate,
    spearman,
)

# -- spearman -------------------------------------------------------------------


def test_spearman_extremes():
    assert spearman([1, 2, 3, 4], [2, 5, 7, 9]) == 1.0
    assert spearman([1, 2, 3, 4], [9, 7, 5, 2]) == -1.0


def test_spearman_ties_by_hand():
    # mid-ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
    assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(4.5 / math.sqrt(4.5 * 5), rel=1e-15)


def test_spearman_constant_input():
    with pytest.raises(ValueError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2, 3])


@given(
    st.lists(st.tuples(st.integers(-100, 100), st.integers(-100, 100)), min_size=3, max_size=30),
)
def test_spearman_monotone_invariance(pairs):
    x, y = (np.array(v, dtype=float) for v in zip(*pairs))
    if np.unique(x).size < 2 or np.unique(y).size < 2:
        return
    rho = spearman(x, y)
    assert -1 <= rho <= 1
    assert spearman(np.exp(x / 50), y**3) == pytest.approx(rho, abs=1e-12)
    assert spearman(-x, y) == pytest.approx(-rho, abs=1e-12)


# -- Mann-Whitney ---------------------------------------------------------------


def test_mw_identical_samples():
    a = [1.0, 2.0, 3.0, 4.0, 5.0]
    assert mann_whitney_u(a, a).p > 0.9


def test_mw_separated_exact():
    res = mann_whitney_u([1, 2, 3, 4, 5], [6, 7, 8, 9, 10])
    assert res.U == 0 and res.method == "exact"
    assert res.p == pytest.approx(2 / 252, rel=1e-12)


def test_mw_one_sided():
    a, b = [1, 2, 3, 4, 5], [6, 7, 8, 9, 10]
    assert mann_whitney_u(a, b, "less").p == pytest.approx(1 / 252)
    assert mann_whitney_u(a, b, "greater").p == 1.0
    with pytest.raises(ValueError):
        mann_whitney_u(a, b, "both")


@given(
    st.lists(st.integers(0, 6), min_size=1, max_size=8),
    st.lists(st.integers(0, 6), min_size=1, max_size=8),
)
def test_mw_u_identity(a, b):
    assert mann_whitney_u(a, b).U + mann_whitney_u(b, a).U == len(a) * len(b)


def test_mw_exact_matches_permutation_oracle():
    a, b = [1.0, 2.5, 2.5, 4.0], [2.5, 3.0, 5.0, 6.0, 7.0]
    pooled = a + b
    ranks_u = []
    observed = mann_whitney_u(a, b).U
    for idx in itertools.combinations(range(9), 4):
        aa = [pooled[i] for i in idx]
        bb = [pooled[i] for i in range(9) if i not in idx]
        ranks_u.append(sum((x > y) + 0.5 * (x == y) for x in aa for y in bb))
    ranks_u = np.array(ranks_u)
    expected = 2 * min(np.mean(ranks_u <= observed), np.mean(ranks_u >= observed))
    assert mann_whitney_u(a, b, method="exact").p == pytest.approx(expected, abs=1e-12)


def test_mw_branches_agree_at_nine():
    # every attainable U for tie-free samples of nine
    pool = np.arange(18.0)
    seen = set()
    for idx in itertools.combinations(range(18), 9):
        a = pool[list(idx)]
        u = a.sum() - 45
        if u in seen:
            continue
        seen.add(u)
        b = np.setdiff1d(pool, a)
        exact = mann_whitney_u(a, b, method="exact").p
        normal = mann_whitney_u(a, b, method="asymptotic").p
        assert abs(exact - normal) < 0.01
        if len(seen) == 82:
            break
    assert len(seen) == 82


def test_mw_auto_switches_to_normal():
    assert mann_whitney_u(np.arange(9.0), np.arange(9.0) + 3).method == "asymptotic"


# -- Cohen's d -------------------------------------------------------------------


def test_cohens_d():
    assert cohens_d([1, 2, 3], [1, 2, 3]) == 0.0
    a = np.array([-1.0, 1.0])
    assert cohens_d(a, a + 1) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(ValueError):
        cohens_d([1, 1], [2, 2])


def test_cohens_d_sampling(rng):
    a, b = rng.normal(0, 1, 10_000), rng.normal(1, 1, 10_000)
    assert cohens_d(a, b) == pytest.approx(1.0, abs=0.05)


# -- bootstrap ----------------------------------------------------------------


def test_bootstrap_constant():
    assert bootstrap_ci([2.0] * 10) == (2.0, 2.0)


def test_bootstrap_uniform_mean(rng):
    lo, hi = bootstrap_ci(rng.uniform(size=1000), seed=5)
    assert lo < 0.5 < hi


def test_bootstrap_deterministic():
    x = np.arange(20.0) ** 1.5
    assert bootstrap_ci(x, seed=9) == bootstrap_ci(x, seed=9)
    assert bootstrap_ci(x, seed=9) != bootstrap_ci(x, seed=10)


def test_bootstrap_width_shrinks_with_n(rng):
    small = bootstrap_ci(rng.normal(size=20), seed=1)
    large = bootstrap_ci(rng.normal(size=2000), seed=1)
    assert large[1] - large[0] < small[1] - small[0]


def test_bootstrap_arguments():
    with pytest.raises(ValueError):
        bootstrap_ci([], seed=0)
    with pytest.raises(ValueError):
        bootstrap_ci([1.0], level=1.0)


# -- k-means ----------------------------------------------------------------


def _blobs(rng, centers, n=50, spread=0.3):
    pts = np.vstack([rng.normal(c, spread, (n, len(c))) for c in centers])
    labels = np.repeat(np.arange(len(centers)), n)
    return pts, labels


def test_kmeans_two_blobs(rng):
    pts, labels = _blobs(rng, [(0, 0), (50, 50)])
    res = kmeans(pts, 2, seed=0)
    assert match_rate(labels, res.assignments) == 1.0


def test_kmeans_k_equals_n(rng):
    pts = rng.normal(size=(12, 2))
    assert kmeans(pts, 12, seed=3).sse == 0.0


def test_kmeans_four_clusters(rng):
    # force x displacement design with four generator groups
    pts, labels = _blobs(rng, [(1, 1), (1, 3), (3, 1), (3, 3)], n=40, spread=0.35)
    res = kmeans(pts, 4, seed=0)
    assert match_rate(labels, res.assignments) >= 0.9


def test_kmeans_bad_k():
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 4)
    with pytest.raises(ValueError):
        kmeans(np.zeros((3, 2)), 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(6, 40))
def test_kmeans_sse_monotone_and_fixpoint(seed, k, n):
    pts = np.random.default_rng(seed).normal(size=(n, 2))
    res = kmeans(pts, k, seed=seed)
    assert np.all(np.diff(res.history) <= 1e-9 * max(1.0, res.history[0]))
    # one more Lloyd step leaves the assignment unchanged
    d2 = ((pts[:, None, :] - res.centroids[None]) ** 2).sum(axis=2)
    assert np.array_equal(np.argmin(d2, axis=1), res.assignments)


def test_kmeans_deterministic(rng):
    pts = rng.normal(size=(60, 3))
    a, b = kmeans(pts, 3, seed=11), kmeans(pts, 3, seed=11)
    assert np.array_equal(a.assignments, b.assignments) and a.sse == b.sse


# -- match rate ------------------------------------------------------------------


def test_match_rate():
    assert match_rate([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert match_rate([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    truth = [0] * 5 + [1] * 5
    assigned = [0] * 4 + [1] * 6
    assert match_rate(truth, assigned) == 0.9
    with pytest.raises(ValueError):
        match_rate([0, 1], [0])
