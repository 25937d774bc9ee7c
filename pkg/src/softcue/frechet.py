"""Discrete Fréchet distance and the differencing-rule discrimination time.

The distance between two sampled curves is the smallest, over all monotone
couplings of their vertices, of the largest distance between coupled
vertices (Eiter & Mannila, 1994). Filling the dynamic-programming table
for two curves also yields the distance between every pair of prefixes,
which is what the discrimination-time sweep needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .trace import DEFAULT_DOWNSAMPLE, DEFAULT_WINDOW, Trace, downsample, moving_average

__all__ = [
    "CUES",
    "PolyCurve",
    "as_points",
    "frechet_table",
    "discrete_frechet",
    "enumerate_couplings",
    "brute_force_frechet",
    "average_trials",
    "crop_common",
    "cue_curves",
    "pair_dissimilarity",
    "DiscriminationResult",
    "discrimination_time",
]

CUES = ("force", "force_rate")
DEFAULT_JND = 0.10
BRUTE_FORCE_LIMIT = 6


@dataclass(frozen=True, eq=False)
class PolyCurve:
    """Vertices of a polygonal curve, one row per vertex."""

    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "points", as_points(self.points))

    def __len__(self):
        return self.points.shape[0]


def as_points(curve) -> np.ndarray:
    """Coerce a curve to an ``(n, dim)`` float array; 1-D input becomes ``(n, 1)``."""
    if isinstance(curve, PolyCurve):
        return curve.points
    pts = np.asarray(curve, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("a curve needs at least one vertex")
    if not np.all(np.isfinite(pts)):
        raise ValueError("curve coordinates must be finite")
    return pts


def _pair(P, Q):
    P, Q = as_points(P), as_points(Q)
    if P.shape[1] != Q.shape[1]:
        raise ValueError(f"dimension mismatch: {P.shape[1]} vs {Q.shape[1]}")
    return P, Q


def _distances(P, Q) -> np.ndarray:
    # hypot avoids the underflow of squared differences between nearby points
    return np.hypot.reduce(P[:, None, :] - Q[None, :, :], axis=2)


def frechet_table(P, Q) -> np.ndarray:
    """Full coupling table; entry ``[i, j]`` is the distance between ``P[:i+1]`` and ``Q[:j+1]``.

    Cells on one anti-diagonal depend only on the two previous ones, so the
    table is filled one anti-diagonal at a time.
    """
    P, Q = _pair(P, Q)
    dist = _distances(P, Q)
    n, m = dist.shape
    # padded table: row/column 0 are sentinels
    table = np.full((n + 1, m + 1), np.inf)
    table[0, 0] = -np.inf
    for s in range(n + m - 1):
        i = np.arange(max(0, s - m + 1), min(s, n - 1) + 1)
        j = s - i
        best = np.minimum(np.minimum(table[i, j + 1], table[i + 1, j]), table[i, j])
        table[i + 1, j + 1] = np.maximum(dist[i, j], best)
    return table[1:, 1:]


def discrete_frechet(P, Q) -> float:
    """Discrete Fréchet distance between two curves of the same dimension.

    >>> discrete_frechet([[0, 0], [1, 0]], [[0, 1], [1, 1]])
    1.0
    """
    return float(frechet_table(P, Q)[-1, -1])


def enumerate_couplings(n: int, m: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """Every monotone coupling of vertex indices ``0..n-1`` with ``0..m-1``."""

    def walk(path):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            yield tuple(path)
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                path.append((a, b))
                yield from walk(path)
                path.pop()

    yield from walk([(0, 0)])


def brute_force_frechet(P, Q) -> float:
    """Discrete Fréchet distance by enumerating every coupling (test oracle).

    Only curves of at most 6 vertices are accepted.
    """
    P, Q = _pair(P, Q)
    n, m = len(P), len(Q)
    if n > BRUTE_FORCE_LIMIT or m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_LIMIT} vertices per curve")
    dist = _distances(P, Q)
    return float(
        min(max(dist[a, b] for a, b in coupling) for coupling in enumerate_couplings(n, m))
    )


# ---------------------------------------------------------------------------
# trace pairs


def average_trials(traces: Trace | Sequence[Trace]) -> Trace:
    """Average repeated trials sample by sample, truncating to the shortest.

    Timestamps are taken from the first trial, shifted to start at zero.
    """
    if isinstance(traces, Trace):
        traces = [traces]
    traces = list(traces)
    if not traces:
        raise ValueError("no trials to average")
    n = min(len(tr) for tr in traces)
    values = np.mean([tr.values[:n] for tr in traces], axis=0)
    first = traces[0]
    return Trace(first.t[:n] - first.t[0], values, first.channel, first.meta)


def crop_common(h: Trace, s: Trace) -> tuple[Trace, Trace]:
    """Crop two traces to their common duration on a shared time base.

    Both are shifted to start at zero. If the timestamps differ the second
    trace is interpolated onto the first one's grid.
    """
    ht, st = h.t - h.t[0], s.t - s.t[0]
    span = min(ht[-1], st[-1])
    if span <= 0:
        raise ValueError("traces have no overlapping window")
    keep = ht <= span * (1 + 1e-12)
    ht_c = ht[keep]
    if len(ht_c) < 2:
        raise ValueError("overlap window holds fewer than 2 samples")
    hv = h.values[keep]
    if st.size >= ht_c.size and np.array_equal(st[: ht_c.size], ht_c):
        sv = s.values[: ht_c.size]
    else:
        sv = np.interp(ht_c, st, s.values)
    return Trace(ht_c, hv, h.channel, h.meta), Trace(ht_c, sv, s.channel, s.meta)


def _cue_trace(tr: Trace, cue: str, window: int) -> Trace:
    sm = moving_average(tr, window)
    if cue == "force":
        return sm
    if cue == "force_rate":
        return sm.with_values(np.gradient(sm.values, sm.t), cue="force_rate")
    raise ValueError(f"unknown cue {cue!r}; expected one of {CUES}")


def cue_curves(
    H,
    S,
    cue: str = "force",
    factor: int = DEFAULT_DOWNSAMPLE,
    window: int = DEFAULT_WINDOW,
) -> tuple[Trace, Trace]:
    """Average, crop, derive the cue and downsample two trial sets.

    Returns the two downsampled cue traces on a common time base.
    """
    h, s = crop_common(average_trials(H), average_trials(S))
    h, s = _cue_trace(h, cue, window), _cue_trace(s, cue, window)
    return downsample(h, factor), downsample(s, factor)


def _points(tr: Trace, time_scale: float | None) -> np.ndarray:
    if time_scale is None:
        return tr.values[:, None]
    return np.column_stack([tr.t * time_scale, tr.values])


def pair_dissimilarity(
    H,
    S,
    cue: str = "force",
    factor: int = DEFAULT_DOWNSAMPLE,
    window: int = DEFAULT_WINDOW,
    time_scale: float | None = None,
) -> float:
    """Fréchet dissimilarity index of two explorations' force or force-rate cue.

    ``H`` and ``S`` are traces or lists of repeated trials. By default the
    curves are value-only on a shared time base; pass ``time_scale`` (cue
    units per second) to couple ``(t, value)`` points instead.
    """
    h, s = cue_curves(H, S, cue, factor, window)
    return discrete_frechet(_points(h, time_scale), _points(s, time_scale))


@dataclass(frozen=True, eq=False)
class DiscriminationResult:
    """Time estimate plus the full prefix profile behind it.

    ``time`` is ``None`` when the pair never becomes discriminable. Profile
    arrays start at the second downsampled sample.
    """

    time: float | None
    t: np.ndarray
    dissimilarity: np.ndarray
    reference: np.ndarray
    ratio: np.ndarray
    threshold: float
    mode: str

    @property
    def discriminable(self) -> bool:
        return self.time is not None

    def rows(self):
        return zip(self.t, self.dissimilarity, self.reference, self.ratio)


def discrimination_time(
    H,
    S,
    cue: str = "force",
    jnd_fraction: float = DEFAULT_JND,
    factor: int = DEFAULT_DOWNSAMPLE,
    window: int = DEFAULT_WINDOW,
    mode: str = "relative",
    time_scale: float | None = None,
) -> DiscriminationResult:
    """Earliest time at which the two cue curves differ by more than the JND.

    For each prefix length ``m >= 2`` of the downsampled curves the Fréchet
    distance of the two prefixes is compared with ``jnd_fraction`` times the
    largest absolute cue value seen so far in either prefix
    (``mode='relative'``), or with ``jnd_fraction`` itself in cue units
    (``mode='absolute'``).
    """
    if mode not in ("relative", "absolute"):
        raise ValueError("mode must be 'relative' or 'absolute'")
    if jnd_fraction <= 0:
        raise ValueError("jnd_fraction must be positive")
    h, s = cue_curves(H, S, cue, factor, window)
    if len(h) < 2:
        raise ValueError("fewer than 2 samples remain after downsampling")
    table = frechet_table(_points(h, time_scale), _points(s, time_scale))
    diss = np.diagonal(table)[1:].copy()
    running = np.maximum.accumulate(np.maximum(np.abs(h.values), np.abs(s.values)))[1:]
    if mode == "relative":
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(running > 0, diss / running, np.where(diss > 0, np.inf, 0.0))
        crossed = np.flatnonzero(ratio > jnd_fraction)
    else:
        ratio = diss.copy()
        crossed = np.flatnonzero(diss > jnd_fraction)
    times = h.t[1:]
    time = float(times[crossed[0]]) if crossed.size else None
    return DiscriminationResult(time, times, diss, running, ratio, jnd_fraction, mode)
