"""Virtual stiffness: single-trial observations, their fusion, and the
recursive (Kalman-gain) estimator used to time compliance recognition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError, InsufficientDataError
from .trace import (
    DEFAULT_ONSET_FRACTION,
    DEFAULT_WINDOW,
    Trace,
    extract_ramp,
    linear_fit,
    moving_average,
    sigmoid_normalize,
)

__all__ = [
    "SOURCES",
    "StiffnessEstimate",
    "FDCurve",
    "RecursionTrajectory",
    "fd_curve_from_traces",
    "peak_observation",
    "slope_observation",
    "fuse_observations",
    "instantaneous_stiffness",
    "default_variances",
    "recursive_update",
    "recognition_time",
    "analytic_gains",
    "applied_work",
    "combine_recognition_cues",
    "recognition_cue_scores",
]

SOURCES = ("peak", "slope", "fused", "recursive")
DEFAULT_GAIN_THRESHOLD = 0.10


@dataclass(frozen=True)
class StiffnessEstimate:
    """Virtual stiffness in N/mm with its spread and where it came from."""

    value: float
    sigma: float = 0.0
    source: str = "peak"
    r2: float | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True, eq=False)
class FDCurve:
    """Force (N) against fingertip displacement (mm) over one loading ramp."""

    d: np.ndarray
    F: np.ndarray
    t: np.ndarray | None = None

    def __post_init__(self):
        d = np.array(self.d, dtype=float).reshape(-1)
        F = np.array(self.F, dtype=float).reshape(-1)
        if d.shape != F.shape:
            raise ValueError("d and F must have equal lengths")
        if d.size < 2:
            raise InsufficientDataError("a force-displacement curve needs at least 2 points")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(F))):
            raise ValueError("force-displacement points must be finite")
        if np.any(np.diff(d) < 0):
            raise ValueError("displacement must be non-decreasing along the ramp")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "F", F)
        if self.t is not None:
            t = np.array(self.t, dtype=float).reshape(-1)
            if t.shape != d.shape:
                raise ValueError("t must match the curve length")
            object.__setattr__(self, "t", t)

    def __len__(self):
        return self.d.size


def fd_curve_from_traces(
    force: Trace,
    displacement: Trace,
    window: int = DEFAULT_WINDOW,
    onset_fraction: float = DEFAULT_ONSET_FRACTION,
    zero_baseline: bool = True,
) -> FDCurve:
    """Build the loading-ramp force-displacement curve of one exploration.

    Both channels are smoothed, the ramp is located on the force channel and
    displacement is interpolated onto the force timestamps when the two
    sensors sample differently. With ``zero_baseline`` force and
    displacement are both measured from their values at ramp onset, i.e.
    from first contact. Measurement noise can make displacement jitter
    backwards along the ramp; the running maximum is used so the curve
    stays monotone.
    """
    fs = moving_average(force, window)
    ds = moving_average(displacement, window)
    ramp = extract_ramp(fs, onset_fraction)
    t = ramp.t
    if np.array_equal(ds.t, fs.t):
        d = ds.values[ramp.indices]
    else:
        d = np.interp(t, ds.t, ds.values)
    F = ramp.values
    if zero_baseline:
        d = d - d[0]
        F = F - F[0]
    d = np.maximum.accumulate(d)
    return FDCurve(d, F, t)


def peak_observation(fd: FDCurve, sigma: float = 0.0) -> StiffnessEstimate:
    """Maximum force over the displacement at which it occurs."""
    i = int(np.argmax(fd.F))
    if not fd.d[i] > 0:
        raise DomainError("displacement at peak force is zero")
    return StiffnessEstimate(float(fd.F[i] / fd.d[i]), sigma, "peak")


def slope_observation(fd: FDCurve, sigma: float = 0.0) -> StiffnessEstimate:
    """Least-squares slope of force against displacement over the ramp."""
    fit = linear_fit(fd.d, fd.F)
    return StiffnessEstimate(fit.slope, sigma, "slope", fit.r2)


def fuse_observations(x1: float, sigma1: float, x2: float, sigma2: float) -> StiffnessEstimate:
    """Combine two stiffness observations into one estimate.

    The weight on the second observation is the square root of the
    variance ratio, ``sqrt(s1**2 / (s1**2 + s2**2))``, which always lies in
    [0, 1], so the result stays between the two inputs. The reported
    ``sigma`` is the usual inverse-variance combination.

    Two zero-spread observations are only accepted when they agree to
    ~1e-9 relative, in which case their mean is returned.
    """
    if sigma1 < 0 or sigma2 < 0 or math.isnan(sigma1) or math.isnan(sigma2):
        raise ValueError("sigmas must be non-negative")
    if sigma1 == 0 and sigma2 == 0:
        if not math.isclose(x1, x2, rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError("both observations have zero spread but disagree; weight undefined")
        return StiffnessEstimate(0.5 * (x1 + x2), 0.0, "fused")
    if math.isinf(sigma1) or math.isinf(sigma2):
        weight = 0.0 if math.isinf(sigma2) else 1.0
        sigma = min(sigma1, sigma2)
    else:
        # hypot avoids underflow of the squared sigmas
        h = math.hypot(sigma1, sigma2)
        weight = sigma1 / h
        sigma = sigma1 * sigma2 / h
    value = x1 + weight * (x2 - x1)
    return StiffnessEstimate(value, sigma, "fused")


def instantaneous_stiffness(fd: FDCurve) -> np.ndarray:
    """Secant stiffness ``F_j / d_j`` for every point after the first."""
    d = fd.d[1:]
    if np.any(d == 0):
        j = int(np.flatnonzero(d == 0)[0]) + 1
        raise DomainError(f"zero displacement at curve point {j}")
    return fd.F[1:] / d


@dataclass(frozen=True, eq=False)
class RecursionTrajectory:
    """Output of :func:`recursive_update`.

    ``estimates``, ``variances`` and ``timestamps`` have one entry per input
    stiffness value, the first being the initialization. ``gains`` has one
    entry per update step, so it is one shorter; ``gain_times`` gives the
    timestamps of those steps.
    """

    estimates: np.ndarray
    gains: np.ndarray
    variances: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        for name in ("estimates", "gains", "variances", "timestamps"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.estimates.size
        if self.timestamps.size != n or self.variances.size != n or self.gains.size != n - 1:
            raise ValueError("inconsistent trajectory lengths")

    @property
    def gain_times(self) -> np.ndarray:
        return self.timestamps[1:]

    @property
    def terminal(self) -> StiffnessEstimate:
        return StiffnessEstimate(
            float(self.estimates[-1]), math.sqrt(max(self.variances[-1], 0.0)), "recursive"
        )


def default_variances(k_series, window: int = 5, floor: float | None = None):
    """Data-driven variances for :func:`recursive_update`.

    Returns ``(meas_variance, init_variance)``. The measurement variance at
    each step is the residual variance of the ``window`` stiffness values
    around it about their own least-squares line; the initial variance is
    the sample variance of the first ``window`` values. Zero variances
    (noiseless input) are lifted to ``floor``, by default
    ``(1e-6 * mean |k|)**2``.
    """
    k = np.asarray(k_series, dtype=float)
    if k.size < 2:
        raise InsufficientDataError("need at least 2 stiffness values")
    if floor is None:
        scale = float(np.mean(np.abs(k))) or 1.0
        floor = (1e-6 * scale) ** 2
    w = max(3, min(window, k.size))
    meas = np.empty(k.size)
    x = np.arange(w, dtype=float)
    for i in range(k.size):
        lo = min(max(0, i - w // 2), k.size - w) if k.size >= w else 0
        seg = k[lo : lo + w]
        if seg.size < 3:
            meas[i] = float(np.var(seg, ddof=1)) if seg.size > 1 else 0.0
            continue
        coef = np.polyfit(x[: seg.size], seg, 1)
        resid = seg - np.polyval(coef, x[: seg.size])
        meas[i] = float(resid @ resid) / (seg.size - 2)
    meas = np.maximum(meas, floor)
    head = k[:window]
    init = float(np.var(head, ddof=1)) if head.size > 1 else 0.0
    if not init > floor:
        init = float(np.median(meas))
    return meas, init


def recursive_update(
    k_series,
    meas_variance,
    init_variance: float,
    timestamps=None,
    literal_posterior: bool = False,
) -> RecursionTrajectory:
    """Recursively refine a stiffness estimate from successive secant stiffnesses.

    The estimate starts at the first value of ``k_series`` with variance
    ``init_variance``. Each later value ``k_i`` is folded in as::

        gain = sqrt(var / (var + meas_variance_i))
        estimate += gain * (k_i - estimate)
        var = (1 - gain) * var

    ``meas_variance`` may be a scalar or one value per entry of
    ``k_series`` (the first entry is unused). With ``literal_posterior``
    the variance update is ``var = sqrt((1 - gain) * var)`` instead.
    """
    k = np.asarray(k_series, dtype=float).reshape(-1)
    if k.size < 2:
        raise InsufficientDataError("recursion needs at least 2 stiffness values")
    meas = np.broadcast_to(np.asarray(meas_variance, dtype=float), k.shape)
    if not (init_variance > 0 and np.all(meas > 0)):
        raise ValueError("variances must be positive")
    if timestamps is None:
        timestamps = np.arange(k.size, dtype=float)
    timestamps = np.asarray(timestamps, dtype=float).reshape(-1)
    if timestamps.size != k.size:
        raise ValueError("timestamps must match k_series")

    estimates = np.empty(k.size)
    variances = np.empty(k.size)
    gains = np.empty(k.size - 1)
    est, var = float(k[0]), float(init_variance)
    estimates[0], variances[0] = est, var
    for i in range(1, k.size):
        gain = math.sqrt(var / (var + meas[i]))
        est = est + gain * (k[i] - est)
        var = math.sqrt((1.0 - gain) * var) if literal_posterior else (1.0 - gain) * var
        gains[i - 1], estimates[i], variances[i] = gain, est, var
    return RecursionTrajectory(estimates, gains, variances, timestamps)


def recognition_time(
    traj: RecursionTrajectory, threshold_fraction: float = DEFAULT_GAIN_THRESHOLD
) -> float | None:
    """Time of the first gain below ``threshold_fraction`` of the largest gain.

    Returns ``None`` when the gain never drops that far.
    """
    if traj.gains.size == 0:
        raise InsufficientDataError("trajectory has no update steps")
    cut = threshold_fraction * float(traj.gains.max())
    below = np.flatnonzero(traj.gains < cut)
    if below.size == 0:
        return None
    return float(traj.gain_times[below[0]])


def analytic_gains(n_steps: int, meas_variance: float, init_variance: float, dps: int = 50):
    """Gain sequence for constant measurement variance, at ``dps`` digits.

    The recursion is written in the variance ratio ``r = var / meas``,
    ``g = sqrt(r / (r + 1))``, ``r <- r (1 - g)``, and evaluated with
    mpmath so it can check the float implementation.
    """
    import mpmath

    with mpmath.workdps(dps):
        r = mpmath.mpf(init_variance) / mpmath.mpf(meas_variance)
        out = []
        for _ in range(n_steps):
            g = mpmath.sqrt(r / (r + 1))
            out.append(g)
            r = r * (1 - g)
        return out


def applied_work(fd: FDCurve) -> float:
    """Trapezoidal integral of force over displacement, N*mm (= mJ)."""
    return float(trapezoid(fd.F, fd.d))


def combine_recognition_cues(stiffness, work):
    """Mean of the sigmoid-normalized stiffness and work cues."""
    return 0.5 * (np.asarray(stiffness, dtype=float) + np.asarray(work, dtype=float))


def recognition_cue_scores(stiffness_values, work_values, rate: float | None = None) -> np.ndarray:
    """Normalize each cue within its cohort and combine them per trial."""
    s = sigmoid_normalize(stiffness_values, rate=rate)
    w = sigmoid_normalize(work_values, rate=rate)
    if s.shape != w.shape:
        raise ValueError("cue cohorts must have equal sizes")
    return combine_recognition_cues(s, w)
