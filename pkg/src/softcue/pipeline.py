"""Per-trial cue extraction and cohort-level stiffness fusion."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .frechet import average_trials
from .stiffness import (
    DEFAULT_GAIN_THRESHOLD,
    FDCurve,
    RecursionTrajectory,
    applied_work,
    default_variances,
    fd_curve_from_traces,
    fuse_observations,
    instantaneous_stiffness,
    peak_observation,
    recognition_time,
    recursive_update,
    slope_observation,
)
from .trace import DEFAULT_ONSET_FRACTION, DEFAULT_WINDOW, Trace, displacement_amplitude, force_rate


@dataclass
class TrialCues:
    trial: str
    force_rate: float
    force_rate_r2: float
    displacement: float
    peak_stiffness: float
    slope_stiffness: float
    slope_r2: float
    work: float
    fused_stiffness: float | None = None
    fused_sigma: float | None = None

    def to_dict(self):
        return asdict(self)


def trial_cues(
    force: Trace,
    displacement: Trace,
    name: str = "",
    window: int = DEFAULT_WINDOW,
    onset_fraction: float = DEFAULT_ONSET_FRACTION,
) -> TrialCues:
    """Force-rate, fingertip displacement, peak/slope stiffness and applied work of one trial."""
    rate = force_rate(force, window, onset_fraction)
    amp = displacement_amplitude(displacement, window, onset_fraction)
    fd = fd_curve_from_traces(force, displacement, window, onset_fraction)
    peak = peak_observation(fd)
    slope = slope_observation(fd)
    return TrialCues(
        trial=name,
        force_rate=rate.slope,
        force_rate_r2=rate.r2,
        displacement=amp,
        peak_stiffness=peak.value,
        slope_stiffness=slope.value,
        slope_r2=slope.r2,
        work=applied_work(fd),
    )


def fuse_cohort(rows: Sequence[TrialCues]) -> list[TrialCues]:
    """Fill in fused stiffness using the spread of each observation across the cohort.

    With a single trial both spreads are zero, so fusion only succeeds when
    the peak and slope observations agree.
    """
    if not rows:
        return []
    peaks = np.array([r.peak_stiffness for r in rows])
    slopes = np.array([r.slope_stiffness for r in rows])
    ddof = 1 if len(rows) > 1 else 0
    s1, s2 = float(np.std(peaks, ddof=ddof)), float(np.std(slopes, ddof=ddof))
    for r in rows:
        est = fuse_observations(r.peak_stiffness, s1, r.slope_stiffness, s2)
        r.fused_stiffness, r.fused_sigma = est.value, est.sigma
    return list(rows)


@dataclass(frozen=True, eq=False)
class Recognition:
    time: float | None
    trajectory: RecursionTrajectory
    meas_variance: np.ndarray
    init_variance: float


def recognize(
    forces: Trace | Sequence[Trace],
    displacements: Trace | Sequence[Trace],
    window: int = DEFAULT_WINDOW,
    gain_threshold: float = DEFAULT_GAIN_THRESHOLD,
    meas_variance: float | None = None,
    init_variance: float | None = None,
    literal_posterior: bool = False,
) -> Recognition:
    """Recognition time of one stimulus from averaged trials.

    Trials are averaged, the loading-ramp force-displacement curve is built
    and its secant stiffnesses drive the recursive estimator. Times are
    measured from ramp onset. Unspecified variances come from
    :func:`~softcue.stiffness.default_variances`.
    """
    f = average_trials(forces)
    d = average_trials(displacements)
    fd = fd_curve_from_traces(f, d, window)
    # points still at zero displacement after onset carry no stiffness information
    keep = np.concatenate(([True], fd.d[1:] > 0))
    fd = FDCurve(fd.d[keep], fd.F[keep], fd.t[keep])
    k = instantaneous_stiffness(fd)
    t = fd.t[1:] - fd.t[0]
    auto_meas, auto_init = default_variances(k)
    meas = auto_meas if meas_variance is None else meas_variance
    init = auto_init if init_variance is None else init_variance
    traj = recursive_update(k, meas, init, timestamps=t, literal_posterior=literal_posterior)
    return Recognition(
        recognition_time(traj, gain_threshold), traj, np.broadcast_to(meas, k.shape), init
    )
