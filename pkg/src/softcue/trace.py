"""Exploration time series: ingestion, smoothing, ramp segmentation and normalization.

Every cue used downstream (force-rate, fingertip displacement, virtual
stiffness) is derived from the functions here. Traces are sampled at their
native rate; nothing is resampled onto a uniform grid.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.special import expit

from .errors import InsufficientDataError, NoRampError, SingularFitError, TraceParseError

__all__ = [
    "CHANNELS",
    "Trace",
    "RampSegment",
    "LineFit",
    "load_trace",
    "load_traces",
    "write_traces",
    "moving_average",
    "extract_ramp",
    "linear_fit",
    "force_rate",
    "displacement_amplitude",
    "downsample",
    "sigmoid_normalize",
]

CHANNELS = ("force", "displacement")
CSV_HEADER = ("t", "force", "displacement")

DEFAULT_WINDOW = 100
DEFAULT_DOWNSAMPLE = 50
DEFAULT_ONSET_FRACTION = 0.05


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trace:
    """A time-ordered sample series from one exploration.

    Parameters
    ----------
    t : array_like
        Sample times in seconds, strictly increasing.
    values : array_like
        Force in N or displacement in mm, depending on ``channel``.
    channel : {'force', 'displacement'}
    meta : mapping, optional
        Free-form source labels (file name, trial id, generator settings).
    """

    t: np.ndarray
    values: np.ndarray
    channel: str
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        t = _frozen(self.t).reshape(-1)
        v = _frozen(self.values).reshape(-1)
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        if t.shape != v.shape:
            raise ValueError("t and values must have the same length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("trace samples must be finite")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("trace timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return self.t.size

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.channel == other.channel
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) else 0.0

    def with_values(self, values, **meta) -> "Trace":
        return Trace(self.t, values, self.channel, {**self.meta, **meta})

    def slice(self, start: int, stop: int) -> "Trace":
        return Trace(self.t[start:stop], self.values[start:stop], self.channel, self.meta)


@dataclass(frozen=True)
class RampSegment:
    """Loading ramp of a trace, from ``onset_index`` to ``peak_index`` inclusive."""

    onset_index: int
    peak_index: int
    parent: Trace

    def __post_init__(self):
        if not 0 <= self.onset_index < self.peak_index < len(self.parent):
            raise ValueError(
                f"invalid ramp indices onset={self.onset_index} peak={self.peak_index}"
                f" for a trace of {len(self.parent)} samples"
            )

    @property
    def indices(self) -> slice:
        return slice(self.onset_index, self.peak_index + 1)

    @property
    def t(self) -> np.ndarray:
        return self.parent.t[self.indices]

    @property
    def values(self) -> np.ndarray:
        return self.parent.values[self.indices]


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept


# ---------------------------------------------------------------------------
# CSV ingestion


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def _data_rows(handle) -> Iterable[tuple[int, list[str]]]:
    """Yield (line number, fields) for non-blank, non-comment lines."""
    for lineno, line in enumerate(handle, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, next(csv.reader([stripped]))


def load_traces(source, name: str | None = None) -> dict[str, Trace]:
    """Read a ``t,force,displacement`` CSV into one trace per populated channel.

    The displacement column may be absent or left empty for force-only
    recordings. Lines starting with ``#`` are treated as comments.

    Raises
    ------
    TraceParseError
        On a malformed row or a non-increasing timestamp; the message names
        the offending line.
    InsufficientDataError
        If fewer than two data rows are present.
    """
    handle, close = _open_text(source)
    if name is None and isinstance(source, (str, os.PathLike)):
        name = os.fspath(source)
    try:
        rows = _data_rows(handle)
        try:
            header_line, header = next(rows)
        except StopIteration:
            raise InsufficientDataError("empty trace file") from None
        header = [h.strip() for h in header]
        if header[:2] != ["t", "force"] or len(header) > 3 or (
            len(header) == 3 and header[2] != "displacement"
        ):
            raise TraceParseError(
                f"expected header 't,force,displacement', got {','.join(header)!r}", header_line
            )
        t, force, disp = [], [], []
        has_disp = len(header) == 3
        for lineno, fields in rows:
            if len(fields) not in (2, 3) or (len(fields) == 3 and not has_disp):
                raise TraceParseError(f"expected {len(header)} fields, got {len(fields)}", lineno)
            try:
                ti = float(fields[0])
                fi = float(fields[1])
                di = float(fields[2]) if len(fields) == 3 and fields[2].strip() else math.nan
            except ValueError as exc:
                raise TraceParseError(str(exc), lineno) from None
            if not (math.isfinite(ti) and math.isfinite(fi)):
                raise TraceParseError("non-finite sample", lineno)
            if t and ti <= t[-1]:
                raise TraceParseError(f"timestamp {ti!r} does not increase", lineno)
            t.append(ti)
            force.append(fi)
            disp.append(di)
    finally:
        if close:
            handle.close()

    if len(t) < 2:
        raise InsufficientDataError(f"trace needs at least 2 samples, got {len(t)}")
    meta = {"source": name} if name else {}
    out = {"force": Trace(t, force, "force", meta)}
    d = np.asarray(disp)
    if np.all(np.isfinite(d)):
        out["displacement"] = Trace(t, d, "displacement", meta)
    elif np.any(np.isfinite(d)):
        raise TraceParseError("displacement column is only partially populated")
    return out


def load_trace(source, channel: str = "force") -> Trace:
    """Read one channel of a trace CSV (see :func:`load_traces`)."""
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    traces = load_traces(source)
    if channel not in traces:
        raise TraceParseError(f"column {channel!r} is empty")
    return traces[channel]


def write_traces(dest, force: Trace, displacement: Trace | None = None, comments=()) -> None:
    """Write traces as ``t,force,displacement`` CSV.

    Values are written with ``repr`` so that reloading is bit-exact.
    ``comments`` are emitted first as ``#`` lines.
    """
    if displacement is not None and not np.array_equal(force.t, displacement.t):
        raise ValueError("force and displacement traces must share timestamps")
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(CSV_HEADER))
    d = displacement.values if displacement is not None else [None] * len(force)
    for ti, fi, di in zip(force.t, force.values, d):
        lines.append(f"{float(ti)!r},{float(fi)!r},{'' if di is None else repr(float(di))}")
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        dest.write(text)


# ---------------------------------------------------------------------------
# conditioning


def moving_average(trace: Trace, window: int = DEFAULT_WINDOW) -> Trace:
    """Centered moving average whose window is clipped at the trace ends.

    Sample ``i`` is replaced by the mean of samples
    ``i - (window - 1) // 2 ... i + window // 2`` that exist, so the output
    has the input's length and timestamps, and no phase lag.

    >>> moving_average(Trace([0, 1, 2, 3, 4], [1, 2, 3, 4, 5], "force"), 3).values
    array([1.5, 2. , 3. , 4. , 4.5])
    """
    if int(window) != window or window < 1:
        raise ValueError(f"window must be a positive integer, got {window!r}")
    window = int(window)
    x = trace.values
    n = x.size
    if window == 1 or n == 0:
        return trace
    left = (window - 1) // 2
    right = window - 1 - left
    # offsetting by the first sample keeps constant inputs exact
    base = x[0]
    csum = np.concatenate(([0.0], np.cumsum(x - base)))
    idx = np.arange(n)
    lo = np.clip(idx - left, 0, n)
    hi = np.clip(idx + right + 1, 0, n)
    out = base + (csum[hi] - csum[lo]) / (hi - lo)
    return trace.with_values(out)


def extract_ramp(trace: Trace, onset_fraction: float = DEFAULT_ONSET_FRACTION) -> RampSegment:
    """Locate the loading ramp of a (smoothed) trace.

    The peak is the global maximum of the values. Going back from the
    steepest rising step before the peak, the onset is the first sample of
    the contiguous run whose first difference exceeds ``onset_fraction`` of
    that steepest slope.

    Raises
    ------
    NoRampError
        If the trace never rises before its maximum.
    """
    if len(trace) < 3:
        raise InsufficientDataError("ramp extraction needs at least 3 samples")
    if not 0 < onset_fraction < 1:
        raise ValueError("onset_fraction must lie in (0, 1)")
    peak = int(np.argmax(trace.values))
    if peak == 0:
        raise NoRampError("trace has no rising segment before its maximum")
    deriv = np.diff(trace.values[: peak + 1]) / np.diff(trace.t[: peak + 1])
    steepest = int(np.argmax(deriv))
    dmax = deriv[steepest]
    if not dmax > 0:
        raise NoRampError("first derivative never becomes positive")
    threshold = onset_fraction * dmax
    onset = steepest
    while onset > 0 and deriv[onset - 1] > threshold:
        onset -= 1
    return RampSegment(onset, peak, trace)


def linear_fit(x, y) -> LineFit:
    """Ordinary least-squares line with its coefficient of determination.

    A perfectly fitted constant ``y`` gets ``r2 = 1``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise ValueError("x and y must have equal lengths")
    if x.size < 2:
        raise InsufficientDataError("a line fit needs at least 2 points")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0.0 or not np.isfinite(sxx):
        raise SingularFitError("x values are all identical")
    slope = float(dx @ (y - ym)) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - ym) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return LineFit(slope, intercept, r2)


def force_rate(
    trace: Trace,
    window: int = DEFAULT_WINDOW,
    onset_fraction: float = DEFAULT_ONSET_FRACTION,
) -> LineFit:
    """Smooth, segment the loading ramp and regress force on time; slope is N/s."""
    if trace.channel != "force":
        raise ValueError("force_rate expects a force trace")
    ramp = extract_ramp(moving_average(trace, window), onset_fraction)
    return linear_fit(ramp.t, ramp.values)


def displacement_amplitude(
    trace: Trace,
    window: int = DEFAULT_WINDOW,
    onset_fraction: float = DEFAULT_ONSET_FRACTION,
) -> float:
    """Absolute fingertip excursion between movement initiation and conclusion, in mm.

    Movements in either direction are handled: a trace whose largest
    excursion from its first sample is negative is mirrored before the ramp
    is located.
    """
    if trace.channel != "displacement":
        raise ValueError("displacement_amplitude expects a displacement trace")
    smooth = moving_average(trace, window)
    v = smooth.values
    excursion = v - v[0]
    if -excursion.min() > excursion.max():
        smooth = smooth.with_values(-v)
    ramp = extract_ramp(smooth, onset_fraction)
    return float(abs(v[ramp.peak_index] - v[ramp.onset_index]))


def downsample(trace: Trace, factor: int = DEFAULT_DOWNSAMPLE) -> Trace:
    """Keep every ``factor``-th sample, starting with the first."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    factor = int(factor)
    if factor == 1:
        return trace
    return Trace(trace.t[::factor], trace.values[::factor], trace.channel, trace.meta)


def sigmoid_normalize(values, center: float | None = None, rate: float | None = None) -> np.ndarray:
    """Map values through the logistic ``1 / (1 + exp(-rate * (x - center)))``.

    ``center`` defaults to the sample mean and ``rate`` to 1.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("values must be non-empty")
    if center is None:
        center = float(x.mean())
    if rate is None:
        rate = 1.0
    return expit(rate * (x - center))
