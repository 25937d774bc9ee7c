"""Same-different signal detection under the differencing rule, and
psychometric-function fitting.

Under the differencing rule the observer says "different" whenever the
absolute difference of two unit-variance observations exceeds a criterion
``c``. The difference has standard deviation sqrt(2), which gives::

    fa  = 2 * Phi(-c / sqrt(2))
    hit = Phi((d' - c) / sqrt(2)) + Phi(-(d' + c) / sqrt(2))

``dprime_differencing`` inverts this pair numerically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
from scipy import optimize
from scipy.special import betaln, expit, gammaln, xlogy
from scipy.stats import norm

from .errors import FitError

__all__ = [
    "ResponseTable",
    "PsychometricFit",
    "rates",
    "roc_differencing",
    "dprime_differencing",
    "percent_correct",
    "parse_label",
    "response_tables",
    "psychometric",
    "fit_psychometric",
]

SQRT2 = math.sqrt(2.0)
DPRIME_MAX = 10.0


@dataclass(frozen=True)
class ResponseTable:
    """Trial counts of a same-different block and how often "different" was answered."""

    n_same: int
    n_diff: int
    resp_diff_given_same: int
    resp_diff_given_diff: int

    def __post_init__(self):
        if self.n_same < 1 or self.n_diff < 1:
            raise ValueError("trial counts must be at least 1")
        if not 0 <= self.resp_diff_given_same <= self.n_same:
            raise ValueError("resp_diff_given_same out of range")
        if not 0 <= self.resp_diff_given_diff <= self.n_diff:
            raise ValueError("resp_diff_given_diff out of range")


def _correct(p: float, n: int, correction: str) -> float:
    if correction == "none":
        return p
    if correction == "half_trial":
        if p == 0:
            return 1.0 / (2 * n)
        if p == 1:
            return 1.0 - 1.0 / (2 * n)
        return p
    raise ValueError(f"unknown correction {correction!r}")


def rates(table: ResponseTable, correction: str = "none") -> tuple[float, float]:
    """Hit and false-alarm rates; ``'half_trial'`` maps 0 and 1 to 1/(2N) and 1-1/(2N)."""
    hit = table.resp_diff_given_diff / table.n_diff
    fa = table.resp_diff_given_same / table.n_same
    return _correct(hit, table.n_diff, correction), _correct(fa, table.n_same, correction)


def roc_differencing(dprime: float, criterion: float) -> tuple[float, float]:
    """Hit and false-alarm rates of a differencing observer."""
    if dprime < 0 or criterion < 0:
        raise ValueError("dprime and criterion must be non-negative")
    fa = 2.0 * norm.cdf(-criterion / SQRT2)
    hit = norm.cdf((dprime - criterion) / SQRT2) + norm.cdf(-(dprime + criterion) / SQRT2)
    return float(hit), float(fa)


def dprime_differencing(hit: float, fa: float) -> float:
    """Sensitivity d' of a differencing observer from its hit and false-alarm rates.

    The criterion follows from the false-alarm rate; d' is then the root of
    the hit-rate equation on [0, 10]. Rates with ``hit <= fa`` give 0, and
    hit rates beyond what d' = 10 produces give 10.

    Raises
    ------
    ValueError
        If either rate is not strictly inside (0, 1); correct them first
        (see :func:`rates`).
    """
    if not (0 < hit < 1 and 0 < fa < 1):
        raise ValueError("rates must lie strictly inside (0, 1); apply a correction first")
    if hit <= fa:
        return 0.0
    c = -SQRT2 * norm.ppf(fa / 2.0)

    def excess(dp):
        return norm.cdf((dp - c) / SQRT2) + norm.cdf(-(dp + c) / SQRT2) - hit

    if excess(0.0) >= 0:
        # hit only exceeds fa by rounding
        return 0.0
    if excess(DPRIME_MAX) <= 0:
        return DPRIME_MAX
    return float(optimize.brentq(excess, 0.0, DPRIME_MAX, xtol=1e-13, rtol=1e-14))


def percent_correct(responses: Iterable[tuple[object, object]]) -> float:
    """Fraction of ``(truth, response)`` pairs that agree."""
    pairs = list(responses)
    if not pairs:
        raise ValueError("no responses")
    return sum(1 for truth, resp in pairs if truth == resp) / len(pairs)


def parse_label(text) -> str:
    """Normalize a same/different label; accepts ``s``/``d`` abbreviations."""
    v = str(text).strip().lower()
    v = {"s": "same", "d": "different", "diff": "different"}.get(v, v)
    if v not in ("same", "different"):
        raise ValueError(f"expected 'same' or 'different', got {text!r}")
    return v


def response_tables(rows) -> dict[tuple[str, str], ResponseTable]:
    """Tabulate ``(condition, pair, truth, response)`` records per condition and pair.

    ``truth`` and ``response`` are ``'same'`` or ``'different'``.
    """
    counts: dict[tuple[str, str], list[int]] = {}
    for condition, pair, truth, response in rows:
        truth, response = parse_label(truth), parse_label(response)
        c = counts.setdefault((condition, pair), [0, 0, 0, 0])
        if truth == "same":
            c[0] += 1
            c[2] += response == "different"
        else:
            c[1] += 1
            c[3] += response == "different"
    out = {}
    for key, (ns, nd, rs, rd) in counts.items():
        if ns == 0 or nd == 0:
            raise ValueError(f"condition {key} lacks same or different trials")
        out[key] = ResponseTable(ns, nd, rs, rd)
    return out


# ---------------------------------------------------------------------------
# psychometric function


@dataclass(frozen=True)
class PsychometricFit:
    threshold: float
    slope: float
    lapse: float
    deviance: float
    guess: float = 0.5
    overdispersion: float = 0.0
    log_likelihood: float = 0.0

    def __call__(self, x):
        return psychometric(x, self.threshold, self.slope, self.lapse, self.guess)

    def to_dict(self):
        return asdict(self)


def psychometric(x, threshold, slope, lapse=0.0, guess=0.5):
    """``guess + (1 - guess - lapse) * logistic(slope * (x - threshold))``."""
    x = np.asarray(x, dtype=float)
    return guess + (1.0 - guess - lapse) * expit(slope * (x - threshold))


def _binom_ll(k, n, p):
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(np.sum(xlogy(k, p) + xlogy(n - k, 1 - p)))


def _log_choose(k, n):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _betabinom_ll(k, n, p, rho):
    # rho is the intra-class correlation; rho -> 0 recovers the binomial
    p = np.clip(p, 1e-12, 1 - 1e-12)
    conc = 1.0 / rho - 1.0
    a, b = p * conc, (1 - p) * conc
    return float(np.sum(_log_choose(k, n) + betaln(k + a, n - k + b) - betaln(a, b)))


def fit_psychometric(
    levels,
    n_correct,
    n_total,
    guess: float = 0.5,
    lapse_bounds: tuple[float, float] = (0.0, 0.1),
    overdispersion: bool = False,
) -> PsychometricFit:
    """Maximum-likelihood logistic psychometric function.

    The guess rate is fixed (0.5 for a same-different design); threshold,
    slope and lapse are fitted, lapse within ``lapse_bounds``. With
    ``overdispersion`` a beta-binomial likelihood is used and its
    intra-class correlation is fitted too. The deviance is always the
    binomial one, ``2 * (LL_saturated - LL_model)``.

    Optimization is multi-start L-BFGS-B from a fixed grid, so results are
    deterministic.
    """
    x = np.asarray(levels, dtype=float)
    k = np.asarray(n_correct, dtype=float)
    n = np.asarray(n_total, dtype=float)
    if not (x.shape == k.shape == n.shape) or x.ndim != 1:
        raise ValueError("levels, n_correct and n_total must be 1-D of equal length")
    if np.any(n <= 0) or np.any(k < 0) or np.any(k > n):
        raise ValueError("counts must satisfy 0 <= n_correct <= n_total, n_total > 0")
    if np.unique(x).size < 3:
        raise FitError("need at least 3 distinct stimulus levels")
    lo_lapse, hi_lapse = lapse_bounds
    if not 0 <= lo_lapse <= hi_lapse < 1 - guess:
        raise ValueError("invalid lapse bounds")

    span = float(x.max() - x.min())
    slope_max = 1e3 / span
    bounds = [(x.min() - span, x.max() + span), (1e-3 / span, slope_max), (lo_lapse, hi_lapse)]
    if overdispersion:
        bounds.append((1e-6, 0.5))

    def nll(theta):
        p = psychometric(x, theta[0], theta[1], theta[2], guess)
        if overdispersion:
            return -_betabinom_ll(k, n, p, theta[3])
        return -_binom_ll(k, n, p)

    starts = itertools.product(
        np.linspace(x.min(), x.max(), 5),
        np.array([1.0, 4.0, 16.0, 64.0]) / span,
        [0.5 * (lo_lapse + hi_lapse)],
    )
    best = None
    for start in starts:
        start = list(start) + ([0.01] if overdispersion else [])
        res = optimize.minimize(
            nll, start, method="L-BFGS-B", bounds=bounds,
            options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 2000},
        )
        if best is None or res.fun < best.fun:
            best = res
    theta = best.x
    p_model = psychometric(x, theta[0], theta[1], theta[2], guess)
    ll_model = _binom_ll(k, n, p_model)
    ll_sat = _binom_ll(k, n, k / n)
    deviance = max(0.0, 2.0 * (ll_sat - ll_model))
    return PsychometricFit(
        threshold=float(theta[0]),
        slope=float(theta[1]),
        lapse=float(theta[2]),
        deviance=float(deviance),
        guess=guess,
        overdispersion=float(theta[3]) if overdispersion else 0.0,
        log_likelihood=float(-best.fun),
    )
