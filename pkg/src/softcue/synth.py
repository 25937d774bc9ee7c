"""Seeded synthetic explorations.

Commanded force profiles are turned into displacement with either a linear
spring or Hertz sphere-on-halfspace contact. These closed forms are the
ground truth every estimator in the package is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trace import Trace

__all__ = [
    "DEFAULT_POISSON",
    "HertzParams",
    "triangle_profile",
    "ramp_hold_profile",
    "hertz_displacement",
    "hertz_force",
    "hertz_trace",
    "spring_trace",
]

DEFAULT_POISSON = 0.475
KPA_TO_N_PER_MM2 = 1e-3


@dataclass(frozen=True)
class HertzParams:
    """Finger pad against an elastic sphere. Moduli in kPa, radius in mm."""

    finger_modulus: float
    sphere_modulus: float
    radius: float
    finger_poisson: float = DEFAULT_POISSON
    sphere_poisson: float = DEFAULT_POISSON

    def __post_init__(self):
        if self.finger_modulus <= 0 or self.sphere_modulus <= 0:
            raise ValueError("moduli must be positive")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        for nu in (self.finger_poisson, self.sphere_poisson):
            if not 0 <= nu < 0.5:
                raise ValueError("Poisson ratios must lie in [0, 0.5)")

    @property
    def effective_modulus(self) -> float:
        """Contact modulus E* in kPa."""
        inv = (1 - self.finger_poisson**2) / self.finger_modulus + (
            1 - self.sphere_poisson**2
        ) / self.sphere_modulus
        return 1.0 / inv


def triangle_profile(rate: float, peak: float, sample_rate: float) -> Trace:
    """Symmetric triangle-wave force profile: rise at ``rate`` N/s to ``peak`` N and back.

    The rise is split into a whole number of samples so the peak value is
    sampled exactly; the realized sampling rate is therefore within one
    sample of ``sample_rate``.
    """
    if rate <= 0 or peak <= 0 or sample_rate <= 0:
        raise ValueError("rate, peak and sample_rate must be positive")
    rise = peak / rate
    m = max(1, round(rise * sample_rate))
    dt = rise / m
    i = np.arange(2 * m + 1)
    force = peak - rate * dt * np.abs(i - m)
    force[0] = force[-1] = 0.0
    force[m] = peak
    return Trace(i * dt, np.clip(force, 0.0, peak), "force",
                 {"profile": "triangle", "rate": rate, "peak": peak})


def ramp_hold_profile(
    rate: float, peak: float, sample_rate: float, baseline: float = 0.0, hold: float = 0.0
) -> Trace:
    """Zero baseline of ``baseline`` s, a linear rise at ``rate`` to ``peak``, then a hold."""
    if rate <= 0 or peak <= 0 or sample_rate <= 0:
        raise ValueError("rate, peak and sample_rate must be positive")
    dt = 1.0 / sample_rate
    n = int(round((baseline + peak / rate + hold) * sample_rate)) + 1
    t = np.arange(n) * dt
    force = np.clip(rate * (t - baseline), 0.0, peak)
    return Trace(t, force, "force",
                 {"profile": "ramp_hold", "rate": rate, "peak": peak, "baseline": baseline})


def hertz_displacement(force, params: HertzParams) -> np.ndarray:
    """Indentation depth in mm, ``(3F / (4 E* sqrt(R)))**(2/3)``."""
    f = np.asarray(force, dtype=float)
    if np.any(f < 0):
        raise ValueError("Hertz contact needs non-negative force")
    estar = params.effective_modulus * KPA_TO_N_PER_MM2
    return np.cbrt(3.0 * f / (4.0 * estar * math.sqrt(params.radius))) ** 2


def hertz_force(depth, params: HertzParams) -> np.ndarray:
    """Inverse of :func:`hertz_displacement`: ``F = 4/3 E* sqrt(R) d**1.5``."""
    d = np.asarray(depth, dtype=float)
    estar = params.effective_modulus * KPA_TO_N_PER_MM2
    return 4.0 / 3.0 * estar * math.sqrt(params.radius) * d**1.5


def _with_noise(values: np.ndarray, noise: float, seed) -> np.ndarray:
    if noise < 0:
        raise ValueError("noise must be non-negative")
    if noise == 0:
        return values
    rng = np.random.default_rng(seed)
    return values * (1.0 + noise * rng.standard_normal(values.shape))


def hertz_trace(params: HertzParams, profile: Trace, noise: float = 0.0, seed=None):
    """Drive Hertz contact with a force profile.

    Returns ``(force, displacement, contact_radius)``. Multiplicative
    Gaussian noise of relative size ``noise`` is applied to displacement
    only; the contact radius ``sqrt(R d)`` is computed from the noiseless
    depth.
    """
    if profile.channel != "force":
        raise ValueError("profile must be a force trace")
    depth = hertz_displacement(profile.values, params)
    radius = np.sqrt(params.radius * depth)
    meta = {**profile.meta, "model": "hertz", "noise": noise, "seed": seed}
    disp = Trace(profile.t, _with_noise(depth, noise, seed), "displacement", meta)
    return profile.with_values(profile.values, **meta), disp, radius


def spring_trace(k: float, profile: Trace, noise: float = 0.0, seed=None):
    """Linear spring ``d = F / k`` (k in N/mm); returns ``(force, displacement)``."""
    if k <= 0:
        raise ValueError("spring constant must be positive")
    if profile.channel != "force":
        raise ValueError("profile must be a force trace")
    meta = {**profile.meta, "model": "spring", "k": k, "noise": noise, "seed": seed}
    depth = profile.values / k
    disp = Trace(profile.t, _with_noise(depth, noise, seed), "displacement", meta)
    return profile.with_values(profile.values, **meta), disp
