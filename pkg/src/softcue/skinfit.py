"""Layered Neo-Hookean finger-pad model and per-subject modulus scaling.

Epidermis, dermis and hypodermis keep a fixed modulus ratio; a subject is
described by a single scale ``k`` that multiplies all three (the
hypodermis modulus in kPa equals ``k``). Its reciprocal is the softness
index. The forward model compresses the three layers in series under a
uniform nominal stress, each layer following the incompressible
Neo-Hookean uniaxial law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError, FitError

__all__ = [
    "ELASTICITY_RATIO",
    "LAYERS",
    "MaterialLaw",
    "LayerStack",
    "moduli_from_scale",
    "softness_index",
    "layer_stretch",
    "compression_state",
    "forward_compression",
    "ScaleFit",
    "fit_scale",
    "r_squared",
]

LAYERS = ("epidermis", "dermis", "hypodermis")
ELASTICITY_RATIO = (510.63, 21.37, 1.00)
DEFAULT_THICKNESS = (0.47, 1.0, 3.0)
DEFAULT_AREA = 50.0
KPA_TO_N_PER_MM2 = 1e-3
ROOT_TOL = 1e-10


@dataclass(frozen=True)
class MaterialLaw:
    """Neo-Hookean solid, ``Psi = C10 (I1bar - 3) + (J - 1)**2 / D1``.

    ``shear_modulus`` is in kPa. ``C10 = G / 2`` and ``D1 = 2 / K``; the bulk
    modulus only enters the strain energy, the uniaxial response assumes
    incompressibility.
    """

    shear_modulus: float
    bulk_modulus: float | None = None

    def __post_init__(self):
        if not self.shear_modulus > 0:
            raise ValueError("shear modulus must be positive")

    @property
    def c10(self) -> float:
        return self.shear_modulus / 2.0

    @property
    def d1(self) -> float:
        bulk = self.bulk_modulus if self.bulk_modulus is not None else self.shear_modulus * 1e5
        return 2.0 / bulk

    def strain_energy(self, i1_bar, jacobian=1.0):
        i1_bar = np.asarray(i1_bar, dtype=float)
        return self.c10 * (i1_bar - 3.0) + (np.asarray(jacobian) - 1.0) ** 2 / self.d1

    def nominal_stress(self, stretch):
        """Uniaxial nominal stress ``G (l - l**-2)`` in kPa; negative in compression."""
        lam = np.asarray(stretch, dtype=float)
        return self.shear_modulus * (lam - lam**-2)


def moduli_from_scale(k: float, ratio: Sequence[float] = ELASTICITY_RATIO) -> tuple[float, ...]:
    """Layer moduli (kPa) for scale ``k``: the elasticity ratio times ``k``."""
    if not k > 0:
        raise ValueError("scale k must be positive")
    return tuple(r * k for r in ratio)


def softness_index(k: float) -> float:
    """Reciprocal of the modulus scale; larger means softer skin."""
    if not k > 0:
        raise ValueError("scale k must be positive")
    return 1.0 / k


@dataclass(frozen=True)
class LayerStack:
    """Three skin layers compressed in series under a nominal contact area.

    Thicknesses are in mm, ``base_moduli`` in kPa at ``k = 1`` and
    ``area`` in mm^2.
    """

    thickness: tuple[float, ...] = DEFAULT_THICKNESS
    base_moduli: tuple[float, ...] = ELASTICITY_RATIO
    k: float = 1.0
    area: float = DEFAULT_AREA

    def __post_init__(self):
        object.__setattr__(self, "thickness", tuple(float(t) for t in self.thickness))
        object.__setattr__(self, "base_moduli", tuple(float(g) for g in self.base_moduli))
        if len(self.thickness) != len(self.base_moduli) or not self.thickness:
            raise ValueError("need one thickness per layer modulus")
        if any(t <= 0 for t in self.thickness) or any(g <= 0 for g in self.base_moduli):
            raise ValueError("thicknesses and moduli must be positive")
        if not self.k > 0 or not self.area > 0:
            raise ValueError("scale k and area must be positive")

    @property
    def moduli(self) -> tuple[float, ...]:
        return moduli_from_scale(self.k, self.base_moduli)

    @property
    def total_thickness(self) -> float:
        return sum(self.thickness)

    def with_scale(self, k: float) -> "LayerStack":
        return replace(self, k=k)


def layer_stretch(stress, shear_modulus):
    """Stretch ``l`` in (0, 1] at compressive nominal stress ``stress`` (>= 0, kPa).

    Solves ``l**3 + a l**2 - 1 = 0`` with ``a = stress / G`` by Newton's
    method from ``l = 1``. The cubic is increasing and convex on (0, 1], so
    the iterates decrease monotonically onto the root; a bisection step is
    taken if an iterate ever leaves the bracket.
    """
    a = np.asarray(stress, dtype=float) / shear_modulus
    if np.any(a < 0):
        raise ValueError("compressive stress must be non-negative")
    lo = np.zeros_like(a)
    hi = np.ones_like(a)
    lam = np.ones_like(a)
    for _ in range(200):
        f = lam**3 + a * lam**2 - 1.0
        hi = np.where(f > 0, lam, hi)
        lo = np.where(f < 0, lam, lo)
        step = f / (3 * lam**2 + 2 * a * lam)
        new = lam - step
        bad = (new <= lo) | (new >= hi)
        new = np.where(bad, 0.5 * (lo + hi), new)
        if np.all(np.abs(new - lam) <= 1e-12 * new):
            return new
        lam = new
    raise ConvergenceError("layer stretch did not converge")


def _compression(stress, stack: LayerStack):
    """Per-layer compression (mm) at nominal stress ``stress`` for the k = 1 stack."""
    return np.array(
        [t * (1.0 - layer_stretch(stress, g)) for t, g in zip(stack.thickness, stack.base_moduli)]
    )


def compression_state(stack: LayerStack, displacement: float):
    """Equilibrium of the stack at an imposed displacement.

    Returns ``(stress_kPa, layer_compressions_mm)`` where the compressions
    sum to ``displacement``.
    """
    total = stack.total_thickness
    if not 0 <= displacement < total:
        raise DomainError(f"displacement must lie in [0, {total}) mm")
    if displacement == 0:
        return 0.0, np.zeros(len(stack.thickness))

    def excess(s):
        return float(_compression(s, stack).sum()) - displacement

    hi = min(stack.base_moduli)
    while excess(hi) < 0:
        hi *= 4.0
        if not math.isfinite(hi):
            raise ConvergenceError("could not bracket the equilibrium stress")
    s1, info = optimize.brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                               maxiter=500, full_output=True)
    if not info.converged or abs(excess(s1)) > ROOT_TOL:
        raise ConvergenceError("stack equilibrium did not converge")
    return s1 * stack.k, _compression(s1, stack)


def forward_compression(stack: LayerStack, displacement) -> np.ndarray | float:
    """Contact force (N) needed to compress the stack by ``displacement`` mm.

    The equilibrium is solved for the ``k = 1`` stack and the stress scaled
    by ``k``; the law is linear in the moduli, so force is exactly
    proportional to ``k``.
    """
    d = np.asarray(displacement, dtype=float)
    flat = d.reshape(-1)
    out = np.empty(flat.shape)
    for i, di in enumerate(flat):
        stress, _ = compression_state(stack.with_scale(1.0), float(di))
        out[i] = stress
    force = stack.k * out * stack.area * KPA_TO_N_PER_MM2
    if d.ndim == 0:
        return float(force[0])
    return force.reshape(d.shape)


def r_squared(observed, predicted) -> float:
    """Coefficient of determination of ``predicted`` against ``observed``; may be negative."""
    y = np.asarray(observed, dtype=float)
    yhat = np.asarray(predicted, dtype=float)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        raise FitError("observed forces are constant; R^2 is undefined")
    return 1.0 - float(((y - yhat) ** 2).sum()) / ss_tot


@dataclass(frozen=True)
class ScaleFit:
    k: float
    r2: tuple[float, ...]
    stack: LayerStack = field(repr=False)

    @property
    def mean_r2(self) -> float:
        return float(np.mean(self.r2))

    @property
    def softness(self) -> float:
        return softness_index(self.k)

    @property
    def moduli(self) -> dict[str, float]:
        return dict(zip(LAYERS, moduli_from_scale(self.k, self.stack.base_moduli)))


def fit_scale(
    curves,
    stack: LayerStack | None = None,
    bounds: tuple[float, float] = (0.05, 50.0),
    xtol: float = 1e-8,
) -> ScaleFit:
    """Fit the modulus scale ``k`` to measured force-displacement curves.

    ``curves`` is a sequence of ``(d_mm, force_N)`` pairs (or objects with
    ``d`` and ``F`` attributes). The average R^2 over curves is maximized
    by bounded Brent search in ``log k``.
    """
    stack = stack or LayerStack()
    lo, hi = bounds
    if not 0 < lo < hi:
        raise ValueError("bounds must be positive and ordered")
    data = []
    for c in curves:
        d, F = (c.d, c.F) if hasattr(c, "d") else c
        d, F = np.asarray(d, dtype=float), np.asarray(F, dtype=float)
        if d.shape != F.shape or d.size < 2:
            raise ValueError("each curve needs matching d and F with at least 2 points")
        # unit-scale prediction; force is linear in k
        data.append((F, forward_compression(stack.with_scale(1.0), d)))
    if not data:
        raise ValueError("no curves to fit")

    def mean_r2(k):
        return float(np.mean([r_squared(F, k * base) for F, base in data]))

    probes = [mean_r2(k) for k in np.geomspace(lo, hi, 9)]
    if max(probes) - min(probes) <= 1e-12 * max(1.0, abs(max(probes))):
        raise FitError("objective is flat across the bounds")

    res = optimize.minimize_scalar(
        lambda logk: -mean_r2(math.exp(logk)),
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": xtol},
    )
    k = math.exp(res.x)
    return ScaleFit(k, tuple(r_squared(F, k * base) for F, base in data), stack.with_scale(k))
