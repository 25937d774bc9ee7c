import math

import numpy as np
import pytest

from softcue.synth import (
    HertzParams,
    hertz_displacement,
    hertz_force,
    hertz_trace,
    spring_trace,
    triangle_profile,
)
from softcue.trace import Trace


def test_triangle_one_newton_per_second():
    tr = triangle_profile(1.0, 2.0, 1000.0)
    assert tr.duration == pytest.approx(4.0)
    i = int(np.argmax(tr.values))
    assert tr.values[i] == 2.0
    assert tr.t[i] == pytest.approx(2.0)


def test_triangle_two_newton_per_second():
    tr = triangle_profile(2.0, 2.0, 1000.0)
    assert tr.t[int(np.argmax(tr.values))] == pytest.approx(1.0)


@pytest.mark.parametrize("rate,peak,fs", [(0.5, 2.0, 80.0), (3.0, 1.3, 1500.0), (1.7, 0.9, 333.0)])
def test_triangle_peak_is_exact(rate, peak, fs):
    tr = triangle_profile(rate, peak, fs)
    assert tr.values.max() == peak
    assert tr.values.min() == 0.0


def test_triangle_rejects_nonpositive():
    with pytest.raises(ValueError):
        triangle_profile(0.0, 2.0, 100.0)


def _params_with_contact_modulus(estar_kpa, radius, nu=0.475):
    e = 2 * (1 - nu**2) * estar_kpa
    return HertzParams(e, e, radius, nu, nu)


def test_hertz_zero_force():
    p = HertzParams(100.0, 10.0, 4.0)
    prof = Trace([0, 1], [0.0, 0.0], "force")
    _, disp, radius = hertz_trace(p, prof)
    np.testing.assert_array_equal(disp.values, [0, 0])
    np.testing.assert_array_equal(radius, [0, 0])


def test_hertz_power_law():
    p = HertzParams(100.0, 10.0, 4.0)
    d = np.array([0.3, 1.1, 2.5])
    ratio = hertz_force(2 * d, p) / hertz_force(d, p)
    np.testing.assert_allclose(ratio, 2**1.5, rtol=1e-14)


def test_hertz_closed_form_against_bisection():
    p = _params_with_contact_modulus(10.0, 4.0)
    assert p.effective_modulus == pytest.approx(10.0, rel=1e-12)
    closed = float(hertz_displacement(2.0, p))
    assert closed == pytest.approx((3 * 2 / (4 * 0.01 * 2)) ** (2 / 3), rel=1e-12)

    # independent inversion of F = 4/3 E* sqrt(R) d^1.5 with E* in N/mm^2
    lo, hi = 0.0, 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 4 / 3 * 0.01 * math.sqrt(4.0) * mid**1.5 < 2.0:
            lo = mid
        else:
            hi = mid
    assert closed == pytest.approx(0.5 * (lo + hi), rel=1e-12)


def test_hertz_curve_is_increasing_convex_with_exact_contact_area():
    p = HertzParams(100.0, 90.0, 8.0)
    force, disp, radius = hertz_trace(p, triangle_profile(1.0, 2.0, 200.0))
    ramp = slice(0, int(np.argmax(force.values)) + 1)
    d, F = disp.values[ramp], force.values[ramp]
    assert np.all(np.diff(d) > 0) and np.all(np.diff(F) > 0)
    slopes = np.diff(F) / np.diff(d)
    assert np.all(np.diff(slopes) > 0)
    np.testing.assert_allclose(np.pi * radius**2, np.pi * p.radius * disp.values, rtol=1e-14)


def test_hertz_params_validation():
    with pytest.raises(ValueError):
        HertzParams(100.0, -1.0, 4.0)
    with pytest.raises(ValueError):
        HertzParams(100.0, 10.0, 4.0, finger_poisson=0.5)


def test_spring_displacement():
    prof = Trace([0.0, 1.0], [0.0, 2.0], "force")
    _, disp = spring_trace(1.0, prof)
    assert disp.values[1] == 2.0


def test_seeded_noise_is_deterministic():
    prof = triangle_profile(1.0, 2.0, 500.0)
    _, a = spring_trace(1.5, prof, 0.02, seed=7)
    _, b = spring_trace(1.5, prof, 0.02, seed=7)
    _, c = spring_trace(1.5, prof, 0.02, seed=8)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    p = HertzParams(100.0, 10.0, 4.0)
    _, h1, _ = hertz_trace(p, prof, 0.02, seed=3)
    _, h2, _ = hertz_trace(p, prof, 0.02, seed=3)
    np.testing.assert_array_equal(h1.values, h2.values)


def test_generated_traces_satisfy_trace_invariants():
    p = HertzParams(100.0, 50.0, 6.0)
    force, disp, _ = hertz_trace(p, triangle_profile(0.5, 2.0, 80.0), 0.02, seed=1)
    for tr in (force, disp):
        assert np.all(np.diff(tr.t) > 0)
        assert np.all(np.isfinite(tr.values))
