"""Trace builders shared by several test modules."""

import numpy as np

from softcue.trace import Trace


def kinked_pair(t_star, r1, r2, duration=2.0, fs=1000.0):
    """Force ramps that agree until ``t_star`` then rise at ``r1`` and ``r2``.

    Returns the two traces and the analytic time at which the prefix
    dissimilarity first exceeds 10% of the running reference.
    """
    t = np.arange(int(round(duration * fs)) + 1) / fs
    h = r1 * t
    s = np.where(t <= t_star, r1 * t, r1 * t_star + r2 * (t - t_star))
    tau = 0.1 * r1 * t_star / (0.9 * r2 - r1)
    return Trace(t, h, "force"), Trace(t, s, "force"), t_star + tau
