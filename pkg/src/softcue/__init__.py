"""Computational tools for haptic softness perception studies.

Trace conditioning and cue extraction, virtual-stiffness estimation,
Fréchet-distance and Kalman-gain decision models, same-different signal
detection, layered skin calibration, contact-print geometry and the
supporting statistics.
"""

__version__ = "0.1.0"
