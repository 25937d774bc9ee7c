"""Gross contact area of an ink print from its digitized outline."""

from __future__ import annotations

import csv
import io
import os
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["ContactPrint", "pixel_scale", "shoelace", "polygon_area", "load_print"]

DEFAULT_BAR_CM = 5.0


@dataclass(frozen=True, eq=False)
class ContactPrint:
    """Outline vertices in pixels plus the reference bar used for calibration.

    The outline is assumed to be a simple polygon; self-intersection is not
    checked (see :func:`polygon_area`).
    """

    boundary: np.ndarray
    scale_bar_px: float
    scale_bar_cm: float = DEFAULT_BAR_CM

    def __post_init__(self):
        pts = np.asarray(self.boundary, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("boundary must be a sequence of (x, y) vertices")
        if not np.all(np.isfinite(pts)):
            raise ValueError("boundary vertices must be finite")
        object.__setattr__(self, "boundary", pts)


def pixel_scale(print_: ContactPrint) -> float:
    """Centimeters per pixel."""
    if not print_.scale_bar_px > 0:
        raise ValueError("scale bar length must be positive")
    return print_.scale_bar_cm / print_.scale_bar_px


def shoelace(vertices) -> float:
    """Signed polygon area (counter-clockwise positive) in the vertices' units."""
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    # centering first keeps the cross terms small for far-off coordinates
    c = pts - pts.mean(axis=0)
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(print_: ContactPrint) -> float:
    """Print area in cm^2 by the shoelace formula.

    Emits a ``RuntimeWarning`` when the per-edge cross terms taken about the
    vertex centroid have mixed signs, which is how a self-intersecting
    outline (or one that is not star-shaped about its centroid) shows up.
    """
    pts = print_.boundary
    if pts.shape[0] < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    scale = pixel_scale(print_)
    c = pts - pts.mean(axis=0)
    terms = c[:, 0] * np.roll(c[:, 1], -1) - np.roll(c[:, 0], -1) * c[:, 1]
    tol = 1e-12 * np.abs(terms).max(initial=0.0)
    if np.any(terms > tol) and np.any(terms < -tol):
        warnings.warn("outline cross terms change sign; polygon may self-intersect",
                      RuntimeWarning, stacklevel=2)
    return abs(0.5 * float(terms.sum())) * scale**2


def load_print(source, scale_bar_cm: float = DEFAULT_BAR_CM) -> ContactPrint:
    """Read an ``x_px,y_px`` outline CSV carrying a ``scale_bar_px,<n>`` line.

    An optional ``scale_bar_cm,<n>`` line overrides ``scale_bar_cm``.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8")
    else:
        text = source.read()
    pts, bar_px = [], None
    header_seen = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        row = [f.strip() for f in row]
        if not row or not row[0] or row[0].startswith("#"):
            continue
        key = row[0].lower()
        if key == "x_px":
            header_seen = True
            continue
        try:
            if key == "scale_bar_px":
                bar_px = float(row[1])
            elif key == "scale_bar_cm":
                scale_bar_cm = float(row[1])
            else:
                if len(row) != 2:
                    raise ValueError(f"expected 2 fields, got {len(row)}")
                pts.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not header_seen:
        raise ValueError("missing 'x_px,y_px' header")
    if bar_px is None:
        raise ValueError("missing 'scale_bar_px,<n>' line")
    return ContactPrint(np.array(pts, dtype=float).reshape(-1, 2), bar_px, scale_bar_cm)
