"""Predicted and fitted relationship between anonymity and log reconstructability.

Under the log-linear embedding model, with related-term norms roughly equal to
a constant ``c``, log rho is linear in alpha with slope
``-c * l * |v(A)| / d``. The partition-function term is never estimated; it
is absorbed into the fitted intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class TheoryFit:
    slope: float
    intercept: float
    pearson_r: float
    r_squared: float
    sample_count: int


def predicted_log_rho(
    alpha: float, c: float, norm_A: float, d: int, l: int = 1, log_Z: float = 0.0
) -> float:
    return (c * l / (2.0 * d)) * (c + 2.0 * (1.0 - alpha) * norm_A) - log_Z


def predicted_slope(c: float, norm_A: float, d: int, l: int = 1) -> float:
    """d(log rho)/d(alpha) implied by :func:`predicted_log_rho`."""
    return -c * l * norm_A / d


def fit_relationship(points: Iterable[tuple[float, float]]) -> TheoryFit:
    """Least-squares line ``log_rho = slope * alpha + intercept`` plus Pearson r."""
    pts = np.array([(float(a), float(y)) for a, y in points], dtype=np.float64).reshape(-1, 2)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    if len(pts) < 3:
        raise FitError(f"need at least 3 finite points, got {len(pts)}")
    # Sort so the result does not depend on input order down to the last bit.
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    x, y = pts[:, 0], pts[:, 1]
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy, sxy = float(dx @ dx), float(dy @ dy), float(dx @ dy)
    if sxx <= 0 or len(np.unique(x)) < 2:
        raise FitError("alpha has zero variance")
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    r = 0.0 if syy == 0 else max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    return TheoryFit(slope, intercept, r, r * r, len(pts))


def coefficient_of_variation(values: Sequence[float]) -> float:
    """Population std / mean; checks the equal-norm assumption behind the line."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0 or arr.mean() == 0:
        return math.nan
    return float(arr.std() / arr.mean())
