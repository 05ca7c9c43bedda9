"""Small numerical helpers shared across modules."""

from __future__ import annotations

import numpy as np

#: Default verdict threshold on fitted log-log slopes.
SLOPE_THRESHOLD = 0.05


def log_grid(lo: float, hi: float, per_decade: int = 40) -> np.ndarray:
    """Log-spaced grid from ``lo`` to ``hi`` with at most ``per_decade`` points per decade."""
    if lo <= 0 or hi <= lo:
        raise ValueError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    decades = np.log10(hi / lo)
    n = max(2, int(np.ceil(decades * per_decade)) + 1)
    return np.logspace(np.log10(lo), np.log10(hi), n)


def tail_half(t: np.ndarray) -> np.ndarray:
    """Boolean mask selecting the last half of a grid on a logarithmic scale."""
    t = np.asarray(t, dtype=float)
    lo, hi = np.log(t[0]), np.log(t[-1])
    return np.log(t) >= 0.5 * (lo + hi)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of ``log y`` against ``log x``.

    Zero values are dropped; returns ``0.0`` if fewer than two usable points remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def tail_slope(t: np.ndarray, values: np.ndarray) -> float:
    """Log-log slope fitted over the last half of the grid."""
    t = np.asarray(t, dtype=float)
    mask = tail_half(t)
    if mask.sum() < 2:
        mask = np.ones_like(mask)
    return loglog_slope(t[mask], np.asarray(values)[mask])


def polynomial_extrapolate(x: np.ndarray, y: np.ndarray, degree: int | None = None) -> float:
    """Extrapolate samples ``y(x)`` to ``x = 0`` with a polynomial fit.

    With ``degree=None`` the interpolating polynomial through all points is used,
    which is Richardson extrapolation on a non-uniform grid.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if degree is None:
        degree = len(x) - 1
    coeffs = np.polyfit(x, y, degree)
    return float(coeffs[-1])
