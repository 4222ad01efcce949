"""Small statistical helpers shared by the estimation modules."""

from __future__ import annotations

from math import erfc, sqrt

import numpy as np


def wilson_interval(hits: int, total: int, z: float = 1.96):
    """Wilson score interval for a binomial proportion.  Returns (lo, hi)."""
    if total <= 0:
        raise ValueError("total must be positive")
    p = hits / total
    z2 = z * z
    denom = 1 + z2 / total
    center = (p + z2 / (2 * total)) / denom
    half = (z / denom) * sqrt(p * (1 - p) / total + z2 / (4 * total * total))
    lo, hi = max(0.0, center - half), min(1.0, center + half)
    # the analytic endpoints are exact at the corners; don't let float
    # cancellation report a strictly positive floor for zero hits
    if hits == 0:
        lo = 0.0
    if hits == total:
        hi = 1.0
    return lo, hi


def mean_stderr(samples) -> tuple[float, float]:
    """Sample mean and its standard error (ddof=1; zero se for size-1)."""
    x = np.asarray(samples, dtype=np.float64)
    m = float(x.mean())
    if len(x) < 2:
        return m, 0.0
    return m, float(x.std(ddof=1) / sqrt(len(x)))


def slope_vs(x, y) -> float:
    """Least-squares slope of y against x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2:
        return 0.0
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0:
        return 0.0
    return float(np.dot(xc, y - y.mean()) / denom)


def proportion_trend_test(hits, totals, scores=None) -> dict:
    """Cochran-Armitage style trend test across ordered binomial groups.

    Returns the z statistic and one-sided p-values for increasing and
    decreasing alternatives.  A flat profile gives z near 0.
    """
    x = np.asarray(hits, dtype=np.float64)
    N = np.asarray(totals, dtype=np.float64)
    s = np.arange(len(x), dtype=np.float64) if scores is None else np.asarray(
        scores, dtype=np.float64
    )
    p_bar = x.sum() / N.sum()
    T = float(np.dot(x, s))
    expect = p_bar * float(np.dot(N, s))
    var = p_bar * (1 - p_bar) * (
        float(np.dot(N, s * s)) - float(np.dot(N, s)) ** 2 / N.sum()
    )
    if var <= 0:
        return {"z": 0.0, "p_increasing": 1.0, "p_decreasing": 1.0}
    z = (T - expect) / sqrt(var)
    return {
        "z": z,
        "p_increasing": 0.5 * erfc(z / sqrt(2)),
        "p_decreasing": 0.5 * erfc(-z / sqrt(2)),
    }
