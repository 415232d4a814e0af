"""Percentile bootstrap for error rates."""

from __future__ import annotations

import numpy as np

__all__ = ["bootstrap_percentiles"]


def bootstrap_percentiles(samples, replicates=100, lo=5.0, hi=95.0, rng=None):
    """Resample ``samples`` with replacement and summarise the replicate means.

    Returns ``(lo_percentile, sample_mean, hi_percentile)``. The band is
    widened to include the sample mean when a small number of replicates
    leaves it outside.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot bootstrap an empty sample")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if not 0 <= lo <= hi <= 100:
        raise ValueError("need 0 <= lo <= hi <= 100")
    rng = np.random.default_rng() if rng is None else rng
    idx = rng.integers(0, x.size, size=(replicates, x.size))
    means = x[idx].mean(axis=1)
    mean = float(x.mean())
    p_lo, p_hi = np.percentile(means, [lo, hi])
    return min(float(p_lo), mean), mean, max(float(p_hi), mean)
