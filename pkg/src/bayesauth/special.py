"""Log-gamma and digamma with explicit domain checks.

Both wrap the Cephes routines shipped with scipy, which combine rational /
Stirling approximations with argument recurrences and are accurate to a few
ulp on the positive axis.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _sp

__all__ = ["log_gamma", "digamma"]


def _check_positive(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"{name} is defined here only for x > 0, got {x!r}")
    return arr


def log_gamma(x):
    """Return ln Gamma(x) for x > 0 (scalar or array)."""
    arr = _check_positive(x, "log_gamma")
    out = _sp.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def digamma(x):
    """Return Psi(x) = d/dx ln Gamma(x) for x > 0 (scalar or array)."""
    arr = _check_positive(x, "digamma")
    out = _sp.digamma(arr)
    return float(out) if out.ndim == 0 else out
