"""Empirical-Bayes world model: maximum-likelihood Dirichlet over user models.

Each population member contributes one count vector drawn from their own
multinomial, itself drawn from an unknown Dirichlet. The Dirichlet is fitted
by Minka's fixed point for the Polya (compound multinomial) likelihood::

    phi_i <- phi_i * sum_k [Psi(c_ik + phi_i) - Psi(phi_i)]
                   / sum_k [Psi(n_k + S) - Psi(S)],      S = sum_i phi_i

For integral counts the digamma differences are evaluated with the exact
identity Psi(a + c) - Psi(a) = sum_{m < c} 1 / (a + m), grouped over users by
count value; this makes the iteration cost independent of the number of users.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma as _digamma
from scipy.special import gammaln

from .probcore import CountVector, DirichletBelief, posterior_update

__all__ = [
    "PopulationData",
    "FitReport",
    "fit_dirichlet",
    "initialize_phi",
    "user_posterior",
    "population_log_likelihood",
    "PHI_FLOOR",
]

log = logging.getLogger(__name__)

PHI_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class PopulationData:
    """One count vector per person, stacked into a (users, K) array.

    Users without any counts carry no information about the prior and are
    dropped with a warning.
    """

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=float)
        if c.ndim != 2 or c.shape[1] < 2:
            raise ValueError(f"population counts must be (users, K>=2), got {c.shape}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("population counts must be finite and nonnegative")
        totals = c.sum(axis=1)
        empty = totals <= 0
        if empty.all():
            raise ValueError("every user in the population has zero counts")
        if empty.any():
            warnings.warn(f"dropping {int(empty.sum())} user(s) with no counts", stacklevel=3)
            c = c[~empty]
        if c.shape[0] < 2:
            raise ValueError("need at least 2 users with data to fit a prior")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_vectors(cls, users) -> "PopulationData":
        users = list(users)
        if not users:
            raise ValueError("empty population")
        return cls(np.vstack([u.counts if isinstance(u, CountVector) else u for u in users]))

    @property
    def n_users(self) -> int:
        return self.counts.shape[0]

    @property
    def degree(self) -> int:
        return self.counts.shape[1]

    def users(self) -> list[CountVector]:
        return [CountVector(row) for row in self.counts]


@dataclass(frozen=True, eq=False)
class FitReport:
    belief: DirichletBelief
    iterations: int
    final_relative_change: float
    converged: bool
    tolerance: float
    log_likelihood_trace: list[float] | None = field(default=None, repr=False)


def population_log_likelihood(data: PopulationData, phi) -> float:
    """Polya log-likelihood sum_k log_marginal(phi, c_k), without coefficients."""
    phi = np.asarray(phi, dtype=float)
    c = data.counts
    s = phi.sum()
    n = c.sum(axis=1)
    return float((gammaln(c + phi) - gammaln(phi)).sum() + (gammaln(s) - gammaln(s + n)).sum())


def initialize_phi(data: PopulationData) -> DirichletBelief:
    """Pooled frequencies, zero slots floored at 1e-3/K, rescaled to sum to K."""
    k = data.degree
    pooled = data.counts.sum(axis=0)
    freq = pooled / pooled.sum()
    freq = np.maximum(freq, 1e-3 / k)
    return DirichletBelief(k * freq / freq.sum())


class _DigammaSums:
    """Evaluates sum_k [Psi(c_ik + phi_i) - Psi(phi_i)] and the matching
    denominator for a fixed population, choosing the cheaper exact route."""

    def __init__(self, counts: np.ndarray, method: str = "auto"):
        self.counts = counts
        self.totals = counts.sum(axis=1)
        integral = bool(np.all(counts == np.round(counts)))
        max_c = int(counts.max()) if integral else 0
        if method == "auto":
            users, k = counts.shape
            method = "histogram" if integral and k * max_c <= 4 * users * k else "digamma"
        if method == "histogram" and not integral:
            raise ValueError("histogram evaluation needs integral counts")
        self.method = method
        if method == "histogram":
            ci = counts.astype(np.int64)
            # exceed[i, m] = number of users whose count of outcome i is > m
            hist = np.zeros((counts.shape[1], max_c + 1))
            for i in range(counts.shape[1]):
                hist[i] = np.bincount(ci[:, i], minlength=max_c + 1)
            self.exceed = hist[:, ::-1].cumsum(axis=1)[:, ::-1][:, 1:]
            self.offsets = np.arange(max_c, dtype=float)
            ni = self.totals.astype(np.int64)
            tot_hist = np.bincount(ni, minlength=ni.max() + 1).astype(float)
            self.total_exceed = tot_hist[::-1].cumsum()[::-1][1:]
            self.total_offsets = np.arange(ni.max(), dtype=float)

    def numerator(self, phi: np.ndarray) -> np.ndarray:
        if self.method == "histogram":
            return (self.exceed / (phi[:, None] + self.offsets)).sum(axis=1)
        return (_digamma(self.counts + phi) - _digamma(phi)).sum(axis=0)

    def denominator(self, s: float) -> float:
        if self.method == "histogram":
            return float((self.total_exceed / (s + self.total_offsets)).sum())
        return float((_digamma(self.totals + s) - _digamma(s)).sum())


def fit_dirichlet(
    data: PopulationData,
    tolerance: float = 1e-8,
    max_iterations: int = 1000,
    init: DirichletBelief | None = None,
    trace: bool = False,
    method: str = "auto",
) -> FitReport:
    """Maximum-likelihood Dirichlet for a population via Minka's fixed point.

    Stops once the largest relative change of any coordinate is at most
    ``tolerance``. Hitting ``max_iterations`` first is reported through
    ``converged=False`` rather than raised.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    phi = (init if init is not None else initialize_phi(data)).phi.copy()
    if phi.size != data.degree:
        raise ValueError("initial belief degree does not match the population")
    sums = _DigammaSums(data.counts, method)
    lls = [population_log_likelihood(data, phi)] if trace else None

    change = np.inf
    it = 0
    while it < max_iterations:
        it += 1
        den = sums.denominator(phi.sum())
        new = np.maximum(phi * sums.numerator(phi) / den, PHI_FLOOR)
        change = float(np.max(np.abs(new - phi) / phi))
        phi = new
        if trace:
            lls.append(population_log_likelihood(data, phi))
        if change <= tolerance:
            break
    converged = change <= tolerance
    if not converged:
        log.warning("Dirichlet fit stopped after %d iterations (relative change %.3g)", it, change)
    return FitReport(DirichletBelief(phi), it, change, converged, tolerance, lls)


def user_posterior(prior: DirichletBelief, user_data: CountVector) -> DirichletBelief:
    """Posterior over one user's model after conditioning the world prior on their data."""
    return posterior_update(prior, user_data)
