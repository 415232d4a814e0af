"""Dirichlet-multinomial probability kernel.

Everything here works in log space. Likelihoods are *sequence* likelihoods:
the multinomial coefficient is never included, so for any split of the data
``log_marginal(b, a + c) == log_marginal(b, a) + log_marginal(update(b, a), c)``
holds exactly (up to rounding), and the coefficient cancels from every
posterior ratio computed by :mod:`bayesauth.rules`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

__all__ = [
    "MultinomialModel",
    "CountVector",
    "DirichletBelief",
    "PriorOdds",
    "log_likelihood",
    "posterior_update",
    "log_marginal",
    "sample_dirichlet",
    "sample_dirichlet_many",
    "sample_sequence",
    "sample_counts",
]


def _as_vector(values, name):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _check_degree(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


@dataclass(frozen=True, eq=False)
class MultinomialModel:
    """A point in the simplex: outcome probabilities of degree K."""

    probs: np.ndarray

    def __post_init__(self):
        p = _as_vector(self.probs, "probs")
        if p.size < 2:
            raise ValueError("a multinomial model needs K >= 2 outcomes")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def degree(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class CountVector:
    """Event counts of degree K.

    Fractional counts are allowed; they arise from weighted conditioning.
    ``sequence`` optionally keeps the ordered symbols the counts came from.
    """

    counts: np.ndarray
    sequence: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        c = _as_vector(self.counts, "counts")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValueError("counts must be finite and nonnegative")
        object.__setattr__(self, "counts", c)
        if self.sequence is not None:
            s = np.array(self.sequence, dtype=np.int64)
            s.setflags(write=False)
            object.__setattr__(self, "sequence", s)

    @classmethod
    def empty(cls, degree: int) -> "CountVector":
        return cls(np.zeros(degree))

    @classmethod
    def from_sequence(cls, sequence, degree: int) -> "CountVector":
        seq = np.asarray(sequence, dtype=np.int64)
        if seq.size and (seq.min() < 0 or seq.max() >= degree):
            raise ValueError(f"symbols must lie in [0, {degree})")
        return cls(np.bincount(seq, minlength=degree).astype(float), sequence=seq)

    @property
    def degree(self) -> int:
        return self.counts.size

    @property
    def n(self) -> float:
        return float(self.counts.sum())

    def is_integral(self) -> bool:
        return bool(np.all(self.counts == np.round(self.counts)))

    def __add__(self, other: "CountVector") -> "CountVector":
        _check_degree(self.counts, other.counts)
        return CountVector(self.counts + other.counts)

    def scaled(self, weight: float) -> "CountVector":
        return CountVector(self.counts * weight)


@dataclass(frozen=True, eq=False)
class DirichletBelief:
    """Dirichlet parameters (pseudo-counts), all strictly positive."""

    phi: np.ndarray

    def __post_init__(self):
        phi = _as_vector(self.phi, "phi")
        if phi.size < 2:
            raise ValueError("a Dirichlet belief needs K >= 2 parameters")
        if not np.all(phi > 0) or not np.all(np.isfinite(phi)):
            raise ValueError("Dirichlet parameters must be finite and > 0")
        object.__setattr__(self, "phi", phi)

    @property
    def degree(self) -> int:
        return self.phi.size

    @property
    def concentration(self) -> float:
        return float(self.phi.sum())

    def mean(self) -> MultinomialModel:
        p = self.phi / self.phi.sum()
        return MultinomialModel(p / p.sum())

    def log_normalizer(self) -> float:
        """ln B(phi), the log multivariate Beta function."""
        return float(gammaln(self.phi).sum() - gammaln(self.phi.sum()))


@dataclass(frozen=True)
class PriorOdds:
    """Prior probability that the user (not the adversary) produced the data."""

    p_user: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p_user < 1.0:
            raise ValueError(f"p_user must lie in (0, 1), got {self.p_user}")

    @property
    def p_adversary(self) -> float:
        return 1.0 - self.p_user


def log_likelihood(model: MultinomialModel, obs: CountVector) -> float:
    """Sequence log-likelihood sum_i c_i ln mu_i (no multinomial coefficient)."""
    _check_degree(model.probs, obs.counts)
    c = obs.counts
    hit = c > 0
    p = model.probs[hit]
    if np.any(p == 0):
        return -np.inf
    return float(np.dot(c[hit], np.log(p)))


def posterior_update(belief: DirichletBelief, obs: CountVector) -> DirichletBelief:
    """Conjugate update phi'_i = phi_i + c_i."""
    _check_degree(belief.phi, obs.counts)
    return DirichletBelief(belief.phi + obs.counts)


_RISING_MAX_N = 512


def _log_marginal(phi: np.ndarray, counts: np.ndarray) -> float:
    hit = counts > 0
    if not hit.any():
        return 0.0
    a = phi[hit]
    c = counts[hit]
    s = phi.sum()
    n = c.sum()
    if n <= _RISING_MAX_N and np.all(c == np.floor(c)):
        # Gamma(a + c) / Gamma(a) = a (a + 1) ... (a + c - 1): no cancellation for large a
        ci = c.astype(np.int64)
        starts = np.repeat(a, ci)
        offsets = np.arange(ci.sum()) - np.repeat(np.cumsum(ci) - ci, ci)
        return float(np.log(starts + offsets).sum() - np.log(s + np.arange(int(n))).sum())
    return float((gammaln(a + c) - gammaln(a)).sum() + gammaln(s) - gammaln(s + n))


def log_marginal(belief: DirichletBelief, obs: CountVector) -> float:
    """Polya (Dirichlet-compound-multinomial) log marginal of an ordered sample.

    ln[ Gamma(S) / Gamma(S + n) * prod_i Gamma(phi_i + c_i) / Gamma(phi_i) ]
    with S = sum(phi).
    """
    _check_degree(belief.phi, obs.counts)
    return _log_marginal(belief.phi, obs.counts)


def _log_dirichlet_draw(phi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # Gamma(a) = Gamma(a + 1) * U**(1/a); done in logs so tiny a cannot underflow.
    phi = np.asarray(phi, dtype=float)
    small = phi < 1.0
    logg = np.log(rng.gamma(np.where(small, phi + 1.0, phi)))
    if small.any():
        u = rng.random(phi.shape)
        with np.errstate(divide="ignore", over="ignore"):
            logg = np.where(small, logg + np.log(u) / phi, logg)
    return logg - logsumexp(logg, axis=-1, keepdims=True)


def sample_dirichlet(belief: DirichletBelief, rng: np.random.Generator) -> MultinomialModel:
    """Draw mu ~ Dirichlet(phi) via normalized independent Gamma(phi_i, 1) draws."""
    p = np.exp(_log_dirichlet_draw(belief.phi, rng))
    return MultinomialModel(p / p.sum())


def sample_dirichlet_many(phi: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised ``sample_dirichlet``: returns a (size, K) array of probability rows."""
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (size, len(phi)))
    p = np.exp(_log_dirichlet_draw(phi, rng))
    return p / p.sum(axis=1, keepdims=True)


def sample_sequence(model: MultinomialModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. categorical symbols in [0, K)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cdf = np.cumsum(model.probs)
    idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    return np.minimum(idx, model.degree - 1)


def sample_counts(model: MultinomialModel, n: int, rng: np.random.Generator) -> CountVector:
    """Counts of n categorical draws; the ordered draws are kept in ``.sequence``."""
    return CountVector.from_sequence(sample_sequence(model, n, rng), model.degree)
