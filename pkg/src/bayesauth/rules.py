"""Decision rules: who generated the observation, the user or an adversary?

Every rule returns the posterior probability of the user. The non-oracle
rules differ only in the data f(x) used to condition the adversary prior
before the *whole* observation is scored against it:

=================  ==========================  ======
rule               conditioning data f(x)      legend
=================  ==========================  ======
World              nothing                     world
BiasAllButLast     all but the last item       bias
FullBias           every item                  f_bias
PartialBias(a)     a * counts of every item    p_bias
FirstHalfBias      first floor(n/2) items      n_bias
=================  ==========================  ======

Conditioning on the observation itself can only raise its marginal
likelihood under the adversary belief, so each biased rule is a pessimistic
(lower) bound on the world-model posterior.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .probcore import (
    CountVector,
    DirichletBelief,
    MultinomialModel,
    PriorOdds,
    _check_degree,
    _log_marginal,
    log_likelihood,
)

__all__ = [
    "RuleKind",
    "DecisionRule",
    "Verdict",
    "as_items",
    "oracle_decide",
    "world_decide",
    "bias_transform",
    "biased_decide",
    "lemma1_gap",
    "mixture_gap",
    "lemma1_sweep",
    "STANDARD_RULES",
]


class RuleKind(enum.Enum):
    ORACLE = "oracle"
    WORLD = "world"
    BIAS_ALL_BUT_LAST = "bias"
    FULL_BIAS = "f_bias"
    PARTIAL_BIAS = "p_bias"
    FIRST_HALF_BIAS = "n_bias"


@dataclass(frozen=True)
class DecisionRule:
    kind: RuleKind
    weight: float = 1.0

    def __post_init__(self):
        if self.kind is RuleKind.PARTIAL_BIAS and not 0.0 < self.weight <= 1.0:
            raise ValueError(f"partial-bias weight must lie in (0, 1], got {self.weight}")

    @classmethod
    def oracle(cls):
        return cls(RuleKind.ORACLE)

    @classmethod
    def world(cls):
        return cls(RuleKind.WORLD)

    @classmethod
    def bias_all_but_last(cls):
        return cls(RuleKind.BIAS_ALL_BUT_LAST)

    @classmethod
    def full_bias(cls):
        return cls(RuleKind.FULL_BIAS)

    @classmethod
    def partial_bias(cls, weight: float = 0.5):
        return cls(RuleKind.PARTIAL_BIAS, float(weight))

    @classmethod
    def first_half_bias(cls):
        return cls(RuleKind.FIRST_HALF_BIAS)

    @classmethod
    def parse(cls, name: str) -> "DecisionRule":
        """Inverse of :attr:`name`, e.g. ``"p_bias"`` or ``"p_bias(0.25)"``."""
        name = name.strip()
        if name.startswith("p_bias(") and name.endswith(")"):
            return cls.partial_bias(float(name[7:-1]))
        if name == "p_bias":
            return cls.partial_bias(0.5)
        try:
            return cls(RuleKind(name))
        except ValueError:
            raise ValueError(f"unknown decision rule {name!r}") from None

    @property
    def name(self) -> str:
        if self.kind is RuleKind.PARTIAL_BIAS and self.weight != 0.5:
            return f"p_bias({self.weight:g})"
        return self.kind.value


STANDARD_RULES = (
    DecisionRule.oracle(),
    DecisionRule.world(),
    DecisionRule.bias_all_but_last(),
    DecisionRule.full_bias(),
    DecisionRule.partial_bias(0.5),
    DecisionRule.first_half_bias(),
)


@dataclass(frozen=True)
class Verdict:
    """Posterior probability of the user; ties (exactly 0.5) go to the user."""

    p_user: float
    log_odds: float
    rule: DecisionRule

    @property
    def decided_user(self) -> bool:
        return self.p_user >= 0.5


def _verdict(log_user: float, log_adv: float, prior: PriorOdds, rule: DecisionRule) -> Verdict:
    if log_user == -np.inf and log_adv == -np.inf:
        raise ValueError("observation has zero probability under both hypotheses")
    a = log_user + np.log(prior.p_user)
    b = log_adv + np.log(prior.p_adversary)
    if a == np.inf or b == -np.inf:
        log_odds = np.inf
    elif b == np.inf or a == -np.inf:
        log_odds = -np.inf
    else:
        log_odds = a - b
    return Verdict(float(expit(log_odds)), float(log_odds), rule)


def oracle_decide(
    q: MultinomialModel, w: MultinomialModel, prior: PriorOdds, obs: CountVector
) -> Verdict:
    """Bayes' rule with both generating models known."""
    _check_degree(q.probs, w.probs)
    return _verdict(log_likelihood(q, obs), log_likelihood(w, obs), prior, DecisionRule.oracle())


def as_items(obs, degree: int | None = None) -> np.ndarray:
    """Normalise an ordered observation to a (n_items, K) array of counts.

    Accepts a 1-D sequence of symbols (needs ``degree``), a CountVector
    carrying its sequence, a single CountVector (one item, e.g. one day's
    record), or an already stacked 2-D array of per-item counts.
    """
    if isinstance(obs, CountVector):
        if obs.sequence is not None:
            return as_items(obs.sequence, obs.degree)
        return obs.counts[None, :]
    arr = np.asarray(obs)
    if arr.ndim == 2:
        return arr.astype(float, copy=False)
    if arr.ndim == 1:
        if degree is None:
            raise ValueError("a symbol sequence needs an explicit degree")
        seq = arr.astype(np.int64)
        if seq.size and (seq.min() < 0 or seq.max() >= degree):
            raise ValueError(f"symbols must lie in [0, {degree})")
        items = np.zeros((seq.size, degree))
        items[np.arange(seq.size), seq] = 1.0
        return items
    raise ValueError(f"cannot interpret observation of shape {arr.shape}")


def _conditioning_counts(kind: RuleKind, weight: float, items: np.ndarray) -> np.ndarray:
    n = items.shape[0]
    if kind is RuleKind.WORLD:
        return np.zeros(items.shape[1])
    if kind is RuleKind.BIAS_ALL_BUT_LAST:
        return items[: n - 1].sum(axis=0)
    if kind is RuleKind.FULL_BIAS:
        return items.sum(axis=0)
    if kind is RuleKind.PARTIAL_BIAS:
        return weight * items.sum(axis=0)
    if kind is RuleKind.FIRST_HALF_BIAS:
        return items[: n // 2].sum(axis=0)
    raise ValueError(f"{kind.value} has no conditioning transform")


def bias_transform(rule: DecisionRule, obs_sequence, degree: int | None = None) -> CountVector:
    """Counts f(x) used to condition the adversary prior for ``rule``."""
    items = as_items(obs_sequence, degree)
    if items.shape[0] == 0:
        raise ValueError("observation sequence is empty")
    return CountVector(_conditioning_counts(rule.kind, rule.weight, items))


def _score(user_phi, adv_phi, cond, counts, prior, rule) -> Verdict:
    return _verdict(
        _log_marginal(user_phi, counts),
        _log_marginal(adv_phi + cond, counts),
        prior,
        rule,
    )


def world_decide(
    user_belief: DirichletBelief,
    world_belief: DirichletBelief,
    prior: PriorOdds,
    obs: CountVector,
) -> Verdict:
    """World-model rule: both hypotheses scored by their Dirichlet marginals."""
    _check_degree(user_belief.phi, world_belief.phi)
    _check_degree(user_belief.phi, obs.counts)
    zero = np.zeros(obs.degree)
    return _score(user_belief.phi, world_belief.phi, zero, obs.counts, prior, DecisionRule.world())


def biased_decide(
    user_belief: DirichletBelief,
    adversary_prior: DirichletBelief,
    rule: DecisionRule,
    prior: PriorOdds,
    obs_sequence,
    degree: int | None = None,
) -> Verdict:
    """Pessimistic rule: condition the adversary prior on f(x), then score all of x."""
    if rule.kind is RuleKind.ORACLE:
        raise ValueError("the oracle rule needs the true models; use oracle_decide")
    _check_degree(user_belief.phi, adversary_prior.phi)
    items = as_items(obs_sequence, degree if degree is not None else user_belief.degree)
    if items.shape[0] == 0:
        raise ValueError("observation sequence is empty")
    _check_degree(user_belief.phi, items[0])
    cond = _conditioning_counts(rule.kind, rule.weight, items)
    return _score(user_belief.phi, adversary_prior.phi, cond, items.sum(axis=0), prior, rule)


def lemma1_gap(belief: DirichletBelief, obs: CountVector) -> float:
    """ln xi'(x) - ln xi(x) where xi' is the belief conditioned on x itself.

    Never negative (beyond rounding). For integral counts the log-gamma
    ratios telescope into sums of log1p terms, which keeps the result
    accurate even when the belief is extremely concentrated.
    """
    _check_degree(belief.phi, obs.counts)
    c = obs.counts
    if not np.any(c > 0):
        return 0.0
    phi = belief.phi
    if obs.is_integral():
        # ln G(a+2c) - 2 ln G(a+c) + ln G(a) = sum_{m<c} ln((a+c+m)/(a+m))
        def telescoped(a, cnt):
            m = np.arange(cnt)
            return np.log1p(cnt / (a + m)).sum()

        hit = np.flatnonzero(c)
        up = sum(telescoped(phi[i], int(c[i])) for i in hit)
        down = telescoped(phi.sum(), int(c.sum()))
        return float(up - down)
    post = phi + c
    return _log_marginal(post, c) - _log_marginal(phi, c)


def mixture_gap(log_weights, log_likelihoods) -> float:
    """The same gap for a discrete prior over point models.

    With xi(mu) = exp(log_weights) and mu(x) = exp(log_likelihoods):
    xi(x) = sum mu(x) xi(mu) and xi'(x) = sum mu(x)^2 xi(mu) / xi(x).
    """
    lw = np.asarray(log_weights, dtype=float)
    ll = np.asarray(log_likelihoods, dtype=float)
    lw = lw - logsumexp(lw)
    log_xi = logsumexp(ll + lw)
    log_xi_post = logsumexp(2.0 * ll + lw) - log_xi
    return float(log_xi_post - log_xi)


def lemma1_sweep(trials=10_000, mixtures=1_000, seed=0, max_degree=20, max_n=30):
    """Randomised check that conditioning never lowers the marginal likelihood.

    Draws ``trials`` Dirichlet beliefs (log-uniform parameters in [0.01, 100],
    K in 2..max_degree) with observations of n in 1..max_n items, plus
    ``mixtures`` discrete priors over 2..10 point models. Returns the smallest
    gap of each kind.
    """
    rng = np.random.default_rng(seed)
    min_dir = np.inf
    for _ in range(trials):
        k = int(rng.integers(2, max_degree + 1))
        n = int(rng.integers(1, max_n + 1))
        phi = 10.0 ** rng.uniform(-2, 2, size=k)
        p = rng.dirichlet(np.ones(k))
        counts = rng.multinomial(n, p).astype(float)
        min_dir = min(min_dir, lemma1_gap(DirichletBelief(phi), CountVector(counts)))
    min_mix = np.inf
    for _ in range(mixtures):
        k = int(rng.integers(2, max_degree + 1))
        m = int(rng.integers(2, 11))
        n = int(rng.integers(1, max_n + 1))
        models = rng.dirichlet(np.ones(k), size=m)
        counts = rng.multinomial(n, rng.dirichlet(np.ones(k))).astype(float)
        with np.errstate(divide="ignore"):
            ll = (counts * np.log(models)).sum(axis=1)
        weights = rng.dirichlet(np.ones(m))
        min_mix = min(min_mix, mixture_gap(np.log(weights), ll))
    return {"trials": trials, "mixtures": mixtures, "min_gap_dirichlet": float(min_dir),
            "min_gap_mixture": float(min_mix), "min_gap": float(min(min_dir, min_mix))}
