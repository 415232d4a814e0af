"""Synthetic study: error rates of every rule as evidence accumulates.

One run draws true priors for users and adversaries, fits the world model
from a simulated population, enrolls one user, then classifies a single
sequence (from the user or an adversary, by coin flip) at every prefix
length with all rules. Runs are independent and seeded from one
``SeedSequence``, so results do not depend on how runs are scheduled.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .bootstrap import bootstrap_percentiles
from .empirical_bayes import PopulationData, fit_dirichlet, user_posterior
from .probcore import (
    CountVector,
    DirichletBelief,
    MultinomialModel,
    PriorOdds,
    sample_dirichlet_many,
    sample_sequence,
)
from .rules import STANDARD_RULES, RuleKind, biased_decide, oracle_decide

__all__ = ["SynthConfig", "PrefixErrorCurve", "run_synthetic", "simulate_run"]


@dataclass(frozen=True)
class SynthConfig:
    runs: int = 10_000
    degree: int = 10
    sequence_length: int = 10
    population_size: int = 1000
    gamma_shape: float = 1.0
    gamma_scale: float = 1.0
    p_user_prior: float = 0.5
    seed: int = 0
    enrollment_length: int | None = None  # defaults to sequence_length
    share_prior: bool = False
    force_identical: bool = False
    replicates: int = 100
    fit_tolerance: float = 1e-8
    fit_max_iterations: int = 1000

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.degree < 2:
            raise ValueError("degree must be >= 2")
        if self.sequence_length < 1:
            raise ValueError("sequence_length must be >= 1")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not (self.gamma_shape > 0 and self.gamma_scale > 0):
            raise ValueError("Gamma shape and scale must be positive")
        if not 0 < self.p_user_prior < 1:
            raise ValueError("p_user_prior must lie in (0, 1)")
        if self.enrollment_length is not None and self.enrollment_length < 0:
            raise ValueError("enrollment_length must be >= 0")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    @property
    def enrollment(self) -> int:
        return self.sequence_length if self.enrollment_length is None else self.enrollment_length


@dataclass(frozen=True, eq=False)
class PrefixErrorCurve:
    """Per-rule error rates over prefix lengths 1..n with bootstrap bands.

    ``errors[r, j, t-1]`` is 1 when rule j misclassified run r's sequence
    truncated to t items. Every rule sees the same runs (paired design).
    """

    rules: tuple[str, ...]
    error_rate: np.ndarray  # (rules, n)
    lo: np.ndarray
    hi: np.ndarray
    errors: np.ndarray  # (runs, rules, n) uint8
    is_user: np.ndarray  # (runs,) bool
    config: SynthConfig

    def rule_index(self, name: str) -> int:
        return self.rules.index(name)

    def curve(self, name: str) -> np.ndarray:
        return self.error_rate[self.rule_index(name)]

    def rows(self):
        n = self.error_rate.shape[1]
        for t in range(1, n + 1):
            for j, name in enumerate(self.rules):
                yield t, name, self.error_rate[j, t - 1], self.lo[j, t - 1], self.hi[j, t - 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["prefix_len", "rule", "err", "lo5", "hi5"])
        for t, name, e, lo, hi in self.rows():
            w.writerow([t, name, repr(float(e)), repr(float(lo)), repr(float(hi))])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "config": asdict(self.config),
            "rules": list(self.rules),
            "curve": [
                {"prefix_len": t, "rule": name, "err": float(e), "lo5": float(lo), "hi5": float(hi)}
                for t, name, e, lo, hi in self.rows()
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _draw_priors(cfg: SynthConfig, rng: np.random.Generator):
    k = cfg.degree
    phi_user = rng.gamma(cfg.gamma_shape, cfg.gamma_scale, size=k)
    phi_adv = rng.gamma(cfg.gamma_shape, cfg.gamma_scale, size=k)
    # Gamma draws at small shape can underflow to exactly zero.
    phi_user = np.maximum(phi_user, 1e-300)
    phi_adv = np.maximum(phi_adv, 1e-300)
    models = sample_dirichlet_many(phi_user, cfg.population_size, rng)
    counts = rng.multinomial(cfg.sequence_length, models)
    fit = fit_dirichlet(
        PopulationData(counts), cfg.fit_tolerance, cfg.fit_max_iterations
    )
    return phi_user, phi_adv, fit.belief


def simulate_run(cfg: SynthConfig, seed_seq: np.random.SeedSequence, shared=None):
    """One independent run; returns (is_user, errors[rules, n])."""
    rng = np.random.default_rng(seed_seq)
    if shared is None:
        phi_user, phi_adv, world = _draw_priors(cfg, rng)
    else:
        phi_user, phi_adv, world = shared
    q = MultinomialModel(_normalized(sample_dirichlet_many(phi_user, 1, rng)[0]))
    w = q if cfg.force_identical else MultinomialModel(
        _normalized(sample_dirichlet_many(phi_adv, 1, rng)[0])
    )
    k = cfg.degree
    if cfg.enrollment > 0:
        enroll = CountVector.from_sequence(sample_sequence(q, cfg.enrollment, rng), k)
    else:
        enroll = CountVector.empty(k)
    psi = user_posterior(world, enroll)

    is_user = bool(rng.random() < cfg.p_user_prior)
    seq = sample_sequence(q if is_user else w, cfg.sequence_length, rng)
    prior = PriorOdds(cfg.p_user_prior)

    n = cfg.sequence_length
    errors = np.zeros((len(STANDARD_RULES), n), dtype=np.uint8)
    items = np.zeros((n, k))
    items[np.arange(n), seq] = 1.0
    for t in range(1, n + 1):
        prefix = items[:t]
        for j, rule in enumerate(STANDARD_RULES):
            if rule.kind is RuleKind.ORACLE:
                v = oracle_decide(q, w, prior, CountVector(prefix.sum(axis=0)))
            else:
                v = biased_decide(psi, world, rule, prior, prefix)
            errors[j, t - 1] = v.decided_user != is_user
    return is_user, errors


def _normalized(p):
    return p / p.sum()


def _run_chunk(args):
    cfg, seeds, shared = args
    return [simulate_run(cfg, s, shared) for s in seeds]


def run_synthetic(config: SynthConfig, workers: int = 1) -> PrefixErrorCurve:
    """Run the synthetic study and aggregate per-prefix error rates."""
    root = np.random.SeedSequence(config.seed)
    run_seeds, shared_seed, boot_seed = root.spawn(3)
    seeds = run_seeds.spawn(config.runs)
    shared = _draw_priors(config, np.random.default_rng(shared_seed)) if config.share_prior else None

    if workers > 1 and config.runs > 1:
        chunks = [seeds[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, [(config, c, shared) for c in chunks]))
        results = [None] * config.runs
        for i, part in enumerate(parts):
            results[i::workers] = part
    else:
        results = [simulate_run(config, s, shared) for s in seeds]

    is_user = np.array([r[0] for r in results], dtype=bool)
    errors = np.stack([r[1] for r in results])
    n_rules, n = errors.shape[1], errors.shape[2]
    boot_rng = np.random.default_rng(boot_seed)
    err = np.empty((n_rules, n))
    lo = np.empty_like(err)
    hi = np.empty_like(err)
    for j in range(n_rules):
        for t in range(n):
            lo[j, t], err[j, t], hi[j, t] = bootstrap_percentiles(
                errors[:, j, t], config.replicates, 5.0, 95.0, boot_rng
            )
    return PrefixErrorCurve(
        rules=tuple(r.name for r in STANDARD_RULES),
        error_rate=err,
        lo=lo,
        hi=hi,
        errors=errors,
        is_user=is_user,
        config=config,
    )
