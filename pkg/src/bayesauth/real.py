"""Held-out-user protocol on discretised access logs.

For each run the users are split: a world-model fraction fits the
population prior, the remainder are test users. Each repetition enrolls a
random qualifying test user on a random half of their day-records, then
scores either one of their held-out days or a day of another test user.

Error orientation: a *positive* is an intrusion alarm. A false positive is
a genuine user rejected; a false negative is an impostor accepted.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .accesslog import DataError, DiscretizedDataset
from .bootstrap import bootstrap_percentiles
from .empirical_bayes import PopulationData, fit_dirichlet, user_posterior
from .probcore import CountVector, PriorOdds
from .rules import DecisionRule, biased_decide

__all__ = [
    "RealConfig",
    "RuleOutcome",
    "RunReport",
    "InsufficientDataError",
    "run_real",
    "pooled_user_counts",
    "reports_to_csv",
    "reports_to_json",
]

log = logging.getLogger(__name__)

DEFAULT_RULES = ("world", "f_bias", "p_bias")


class InsufficientDataError(DataError):
    pass


@dataclass(frozen=True)
class RealConfig:
    runs: int = 10
    reps_per_run: int = 1000
    world_fraction: float = 2 / 3
    min_records_per_user: int = 10
    p_user_prior: float = 0.5
    rules: tuple[str, ...] = DEFAULT_RULES
    seed: int = 0
    replicates: int = 100
    fit_tolerance: float = 1e-8
    fit_max_iterations: int = 1000
    fit_unit: str = "user"  # "user": pooled counts per user; "day": one observation per day-record

    def __post_init__(self):
        if self.runs < 1 or self.reps_per_run < 1:
            raise ValueError("runs and reps_per_run must be >= 1")
        if not 0 < self.world_fraction < 1:
            raise ValueError("world_fraction must lie in (0, 1)")
        if self.min_records_per_user < 2:
            raise ValueError("min_records_per_user must be >= 2 (enroll on half, hold out the rest)")
        if not 0 < self.p_user_prior < 1:
            raise ValueError("p_user_prior must lie in (0, 1)")
        if self.fit_unit not in ("user", "day"):
            raise ValueError("fit_unit must be 'user' or 'day'")
        if not self.rules:
            raise ValueError("at least one rule is required")
        object.__setattr__(self, "rules", tuple(self.rules))
        for name in self.rules:
            if DecisionRule.parse(name).kind.value == "oracle":
                raise ValueError("the oracle rule is not realisable on recorded data")

    def decision_rules(self) -> list[DecisionRule]:
        return [DecisionRule.parse(r) for r in self.rules]


@dataclass(frozen=True)
class RuleOutcome:
    rule: str
    error_rate: float
    lo5: float
    hi5: float
    false_positives: int  # genuine user rejected
    false_negatives: int  # impostor accepted
    positives: int  # genuine trials
    negatives: int  # impostor trials

    @property
    def fp_fn_ratio(self) -> float | None:
        """FP / FN; None when there were no false negatives."""
        if self.false_negatives == 0:
            return None
        return self.false_positives / self.false_negatives


@dataclass(frozen=True)
class RunReport:
    run: int
    outcomes: tuple[RuleOutcome, ...]
    fit_iterations: int
    fit_converged: bool
    n_world_users: int
    n_test_users: int
    errors: np.ndarray = field(repr=False)  # (reps, rules) uint8
    genuine: np.ndarray = field(repr=False)  # (reps,) bool

    def outcome(self, rule: str) -> RuleOutcome:
        for o in self.outcomes:
            if o.rule == rule:
                return o
        raise KeyError(rule)


def pooled_user_counts(dataset: DiscretizedDataset, users) -> PopulationData:
    """One summed count vector per user over all their day-records."""
    users = list(users)
    if not users:
        raise DataError("no users to pool")
    rows = dataset.rows_by_user()
    vectors = []
    for u in users:
        idx = rows.get(u)
        if idx is None or len(idx) == 0:
            warnings.warn(f"user {u!r} has no records; skipped", stacklevel=2)
            continue
        vectors.append(np.asarray(dataset.counts[idx].sum(axis=0), dtype=float).ravel())
    if not vectors:
        raise DataError("none of the requested users has any records")
    return PopulationData(np.vstack(vectors))


def day_records(dataset: DiscretizedDataset, users) -> PopulationData:
    """Every day-record of ``users`` as a separate population observation."""
    rows = dataset.rows_by_user()
    idx = [rows[u] for u in users if u in rows]
    if not idx:
        raise DataError("none of the requested users has any records")
    return PopulationData(dataset.counts[np.concatenate(idx)].toarray().astype(float))


def _split(users, fraction, rng):
    order = rng.permutation(len(users))
    n_world = int(round(fraction * len(users)))
    world = [users[i] for i in order[:n_world]]
    test = [users[i] for i in order[n_world:]]
    return world, test


def _one_run(dataset, cfg, run, rng, rules, rows):
    users = dataset.user_ids()
    world_users, test_users = _split(users, cfg.world_fraction, rng)
    qualifying = [u for u in test_users if len(rows[u]) >= cfg.min_records_per_user]
    if len(world_users) < 2:
        raise InsufficientDataError(
            f"run {run}: world split has {len(world_users)} user(s); need at least 2"
        )
    if not qualifying:
        raise InsufficientDataError(
            f"run {run}: no test user has >= {cfg.min_records_per_user} day-records "
            f"({len(test_users)} test users)"
        )
    if len(test_users) < 2:
        raise InsufficientDataError(f"run {run}: need >= 2 test users to draw impostors, have {len(test_users)}")

    if cfg.fit_unit == "user":
        population = pooled_user_counts(dataset, world_users)
    else:
        population = day_records(dataset, world_users)
    fit = fit_dirichlet(population, cfg.fit_tolerance, cfg.fit_max_iterations)
    world = fit.belief
    prior = PriorOdds(cfg.p_user_prior)
    counts = dataset.counts

    errors = np.zeros((cfg.reps_per_run, len(rules)), dtype=np.uint8)
    genuine = np.zeros(cfg.reps_per_run, dtype=bool)
    for j in range(cfg.reps_per_run):
        user = qualifying[rng.integers(len(qualifying))]
        days = rows[user][rng.permutation(len(rows[user]))]
        n_enroll = len(days) // 2
        enroll = CountVector(np.asarray(counts[days[:n_enroll]].sum(axis=0), dtype=float).ravel())
        psi = user_posterior(world, enroll)
        is_user = bool(rng.random() < 0.5)
        if is_user:
            held_out = days[n_enroll:]
            row = held_out[rng.integers(len(held_out))]
        else:
            other = test_users[rng.integers(len(test_users) - 1)]
            if other == user:
                other = test_users[-1]
            pool = rows[other]
            row = pool[rng.integers(len(pool))]
        x = CountVector(counts[row].toarray().ravel().astype(float))
        genuine[j] = is_user
        for r, rule in enumerate(rules):
            v = biased_decide(psi, world, rule, prior, x)
            errors[j, r] = v.decided_user != is_user

    outcomes = []
    for r, rule in enumerate(rules):
        lo, err, hi = bootstrap_percentiles(errors[:, r], cfg.replicates, 5.0, 95.0, rng)
        fp = int(errors[genuine, r].sum())
        fn = int(errors[~genuine, r].sum())
        outcomes.append(
            RuleOutcome(rule.name, err, lo, hi, fp, fn, int(genuine.sum()), int((~genuine).sum()))
        )
    return RunReport(
        run=run,
        outcomes=tuple(outcomes),
        fit_iterations=fit.iterations,
        fit_converged=fit.converged,
        n_world_users=len(world_users),
        n_test_users=len(test_users),
        errors=errors,
        genuine=genuine,
    )


def run_real(dataset: DiscretizedDataset, config: RealConfig) -> list[RunReport]:
    """Run the held-out-user protocol; one report per run."""
    rules = config.decision_rules()
    rows = dataset.rows_by_user()
    seeds = np.random.SeedSequence(config.seed).spawn(config.runs)
    reports = []
    for run, s in enumerate(seeds):
        reports.append(_one_run(dataset, config, run, np.random.default_rng(s), rules, rows))
        log.info("run %d: %s", run, {o.rule: round(o.error_rate, 4) for o in reports[-1].outcomes})
    return reports


def _fmt_ratio(r):
    return "" if r is None else repr(float(r))


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "rule", "err", "lo5", "hi5", "fp", "fn", "fp_fn_ratio"])
    for rep in reports:
        for o in rep.outcomes:
            w.writerow(
                [rep.run, o.rule, repr(o.error_rate), repr(o.lo5), repr(o.hi5),
                 o.false_positives, o.false_negatives, _fmt_ratio(o.fp_fn_ratio)]
            )
    return buf.getvalue()


def reports_to_json(reports, config: RealConfig | None = None) -> str:
    doc = {
        "config": asdict(config) if config is not None else None,
        "fp_definition": "genuine user rejected (false alarm)",
        "fn_definition": "impostor accepted (missed intrusion)",
        "runs": [
            {
                "run": rep.run,
                "fit_iterations": rep.fit_iterations,
                "fit_converged": rep.fit_converged,
                "n_world_users": rep.n_world_users,
                "n_test_users": rep.n_test_users,
                "rules": [
                    {
                        "rule": o.rule,
                        "err": o.error_rate,
                        "lo5": o.lo5,
                        "hi5": o.hi5,
                        "fp": o.false_positives,
                        "fn": o.false_negatives,
                        "fp_fn_ratio": o.fp_fn_ratio,
                    }
                    for o in rep.outcomes
                ],
            }
            for rep in reports
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
