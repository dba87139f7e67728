"""Seeded repeated-game loop, running statistics and Monte Carlo replication.

Objectives are long-run averages; with finitely many rounds the guaranteed
average is approximated by the tail minimum of the prefix-average series past
a burn-in (conservative: never overstates what a prefix average sustained).
For adversarial policies that keep the prefix averages oscillating forever no
finite proxy is faithful; the tail minimum then reports the worst sustained
level seen, which is the intended reading.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .curves import RewardCurve
from .errors import ConfigurationError, PolicyError
from .mechanism import Branch, MechanismState, apply_decision, propose
from .policies import CookPolicy

STAT_KEYS = (
    "revenue_avg", "surplus_avg", "accept_freq",
    "revenue_liminf", "surplus_liminf", "accept_liminf",
)


@dataclass
class GameConfig:
    reward: RewardCurve
    q: float
    policy: CookPolicy
    rounds: int = 100_000
    seed: int = 0
    burn_in: int = 10_000
    stride: int = 100
    curve_spec: dict | None = None  # serializable echo for manifests

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigurationError(f"rounds must be >= 1, got {self.rounds}")
        if not (0 <= self.burn_in < self.rounds):
            raise ConfigurationError(
                f"burn_in must satisfy 0 <= burn_in < rounds, got {self.burn_in} vs {self.rounds}"
            )
        if self.q < 0:
            raise ConfigurationError(f"buyer valuation must be nonnegative, got {self.q}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be a nonnegative integer, got {self.seed}")
        if self.stride < 1:
            raise ConfigurationError(f"stride must be >= 1, got {self.stride}")
        if self.curve_spec is None:
            self.curve_spec = self.reward.curve.spec()

    def describe(self) -> dict:
        return {
            "curve": self.curve_spec,
            "q": self.q,
            "policy": self.policy.describe(),
            "rounds": self.rounds,
            "seed": self.seed,
            "burn_in": self.burn_in,
            "stride": self.stride,
        }


@dataclass(frozen=True)
class RoundRecord:
    round: int
    price: float
    accepted: int
    estimate_before: float
    branch: str

    def revenue(self) -> float:
        return self.accepted * self.price

    def surplus(self, q: float) -> float:
        return self.accepted * (q - self.price)


class GameHistory:
    """Full per-round trace of one game, shared with the mechanism state's lists."""

    def __init__(self, q: float, seed: int, prices: list[float], decisions: list[int],
                 branches: list[Branch], estimates_before: list[float]):
        self.q = q
        self.seed = seed
        self.prices = prices
        self.decisions = decisions
        self.branches = branches
        self.estimates_before = estimates_before

    def __len__(self) -> int:
        return len(self.prices)

    def record(self, i: int) -> RoundRecord:
        return RoundRecord(i, self.prices[i], self.decisions[i],
                           self.estimates_before[i], self.branches[i].value)

    def __iter__(self) -> Iterator[RoundRecord]:
        return (self.record(i) for i in range(len(self)))

    def jsonl_lines(self) -> Iterator[str]:
        for i in range(len(self)):
            yield json.dumps({
                "round": i,
                "price": self.prices[i],
                "accepted": self.decisions[i],
                "estimate_before": self.estimates_before[i],
                "branch": self.branches[i].value,
            }, sort_keys=True)

    def to_jsonl(self) -> str:
        return "\n".join(self.jsonl_lines()) + "\n"


@dataclass
class RunStatistics:
    rounds: int
    q: float
    burn_in: int
    revenue_total: float
    surplus_total: float
    accept_count: int
    revenue_liminf: float
    surplus_liminf: float
    accept_liminf: float
    branch_counts: dict[str, int]
    trace: list[tuple[int, float, float, float]] = field(default_factory=list)

    @property
    def revenue_avg(self) -> float:
        return self.revenue_total / self.rounds

    @property
    def surplus_avg(self) -> float:
        return self.surplus_total / self.rounds

    @property
    def accept_freq(self) -> float:
        return self.accept_count / self.rounds

    def branch_freqs(self) -> dict[str, float]:
        return {name: count / self.rounds for name, count in self.branch_counts.items()}

    def welfare_identity_error(self) -> float:
        """Largest relative gap between revenue+surplus and q * accept share,
        over every logged trace prefix and the final totals."""
        worst = 0.0
        rows = self.trace + [(self.rounds, self.revenue_avg, self.surplus_avg, self.accept_freq)]
        for _, rev, sur, acc in rows:
            target = self.q * acc
            err = abs(rev + sur - target) / max(1.0, abs(target))
            worst = max(worst, err)
        return worst

    def to_json_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "q": self.q,
            "burn_in": self.burn_in,
            "revenue_total": self.revenue_total,
            "surplus_total": self.surplus_total,
            "accept_count": self.accept_count,
            "revenue_avg": self.revenue_avg,
            "surplus_avg": self.surplus_avg,
            "accept_freq": self.accept_freq,
            "revenue_liminf": self.revenue_liminf,
            "surplus_liminf": self.surplus_liminf,
            "accept_liminf": self.accept_liminf,
            "branch_freqs": self.branch_freqs(),
            "welfare_identity_error": self.welfare_identity_error(),
        }

    def trace_csv(self) -> str:
        lines = ["round,revenue_avg,surplus_avg,accept_freq"]
        for n, rev, sur, acc in self.trace:
            lines.append(f"{n},{rev!r},{sur!r},{acc!r}")
        return "\n".join(lines) + "\n"


def run(config: GameConfig) -> tuple[GameHistory, RunStatistics]:
    """Play the configured number of rounds: propose -> decide -> apply.

    Deterministic given the seed. Revenue/surplus accumulate with compensated
    summation so the welfare identity revenue + surplus = q * accept share
    holds to ~1e-9 relative at every prefix even for millions of rounds.
    """
    rc = config.reward
    policy = config.policy.fresh()
    q = config.q
    rng = np.random.default_rng(config.seed)
    state = MechanismState()

    revenue = 0.0
    revenue_c = 0.0
    surplus = 0.0
    surplus_c = 0.0
    accepts = 0
    rev_liminf = math.inf
    sur_liminf = math.inf
    acc_liminf = math.inf
    trace: list[tuple[int, float, float, float]] = []
    burn_in = config.burn_in
    stride = config.stride

    for i in range(config.rounds):
        offer = propose(state, rc, rng)
        try:
            accept = policy.decide(offer.price, i)
        except PolicyError as exc:
            raise PolicyError(f"round {i}: {exc}") from exc
        apply_decision(state, accept)
        if accept:
            accepts += 1
            y = offer.price - revenue_c
            t = revenue + y
            revenue_c = (t - revenue) - y
            revenue = t
            y = (q - offer.price) - surplus_c
            t = surplus + y
            surplus_c = (t - surplus) - y
            surplus = t
        n = i + 1
        if n > burn_in:
            rev_avg = revenue / n
            sur_avg = surplus / n
            acc_avg = accepts / n
            if rev_avg < rev_liminf:
                rev_liminf = rev_avg
            if sur_avg < sur_liminf:
                sur_liminf = sur_avg
            if acc_avg < acc_liminf:
                acc_liminf = acc_avg
            if n % stride == 0 or n == config.rounds:
                trace.append((n, rev_avg, sur_avg, acc_avg))
        elif n % stride == 0:
            trace.append((n, revenue / n, surplus / n, accepts / n))

    branch_counts = {b.value: 0 for b in Branch}
    for b in state.branches:
        branch_counts[b.value] += 1

    history = GameHistory(q, config.seed, state.prices, state.decisions,
                          state.branches, state.estimates_before)
    stats = RunStatistics(
        rounds=config.rounds, q=q, burn_in=burn_in,
        revenue_total=revenue, surplus_total=surplus, accept_count=accepts,
        revenue_liminf=rev_liminf, surplus_liminf=sur_liminf, accept_liminf=acc_liminf,
        branch_counts=branch_counts, trace=trace,
    )
    return history, stats


def estimate_liminf(series: Sequence[float], burn_in: int) -> float:
    """Tail minimum of a prefix-average series from index burn_in onward."""
    if burn_in >= len(series):
        raise ConfigurationError(
            f"burn_in {burn_in} leaves no data in a series of length {len(series)}"
        )
    return min(series[burn_in:])


def replication_seed(root_seed: int, replication: int) -> int:
    """Seed for replication r: root_seed XOR r, fed to numpy's default_rng.

    Replication 0 therefore reproduces the single-run stream for the same
    config, and distinct replications get distinct PCG64 states.
    """
    return root_seed ^ replication


@dataclass(frozen=True)
class StatSummary:
    mean: float
    stderr: float | None
    min: float
    max: float

    def to_json_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "min": self.min, "max": self.max}


@dataclass
class MonteCarloSummary:
    replications: int
    root_seed: int
    stats: dict[str, StatSummary]

    def to_json_dict(self) -> dict:
        return {
            "replications": self.replications,
            "root_seed": self.root_seed,
            "stats": {k: v.to_json_dict() for k, v in self.stats.items()},
        }


def monte_carlo(config: GameConfig, replications: int, max_workers: int = 1) -> MonteCarloSummary:
    """Independent replications with derived seeds, reduced to per-statistic summaries.

    Replication r runs `config` with seed `replication_seed(config.seed, r)` and
    a fresh policy cursor. Results are aggregated by replication index, so a
    parallel execution (max_workers > 1) is bit-identical to the sequential one.
    """
    if replications < 1:
        raise ConfigurationError(f"replications must be >= 1, got {replications}")
    configs = [
        replace(config, seed=replication_seed(config.seed, r), policy=config.policy.fresh())
        for r in range(replications)
    ]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, configs))
    else:
        results = [run(c) for c in configs]

    stats: dict[str, StatSummary] = {}
    for key in STAT_KEYS:
        values = [getattr(rs, key) for _, rs in results]
        mean = sum(values) / replications
        if replications > 1:
            var = sum((v - mean) ** 2 for v in values) / (replications - 1)
            stderr = math.sqrt(var / replications)
        else:
            stderr = None
        stats[key] = StatSummary(mean=mean, stderr=stderr, min=min(values), max=max(values))
    return MonteCarloSummary(replications=replications, root_seed=config.seed, stats=stats)


def branch_frequency_audit(branches: Sequence[Branch], estimates_before: Sequence[float],
                           rc: RewardCurve, min_samples: int = 100,
                           z: float = 2.576) -> tuple[list[dict], str]:
    """Compare observed branch frequencies with the committed mix, per estimate level.

    Rounds are grouped by the exact estimate in force (the estimate is
    piecewise constant, so levels repeat bit-identically). Bands with at least
    `min_samples` rounds are judged against a normal-approximation binomial
    band of `z` standard errors plus a 0.5/m continuity allowance; the default
    z = 2.576 is the two-sided 99% quantile. Returns (bands, verdict) with
    verdict "pass", "fail", or "insufficient-sample" when no band qualifies.
    """
    by_level: dict[float, list[int]] = {}
    for branch, est in zip(branches, estimates_before):
        counts = by_level.setdefault(est, [0, 0, 0])
        if branch is Branch.ADAPTATION:
            counts[0] += 1
        elif branch is Branch.REWARD:
            counts[1] += 1
        else:
            counts[2] += 1

    bands: list[dict] = []
    any_checked = False
    all_within = True
    for level in sorted(by_level):
        counts = by_level[level]
        m = sum(counts)
        observed = {"adaptation": counts[0] / m, "reward": counts[1] / m, "confirmation": counts[2] / m}
        dist = rc.branch_distribution(level)
        expected = {"adaptation": dist.adaptation, "reward": dist.reward, "confirmation": dist.confirmation}
        band: dict = {"estimate": level, "rounds": m, "observed": observed, "expected": expected}
        if m >= min_samples:
            within = True
            for name in observed:
                pi = expected[name]
                tol = z * math.sqrt(pi * (1.0 - pi) / m) + 0.5 / m
                if abs(observed[name] - pi) > tol:
                    within = False
            band["within_bounds"] = within
            any_checked = True
            all_within = all_within and within
        else:
            band["within_bounds"] = None  # not enough rounds at this level
        bands.append(band)

    if not any_checked:
        verdict = "insufficient-sample"
    elif all_within:
        verdict = "pass"
    else:
        verdict = "fail"
    return bands, verdict
