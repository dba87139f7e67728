"""Incentive-compatible committed pricing for the repeated posted-price auction.

The seller publishes an acceptance curve and a mixed three-branch pricing
strategy driven by it; the package simulates the repeated game, numerically
verifies the strategy's guarantees, and serves live human-play sessions with
a post-game credibility audit.
"""

from .curves import (
    AcceptanceCurve,
    BranchDistribution,
    ExponentialCurve,
    PiecewiseLinearCurve,
    RationalCurve,
    RewardCurve,
    TabulatedCurve,
    branch_distribution,
    make_curve,
    naive_payoff,
)
from .engine import (
    GameConfig,
    GameHistory,
    MonteCarloSummary,
    RoundRecord,
    RunStatistics,
    StatSummary,
    branch_frequency_audit,
    estimate_liminf,
    monte_carlo,
    replication_seed,
    run,
)
from .mechanism import Branch, MechanismState, PriceOffer, apply_decision, demote, propose
from .policies import CookPolicy, ExternalPolicy, NaivePolicy, ScriptedPolicy, make_policy
from .service import SessionStore, audit_log_file, create_app, replay_offers
from .verifier import (
    CheckReport,
    DistortionRow,
    OracleConfig,
    OracleResult,
    SweepResult,
    SweepRow,
    check_key_inequality,
    check_reward_derivative,
    check_revenue_share_bound,
    check_simplex,
    check_spence_mirrlees,
    distortion_csv,
    distortion_curve,
    expectimax_oracle,
    threshold_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceCurve", "BranchDistribution", "ExponentialCurve", "PiecewiseLinearCurve",
    "RationalCurve", "RewardCurve", "TabulatedCurve", "branch_distribution", "make_curve",
    "naive_payoff", "GameConfig", "GameHistory", "MonteCarloSummary", "RoundRecord",
    "RunStatistics", "StatSummary", "branch_frequency_audit", "estimate_liminf",
    "monte_carlo", "replication_seed", "run", "Branch", "MechanismState", "PriceOffer",
    "apply_decision", "demote", "propose", "CookPolicy", "ExternalPolicy", "NaivePolicy",
    "ScriptedPolicy", "make_policy", "SessionStore", "audit_log_file", "create_app",
    "replay_offers", "CheckReport", "DistortionRow", "OracleConfig", "OracleResult",
    "SweepResult", "SweepRow", "check_key_inequality", "check_reward_derivative",
    "check_revenue_share_bound", "check_simplex", "check_spence_mirrlees",
    "distortion_csv", "distortion_curve", "expectimax_oracle", "threshold_sweep",
    "__version__",
]
