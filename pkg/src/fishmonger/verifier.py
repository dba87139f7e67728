"""Executable checks of the model's formal guarantees.

Closed-form grid checks (surplus growth, the pricing inequality, branch
simplex validity, reward-derivative agreement), the distortion-at-the-top
ratio table, a simulated revenue-share bound, a Monte Carlo threshold sweep
for incentive compatibility, and an exact finite-horizon expectimax oracle
that brute-forces the cook's best response against the committed mechanism.

Every check returns a CheckReport instead of raising: a failed claim is a
result to show the user (with a witness point), not an exception.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .curves import RewardCurve, make_curve, naive_payoff
from .engine import GameConfig, monte_carlo
from .errors import BudgetExceededError, ConfigurationError
from .mechanism import demote
from .policies import NaivePolicy

DEFAULT_TOLERANCE = 1e-9


def default_grid(stop: float = 10.0, step: float = 0.1) -> tuple[float, ...]:
    n = int(round(stop / step))
    return tuple(i * step for i in range(n + 1))


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one verification check.

    worst_violation is the largest signed excess over the checked bound;
    negative values mean the bound held with margin. A failing report always
    carries a witness describing the worst grid point.
    """

    name: str
    grid: str
    worst_violation: float
    tolerance: float
    passed: bool
    witness: dict | None = None
    notes: str | None = None

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = (f"[{status}] {self.name}: worst violation {self.worst_violation:.3e} "
                f"(tolerance {self.tolerance:.3e}) on {self.grid}")
        if self.notes:
            line += f" -- {self.notes}"
        if not self.passed and self.witness is not None:
            line += f" witness={json.dumps(self.witness, sort_keys=True)}"
        return line

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


def _grid_report(name: str, grid_desc: str, tolerance: float,
                 points: Sequence[tuple[dict, float]],
                 notes: str | None = None) -> CheckReport:
    """Fold (witness, excess) pairs into a report keyed on the worst excess."""
    worst = -math.inf
    worst_witness: dict | None = None
    for witness, excess in points:
        if excess > worst:
            worst = excess
            worst_witness = witness
    passed = worst <= tolerance
    return CheckReport(
        name=name, grid=grid_desc, worst_violation=worst, tolerance=tolerance,
        passed=passed, witness=None if passed else worst_witness, notes=notes,
    )


def check_spence_mirrlees(rc: RewardCurve,
                          q_grid: Sequence[float] | None = None,
                          x_grid: Sequence[float] | None = None,
                          tolerance: float = DEFAULT_TOLERANCE) -> CheckReport:
    """Surplus growth: R(q+x) >= R(q) + x*p(q) for all q, x >= 0.

    The achievable average surplus grows in the buyer's type at rate at
    least p(q), so a higher type always strictly gains from its height.
    """
    qs = default_grid() if q_grid is None else q_grid
    xs = default_grid() if x_grid is None else x_grid
    points = []
    for q in qs:
        base = rc.reward(q)
        p_q = rc.accept_prob(q)
        for x in xs:
            excess = base + x * p_q - rc.reward(q + x)
            points.append(({"q": q, "x": x}, excess))
    desc = f"{len(qs)}x{len(xs)} grid, q in [{qs[0]:g}, {qs[-1]:g}], x in [{xs[0]:g}, {xs[-1]:g}]"
    return _grid_report("spence-mirrlees", desc, tolerance, points)


def check_key_inequality(rc: RewardCurve,
                         q_grid: Sequence[float] | None = None,
                         qn_grid: Sequence[float] | None = None,
                         tolerance: float = DEFAULT_TOLERANCE) -> CheckReport:
    """Misreport bound: (q - q_n)p(q_n) + R(q_n) <= R(q) for all q, q_n.

    A cook of type q who steers the estimate to q_n earns at most the
    left-hand side per round; honesty (q_n = q) achieves R(q) exactly.
    """
    qs = default_grid() if q_grid is None else q_grid
    qns = default_grid() if qn_grid is None else qn_grid
    points = []
    off_diagonal_equality = False
    for qn in qns:
        p_n = rc.accept_prob(qn)
        r_n = rc.reward(qn)
        for q in qs:
            excess = (q - qn) * p_n + r_n - rc.reward(q)
            points.append(({"q": q, "q_n": qn}, excess))
            if abs(excess) <= tolerance and q != qn:
                off_diagonal_equality = True
    notes = ("equality occurs off the diagonal q = q_n"
             if off_diagonal_equality else "equality only at q = q_n")
    desc = f"{len(qs)}x{len(qns)} grid, q in [{qs[0]:g}, {qs[-1]:g}], q_n in [{qns[0]:g}, {qns[-1]:g}]"
    return _grid_report("key-inequality", desc, tolerance, points, notes=notes)


def check_simplex(rc: RewardCurve,
                  grid: Sequence[float] | None = None,
                  tolerance: float = DEFAULT_TOLERANCE) -> CheckReport:
    """Branch probabilities form a simplex at every estimate on the grid.

    Computes the three components directly from p and R (bypassing the
    raising constructor) so that an invalid curve yields a witness instead
    of an exception: a locally decreasing p drives p(q) - R(q)/q negative.
    """
    qs = default_grid() if grid is None else grid
    points = []
    for q in qs:
        if q == 0.0:
            adaptation, reward_share, confirmation = 1.0, 0.0, 0.0
        else:
            p_q = rc.accept_prob(q)
            adaptation = 1.0 - p_q
            reward_share = rc.reward(q) / q
            confirmation = p_q - reward_share
        witness = {"estimate": q, "adaptation": adaptation,
                   "reward": reward_share, "confirmation": confirmation}
        negativity = max(-adaptation, -reward_share, -confirmation)
        drift = abs(adaptation + reward_share + confirmation - 1.0)
        points.append((witness, max(negativity, drift)))
    desc = f"{len(qs)} estimates in [{qs[0]:g}, {qs[-1]:g}]"
    return _grid_report("branch-simplex", desc, tolerance, points)


def check_reward_derivative(rc: RewardCurve,
                            grid: Sequence[float] | None = None,
                            tolerance: float = 1e-6,
                            step: float = 1e-4) -> CheckReport:
    """Central-difference slope of R matches p to within tolerance.

    Meaningful for smooth curves; at the kinks of piecewise-linear curves
    the difference quotient averages adjacent slopes, so callers should
    apply this check to smooth families only.
    """
    qs = default_grid() if grid is None else grid
    points = []
    for q in qs:
        if q <= step:
            continue
        slope = (rc.reward(q + step) - rc.reward(q - step)) / (2 * step)
        p_q = rc.accept_prob(q)
        excess = abs(slope - p_q) - tolerance * (1.0 + p_q)
        points.append(({"q": q, "slope": slope, "p": p_q}, excess))
    desc = f"{len(points)} interior points in [{qs[0]:g}, {qs[-1]:g}], h={step:g}"
    return _grid_report("reward-derivative", desc, 0.0, points,
                        notes=f"relative tolerance {tolerance:g}")


@dataclass(frozen=True)
class DistortionRow:
    q: float
    fisher_rate: float
    cook_rate: float
    ratio: float


def distortion_curve(rc: RewardCurve, q_list: Sequence[float],
                     ratio_threshold: float = 0.05,
                     ) -> tuple[list[DistortionRow], CheckReport]:
    """Seller-to-buyer welfare split along increasing types.

    fisher-rate = q*p(q) - R(q), cook-rate = R(q). As the type grows the
    seller's share of the split vanishes; the report asserts the ratio is
    strictly decreasing along the list and below ratio_threshold at the
    largest q. Curves that never reach acceptance 1 carry no such guarantee,
    so for them the rows are still computed but the assertions are skipped.
    """
    if not q_list:
        raise ConfigurationError("distortion curve needs at least one type")
    if any(b <= a for a, b in zip(q_list, q_list[1:])):
        raise ConfigurationError("type list must be strictly increasing")
    if q_list[0] <= 0:
        raise ConfigurationError("types must be positive")

    rows = []
    for q in q_list:
        cook = rc.reward(q)
        fisher = q * rc.accept_prob(q) - cook
        if cook <= 0.0:
            raise ConfigurationError(f"degenerate split at q={q}: buyer rate is 0")
        rows.append(DistortionRow(q=q, fisher_rate=fisher, cook_rate=cook,
                                  ratio=fisher / cook))

    if not rc.curve.has_unit_limit:
        report = CheckReport(
            name="distortion-at-the-top", grid=f"{len(rows)} types",
            worst_violation=0.0, tolerance=0.0, passed=True,
            notes="skipped: acceptance curve does not reach 1, no vanishing-share guarantee",
        )
        return rows, report

    points = []
    for earlier, later in zip(rows, rows[1:]):
        points.append(({"q_low": earlier.q, "q_high": later.q,
                        "ratio_low": earlier.ratio, "ratio_high": later.ratio},
                       later.ratio - earlier.ratio))
    points.append(({"q": rows[-1].q, "ratio": rows[-1].ratio,
                    "threshold": ratio_threshold},
                   rows[-1].ratio - ratio_threshold))
    desc = f"types {q_list[0]:g}..{q_list[-1]:g} ({len(rows)} rows)"
    return rows, _grid_report("distortion-at-the-top", desc, 0.0, points,
                              notes=f"ratio threshold {ratio_threshold:g} at q={q_list[-1]:g}")


def distortion_csv(rows: Sequence[DistortionRow]) -> str:
    lines = ["q,fisher_rate,cook_rate,ratio"]
    for row in rows:
        lines.append(f"{row.q!r},{row.fisher_rate!r},{row.cook_rate!r},{row.ratio!r}")
    return "\n".join(lines) + "\n"


def check_revenue_share_bound(rc: RewardCurve, q_list: Sequence[float],
                              threshold: float, epsilon: float = 0.01,
                              rounds: int = 100_000, burn_in: int = 10_000,
                              seed: int = 0, replications: int = 1,
                              stationary_tolerance: float = 0.02,
                              max_workers: int = 1) -> CheckReport:
    """Simulated cap on what the seller can extract from a thresholded buyer.

    Against a buyer accepting exactly the prices <= threshold, the seller's
    long-run revenue rate cannot exceed q*(epsilon + 1 - p(threshold)) for
    any true type q; the realized rate should sit near the stationary value
    threshold*p(threshold) - R(threshold) regardless of q.
    """
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    stationary = threshold * rc.accept_prob(threshold) - rc.reward(threshold)
    cap_factor = epsilon + 1.0 - rc.accept_prob(threshold)
    points = []
    for q in q_list:
        config = GameConfig(reward=rc, q=q, policy=NaivePolicy(threshold),
                            rounds=rounds, seed=seed, burn_in=burn_in)
        summary = monte_carlo(config, replications, max_workers=max_workers)
        liminf = summary.stats["revenue_liminf"].mean
        avg = summary.stats["revenue_avg"].mean
        bound = q * cap_factor
        points.append(({"q": q, "revenue_liminf": liminf, "bound": bound},
                       liminf - bound))
        points.append(({"q": q, "revenue_avg": avg, "stationary": stationary},
                       abs(avg - stationary) - stationary_tolerance))
    desc = (f"{len(q_list)} types, naive({threshold:g}), N={rounds}, "
            f"{replications} replications")
    notes = (f"cap q*({epsilon:g}+1-p({threshold:g})), stationary value "
             f"{stationary:.6f} +/- {stationary_tolerance:g}")
    return _grid_report("revenue-share-bound", desc, 0.0, points, notes=notes)


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    payoff_mean: float
    payoff_stderr: float | None
    closed_form: float
    within_tolerance: bool


@dataclass(frozen=True)
class SweepResult:
    """Payoff table of naive(x) responses and the empirical best threshold."""

    q: float
    argmax: float
    rows: tuple[SweepRow, ...]
    report: CheckReport

    def to_csv(self) -> str:
        lines = ["threshold,payoff_mean,payoff_stderr,closed_form,within_tolerance"]
        for row in self.rows:
            stderr = "" if row.payoff_stderr is None else repr(row.payoff_stderr)
            lines.append(f"{row.threshold!r},{row.payoff_mean!r},{stderr},"
                         f"{row.closed_form!r},{int(row.within_tolerance)}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "q": self.q,
            "argmax": self.argmax,
            "rows": [dataclasses.asdict(row) for row in self.rows],
            "report": self.report.to_json_dict(),
        }


def threshold_sweep(config: GameConfig, thresholds: Sequence[float],
                    replications: int = 8, tolerance: float = 0.02,
                    max_workers: int = 1) -> SweepResult:
    """Monte Carlo payoff of naive(x) for each threshold x on the grid.

    The empirical argmax must land within one grid step of the true type,
    and every mean payoff must match the closed form (q-x)p(x) + R(x)
    within the tolerance. The grid should bracket config.q.
    """
    if not thresholds:
        raise ConfigurationError("threshold grid must be nonempty")
    xs = sorted(thresholds)
    if any(x < 0 for x in xs):
        raise ConfigurationError("thresholds must be nonnegative")

    rows = []
    best_x = xs[0]
    best_payoff = -math.inf
    for x in xs:
        cfg = dataclasses.replace(config, policy=NaivePolicy(x))
        summary = monte_carlo(cfg, replications, max_workers=max_workers)
        stat = summary.stats["surplus_avg"]
        closed = naive_payoff(config.reward, config.q, x)
        rows.append(SweepRow(
            threshold=x, payoff_mean=stat.mean, payoff_stderr=stat.stderr,
            closed_form=closed,
            within_tolerance=abs(stat.mean - closed) <= tolerance,
        ))
        if stat.mean > best_payoff:
            best_payoff = stat.mean
            best_x = x

    step = max((b - a for a, b in zip(xs, xs[1:])), default=math.inf)
    argmax_ok = abs(best_x - config.q) <= step + 1e-12
    worst = max(abs(row.payoff_mean - row.closed_form) for row in rows)
    passed = argmax_ok and all(row.within_tolerance for row in rows)
    witness = None
    if not passed:
        bad = [row for row in rows if not row.within_tolerance]
        witness = {"argmax": best_x, "q": config.q,
                   "rows_out_of_tolerance": [row.threshold for row in bad]}
    report = CheckReport(
        name="threshold-sweep",
        grid=f"{len(xs)} thresholds in [{xs[0]:g}, {xs[-1]:g}], q={config.q:g}",
        worst_violation=worst, tolerance=tolerance, passed=passed,
        witness=witness,
        notes=f"empirical argmax x={best_x:g}" + ("" if argmax_ok else " (outside one grid step of q)"),
    )
    return SweepResult(q=config.q, argmax=best_x, rows=tuple(rows), report=report)


@dataclass(frozen=True)
class OracleConfig:
    """Finite-horizon brute-force setup.

    The continuous adaptation price on [q_n, q_n + 1] is discretized to
    `grid` equal-probability atoms at cell midpoints q_n + (2j-1)/(2*grid).
    Estimated tree size (2*(grid+2))**horizon must fit the node budget.
    """

    horizon: int
    grid: int = 3
    q: float = 1.0
    curve_spec: Mapping | None = None
    budget: int = 10_000_000

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {self.horizon}")
        if self.grid < 1:
            raise ConfigurationError(f"price grid must be >= 1, got {self.grid}")
        if self.q < 0:
            raise ConfigurationError(f"type must be nonnegative, got {self.q}")

    def estimated_size(self) -> int:
        return (2 * (self.grid + 2)) ** self.horizon


@dataclass(frozen=True)
class OracleResult:
    optimal: float
    naive: float
    gap: float
    horizon: int
    grid: int
    q: float

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


def expectimax_oracle(oc: OracleConfig) -> OracleResult:
    """Exact expected total surplus of the best-responding cook vs the naive one.

    Chance nodes draw the branch and the (discretized) adaptation price;
    decision nodes either maximize expected remaining surplus (optimal) or
    follow accept-iff-price<=q (naive). Both policies are evaluated on the
    identical tree, so gap = optimal - naive >= 0 holds exactly: the naive
    action is always available to the maximizer.

    The demotion rule reads the whole history, so states are memoized by
    (rounds left, estimate, sorted multiset of (price, decision)).
    """
    size = oc.estimated_size()
    if size > oc.budget:
        raise BudgetExceededError(
            f"oracle tree of about {size} nodes exceeds budget {oc.budget}; "
            f"reduce horizon or grid",
            estimated_size=size, budget=oc.budget,
        )

    spec = dict(oc.curve_spec) if oc.curve_spec else {"family": "rational"}
    rc = RewardCurve(make_curve(spec))
    q = oc.q
    grid = oc.grid

    def outcomes(estimate: float) -> list[tuple[float, float, str]]:
        dist = rc.branch_distribution(estimate)
        out = []
        if dist.adaptation > 0.0:
            share = dist.adaptation / grid
            for j in range(1, grid + 1):
                out.append((share, estimate + (2 * j - 1) / (2 * grid), "adaptation"))
        if dist.reward > 0.0:
            out.append((dist.reward, 0.0, "reward"))
        if dist.confirmation > 0.0:
            out.append((dist.confirmation, estimate, "confirmation"))
        return out

    def act(rounds_left: int, estimate: float, pairs: tuple,
            price: float, branch: str, accept: bool,
            valuer: Callable) -> float:
        immediate = (q - price) if accept else 0.0
        new_pairs = tuple(sorted(pairs + ((price, accept),)))
        if branch == "adaptation" and accept:
            new_estimate = price
        elif branch == "confirmation" and not accept:
            prices = [p for p, _ in new_pairs]
            decisions = [int(d) for _, d in new_pairs]
            new_estimate = demote(prices, decisions, estimate)
        else:
            new_estimate = estimate
        return immediate + valuer(rounds_left - 1, new_estimate, new_pairs)

    optimal_memo: dict = {}
    naive_memo: dict = {}

    def optimal_value(rounds_left: int, estimate: float, pairs: tuple) -> float:
        if rounds_left == 0:
            return 0.0
        key = (rounds_left, estimate, pairs)
        hit = optimal_memo.get(key)
        if hit is not None:
            return hit
        total = 0.0
        for prob, price, branch in outcomes(estimate):
            accept_v = act(rounds_left, estimate, pairs, price, branch, True, optimal_value)
            refuse_v = act(rounds_left, estimate, pairs, price, branch, False, optimal_value)
            total += prob * max(accept_v, refuse_v)
        optimal_memo[key] = total
        return total

    def naive_value(rounds_left: int, estimate: float, pairs: tuple) -> float:
        if rounds_left == 0:
            return 0.0
        key = (rounds_left, estimate, pairs)
        hit = naive_memo.get(key)
        if hit is not None:
            return hit
        total = 0.0
        for prob, price, branch in outcomes(estimate):
            total += prob * act(rounds_left, estimate, pairs, price, branch,
                                price <= q, naive_value)
        naive_memo[key] = total
        return total

    optimal = optimal_value(oc.horizon, 0.0, ())
    naive = naive_value(oc.horizon, 0.0, ())
    return OracleResult(optimal=optimal, naive=naive, gap=optimal - naive,
                        horizon=oc.horizon, grid=grid, q=q)
