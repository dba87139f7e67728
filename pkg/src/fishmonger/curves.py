"""Acceptance curves and the reward curve derived from them.

An acceptance curve maps a buyer valuation q >= 0 to the long-run share of
offers that buyer should end up accepting. Every curve is anchored at 0
(accepting nothing has probability 0 for a worthless good), is nondecreasing,
and stays in [0, 1]. The reward curve is its antiderivative starting at 0: it
is the average per-round surplus the committed pricing strategy concedes to a
truthful buyer of a given type, and it drives the per-round mix of the three
price kinds (adaptation / reward / confirmation).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from scipy.integrate import quad

from .errors import ConfigurationError, CurveValidityError, QuadratureError

# Tiny negative slack tolerated in the confirmation probability before we
# declare the curve broken (covers float noise in R(q)/q vs p(q)).
CONFIRMATION_SLACK = 1e-12


class AcceptanceCurve:
    """Base class: a nondecreasing map q -> accept probability with p(0) = 0."""

    family: str = "abstract"

    def accept_prob(self, q: float) -> float:
        raise NotImplementedError

    def reward_closed_form(self, q: float) -> float | None:
        """Exact integral of the curve on [0, q], or None if no closed form exists."""
        return None

    @property
    def has_unit_limit(self) -> bool:
        """Whether the curve provably approaches 1 as q grows."""
        raise NotImplementedError

    def spec(self) -> dict:
        """Serializable description, round-trippable through make_curve."""
        raise NotImplementedError


class RationalCurve(AcceptanceCurve):
    """p(q) = q / (1 + q); integral q - ln(1 + q)."""

    family = "rational"

    def accept_prob(self, q: float) -> float:
        if q < 0:
            raise ConfigurationError(f"valuation must be nonnegative, got {q}")
        return q / (1.0 + q)

    def reward_closed_form(self, q: float) -> float:
        return q - math.log1p(q)

    @property
    def has_unit_limit(self) -> bool:
        return True

    def spec(self) -> dict:
        return {"family": "rational"}


class ExponentialCurve(AcceptanceCurve):
    """p(q) = 1 - exp(-rate * q); integral q - (1 - exp(-rate * q)) / rate."""

    family = "exponential"

    def __init__(self, rate: float = 1.0):
        if not (rate > 0) or not math.isfinite(rate):
            raise ConfigurationError(f"exponential curve needs rate > 0, got {rate}")
        self.rate = float(rate)

    def accept_prob(self, q: float) -> float:
        if q < 0:
            raise ConfigurationError(f"valuation must be nonnegative, got {q}")
        return -math.expm1(-self.rate * q)

    def reward_closed_form(self, q: float) -> float:
        return q + math.expm1(-self.rate * q) / self.rate

    @property
    def has_unit_limit(self) -> bool:
        return True

    def spec(self) -> dict:
        return {"family": "exponential", "rate": self.rate}


class PiecewiseLinearCurve(AcceptanceCurve):
    """Linear interpolation through (q, p) knots, constant after the last knot.

    Knots must start at (0, 0), have strictly increasing q and p values in
    [0, 1]; p values must be nondecreasing unless ``validate=False`` (used by
    the verification suite to let invariant checks catch bad curves and report
    a witness instead of refusing to construct them).
    """

    family = "piecewise-linear"

    def __init__(self, knots: list[tuple[float, float]], validate: bool = True):
        if len(knots) < 2:
            raise ConfigurationError("piecewise-linear curve needs at least 2 knots")
        self._qs = [float(q) for q, _ in knots]
        self._ps = [min(1.0, max(0.0, float(p))) for _, p in knots]
        if self._qs[0] != 0.0 or float(knots[0][1]) != 0.0:
            raise CurveValidityError("first knot must be (0, 0)")
        for a, b in zip(self._qs, self._qs[1:]):
            if not b > a:
                raise CurveValidityError(f"knot positions must be strictly increasing, got {a} then {b}")
        for _, p in knots:
            if not (0.0 <= p <= 1.0):
                raise CurveValidityError(f"knot values must lie in [0, 1], got {p}")
        if validate:
            for a, b in zip(self._ps, self._ps[1:]):
                if b < a:
                    raise CurveValidityError(f"knot values must be nondecreasing, got {a} then {b}")

    def accept_prob(self, q: float) -> float:
        if q < 0:
            raise ConfigurationError(f"valuation must be nonnegative, got {q}")
        qs, ps = self._qs, self._ps
        if q >= qs[-1]:
            return ps[-1]
        # binary search for the segment containing q
        lo, hi = 0, len(qs) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if qs[mid] <= q:
                lo = mid
            else:
                hi = mid
        t = (q - qs[lo]) / (qs[hi] - qs[lo])
        return ps[lo] + t * (ps[hi] - ps[lo])

    @property
    def has_unit_limit(self) -> bool:
        return self._ps[-1] == 1.0

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self._qs, self._ps))

    def spec(self) -> dict:
        return {"family": self.family, "knots": [[q, p] for q, p in self.knots]}


class TabulatedCurve(PiecewiseLinearCurve):
    """Piecewise-linear curve loaded from a two-column (q, p) CSV table."""

    family = "tabulated"

    @classmethod
    def from_csv(cls, path: str, validate: bool = True) -> "TabulatedCurve":
        knots: list[tuple[float, float]] = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                if len(row) < 2:
                    raise ConfigurationError(f"{path}:{lineno}: expected two columns (q, p)")
                try:
                    knots.append((float(row[0]), float(row[1])))
                except ValueError:
                    if lineno == 1:
                        continue  # header row
                    raise ConfigurationError(f"{path}:{lineno}: non-numeric row {row!r}")
        if knots and knots[0] != (0.0, 0.0):
            # tables often omit the implicit origin
            if knots[0][0] > 0.0:
                knots.insert(0, (0.0, 0.0))
        return cls(knots, validate=validate)


def make_curve(spec: dict, validate: bool = True) -> AcceptanceCurve:
    """Build a curve from its serialized description (see each class's spec())."""
    if "family" not in spec:
        raise ConfigurationError("curve spec is missing the 'family' field")
    family = spec["family"]
    if family == "rational":
        return RationalCurve()
    if family == "exponential":
        return ExponentialCurve(rate=spec.get("rate", 1.0))
    if family == "piecewise-linear":
        if "knots" not in spec:
            raise ConfigurationError("piecewise-linear curve spec is missing 'knots'")
        return PiecewiseLinearCurve([tuple(k) for k in spec["knots"]], validate=validate)
    if family == "tabulated":
        if "knots" in spec:
            return TabulatedCurve([tuple(k) for k in spec["knots"]], validate=validate)
        if "path" not in spec:
            raise ConfigurationError("tabulated curve spec needs 'path' (CSV) or 'knots'")
        return TabulatedCurve.from_csv(spec["path"], validate=validate)
    raise ConfigurationError(f"unknown curve family {family!r}")


class RewardCurve:
    """Antiderivative R of an acceptance curve with R(0) = 0.

    method:
      * "closed-form"  - use the curve's exact integral (error if it has none)
      * "quadrature"   - adaptive quadrature to the given absolute tolerance
      * "auto"         - closed form when available, quadrature otherwise

    Values are cached per query point; cache writes are idempotent (pure
    function of q), so concurrent readers are safe.
    """

    def __init__(self, curve: AcceptanceCurve, method: str = "auto", tolerance: float = 1e-10):
        if method not in ("auto", "closed-form", "quadrature"):
            raise ConfigurationError(f"unknown reward method {method!r}")
        if method == "closed-form" and curve.reward_closed_form(0.0) is None:
            raise ConfigurationError(f"curve family {curve.family!r} has no closed-form integral")
        self.curve = curve
        self.method = method
        self.tolerance = float(tolerance)
        self._cache: dict[float, float] = {}
        self._dist_cache: dict[float, "BranchDistribution"] = {}

    def accept_prob(self, q: float) -> float:
        return self.curve.accept_prob(q)

    def reward(self, q: float) -> float:
        if q < 0:
            raise ConfigurationError(f"valuation must be nonnegative, got {q}")
        if q == 0.0:
            return 0.0
        use_closed = self.method != "quadrature" and self.curve.reward_closed_form(0.0) is not None
        if use_closed:
            return self.curve.reward_closed_form(q)  # type: ignore[return-value]
        cached = self._cache.get(q)
        if cached is None:
            cached = self._quadrature(q)
            self._cache[q] = cached
        return cached

    def _quadrature(self, q: float) -> float:
        breakpoints = None
        if isinstance(self.curve, PiecewiseLinearCurve):
            breakpoints = [k for k in self.curve._qs if 0.0 < k < q]
        value, err = quad(
            self.curve.accept_prob, 0.0, q,
            points=breakpoints, limit=200,
            epsabs=self.tolerance, epsrel=self.tolerance,
        )
        # err is absolute; accept it when small relative to the integral too,
        # otherwise long constant tails (large q) fail on pure roundoff
        if err > max(self.tolerance, self.tolerance * abs(value)):
            raise QuadratureError(
                f"integral of accept curve on [0, {q}] reached error {err:.3e} > tolerance {self.tolerance:.3e}",
                point=q, estimate=value, error=err, tolerance=self.tolerance,
            )
        return value

    def branch_distribution(self, estimate: float) -> "BranchDistribution":
        cached = self._dist_cache.get(estimate)
        if cached is None:
            cached = branch_distribution(self, estimate)
            self._dist_cache[estimate] = cached
        return cached


@dataclass(frozen=True)
class BranchDistribution:
    """Per-round probabilities of the three price kinds at a given estimate."""

    adaptation: float
    reward: float
    confirmation: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.adaptation, self.reward, self.confirmation)


def branch_distribution(rc: RewardCurve, estimate: float) -> BranchDistribution:
    """Mix of price kinds at estimate q_n: (1 - p, R/q_n, p - R/q_n).

    At q_n = 0 the reward share R(q_n)/q_n is taken at its continuous limit 0,
    so the distribution degenerates to pure adaptation.
    """
    if estimate < 0:
        raise ConfigurationError(f"estimate must be nonnegative, got {estimate}")
    if estimate == 0.0:
        return BranchDistribution(1.0, 0.0, 0.0)
    p = rc.accept_prob(estimate)
    reward_share = rc.reward(estimate) / estimate
    confirmation = p - reward_share
    if confirmation < -CONFIRMATION_SLACK:
        raise CurveValidityError(
            f"confirmation probability {confirmation:.3e} < 0 at estimate {estimate}; "
            "the acceptance curve is not nondecreasing"
        )
    return BranchDistribution(1.0 - p, reward_share, max(0.0, confirmation))


def naive_payoff(rc: RewardCurve, q: float, x: float) -> float:
    """Stationary per-round surplus of a type-q buyer whose accept threshold sits at x.

    With the estimate pinned at x, reward rounds pay q, confirmation rounds pay
    q - x, adaptation rounds pay nothing: (q - x) * p(x) + R(x).
    """
    if q < 0 or x < 0:
        raise ConfigurationError(f"valuation and threshold must be nonnegative, got q={q}, x={x}")
    return (q - x) * rc.accept_prob(x) + rc.reward(x)
