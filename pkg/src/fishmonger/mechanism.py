"""The committed seller strategy: three price kinds and estimate updates.

Each round the seller holds an estimate q_n of the buyer's valuation
(q_0 = 0) and draws one of three price kinds from the mix fixed by the
published curve pair:

  * adaptation    - price uniform on [q_n, q_n + 1]; accepting it raises the
                    estimate to the accepted price, so the buyer can signal a
                    higher type;
  * reward        - price 0; free units whose frequency grows with the
                    estimate, paying the buyer for having revealed it;
  * confirmation  - price exactly q_n; accepting keeps the estimate, refusing
                    triggers a demotion to a strictly lower estimate.

The demotion reorders all proposed prices so far (the refused confirmation
price included) and takes the midpoint that splits them in the proportion of
refusals; if that midpoint fails to be strictly below the current estimate,
a multiplicative fallback q_n * n / (n + 1) enforces the strict decrease.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .curves import RewardCurve
from .errors import ProtocolError


class Branch(str, Enum):
    ADAPTATION = "adaptation"
    REWARD = "reward"
    CONFIRMATION = "confirmation"


@dataclass(frozen=True)
class PriceOffer:
    round: int
    price: float
    branch: Branch


@dataclass
class MechanismState:
    """Seller-side state of one game; single-owner, mutated round by round.

    Parallel lists hold the full decided history: prices[i], branches[i],
    decisions[i] (1 accept / 0 refuse) and estimates_before[i] (the estimate
    in force when offer i was made). The pending offer sits outside the lists
    until its decision arrives.
    """

    estimate: float = 0.0
    rounds_played: int = 0
    accept_count: int = 0
    prices: list[float] = field(default_factory=list)
    decisions: list[int] = field(default_factory=list)
    branches: list[Branch] = field(default_factory=list)
    estimates_before: list[float] = field(default_factory=list)
    pending: PriceOffer | None = None

    def offers(self) -> list[tuple[float, Branch, int | None]]:
        """Decided offers as (price, branch, decision), pending one last with decision None."""
        rows: list[tuple[float, Branch, int | None]] = list(
            zip(self.prices, self.branches, self.decisions)
        )
        if self.pending is not None:
            rows.append((self.pending.price, self.pending.branch, None))
        return rows


def sample_offer(rc: RewardCurve, estimate: float, rng: np.random.Generator, round_index: int) -> PriceOffer:
    """Draw one offer at the given estimate; consumes 1 uniform (2 for adaptation).

    Draw order is part of the replay contract: first uniform picks the branch
    by cumulative probability (adaptation, reward, confirmation), a second one
    places the adaptation price inside [estimate, estimate + 1].
    """
    dist = rc.branch_distribution(estimate)
    u = rng.random()
    if u < dist.adaptation:
        return PriceOffer(round_index, estimate + rng.random(), Branch.ADAPTATION)
    if u < dist.adaptation + dist.reward:
        return PriceOffer(round_index, 0.0, Branch.REWARD)
    return PriceOffer(round_index, estimate, Branch.CONFIRMATION)


def propose(state: MechanismState, rc: RewardCurve, rng: np.random.Generator) -> PriceOffer:
    """Generate this round's offer and mark it pending."""
    if state.pending is not None:
        raise ProtocolError(f"offer for round {state.pending.round} is still awaiting a decision")
    offer = sample_offer(rc, state.estimate, rng, state.rounds_played)
    state.pending = offer
    return offer


def apply_decision(state: MechanismState, accept: bool) -> MechanismState:
    """Record the buyer's decision on the pending offer and update the estimate.

    Estimate update: adaptation accepted -> the accepted price; confirmation
    refused -> demotion; every other outcome keeps the estimate.
    """
    offer = state.pending
    if offer is None:
        raise ProtocolError("no offer is pending a decision")
    state.pending = None
    decision = 1 if accept else 0
    state.prices.append(offer.price)
    state.decisions.append(decision)
    state.branches.append(offer.branch)
    state.estimates_before.append(state.estimate)
    state.rounds_played += 1
    state.accept_count += decision

    if offer.branch is Branch.ADAPTATION:
        if accept:
            state.estimate = offer.price
    elif offer.branch is Branch.CONFIRMATION:
        if not accept:
            state.estimate = demote(state.prices, state.decisions, state.estimate)
    # reward offers never move the estimate
    return state


def demotion_candidate(prices: list[float], decisions: list[int]) -> float:
    """Reorder-midpoint estimate: the value splitting all proposed prices so that
    the share above it equals the share of refusals.

    With k accepts out of n and prices sorted descending Q'_1 >= ... >= Q'_n,
    the candidate is (Q'_{n-k} + Q'_{n-k-1}) / 2, padding Q'_0 := Q'_1 at the
    all-refused boundary.
    """
    n = len(prices)
    if n == 0:
        raise ProtocolError("cannot demote with an empty offer history")
    k = sum(decisions)
    if k >= n:
        raise ProtocolError("demotion requires at least one refused price in the history")
    ordered = sorted(prices, reverse=True)
    upper = ordered[max(0, n - k - 1 - 1)]  # Q'_{n-k-1} with Q'_0 := Q'_1, 1-based
    lower = ordered[n - k - 1]              # Q'_{n-k}
    return (lower + upper) / 2.0


def demote(prices: list[float], decisions: list[int], current_estimate: float) -> float:
    """New, strictly lower estimate after a refused confirmation price.

    Uses the reorder-midpoint candidate when it already sits strictly below
    the current estimate; otherwise falls back to current * n / (n + 1), which
    guarantees the strict decrease the update rule requires.
    """
    candidate = demotion_candidate(prices, decisions)
    if candidate < current_estimate:
        return candidate
    n = len(prices)
    return current_estimate * n / (n + 1)
