"""Acceptance gate: one test per contracted behavior, at the stated tolerance
and runtime budget. Each test finishes by printing a single [PASS] line with
the measured quantity (visible under pytest -s or -rA); a failing criterion
fails its test, so `pytest -v tests/test_acceptance.py` gives exactly one
pass/fail line per criterion.
"""

import json
import math
import time

import pytest

from fishmonger.curves import ExponentialCurve, RationalCurve, RewardCurve, naive_payoff
from fishmonger.engine import GameConfig, monte_carlo, run
from fishmonger.mechanism import demote, demotion_candidate
from fishmonger.policies import NaivePolicy
from fishmonger.service import SessionStore, replay_offers
from fishmonger.verifier import (
    OracleConfig,
    check_key_inequality,
    check_spence_mirrlees,
    default_grid,
    distortion_curve,
    expectimax_oracle,
    threshold_sweep,
)

R1 = 1.0 - math.log(2.0)      # stationary cook surplus at q=1
REV1 = math.log(2.0) - 0.5    # stationary fisher revenue at q=1: p(1) - R(1)


def report(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


@pytest.fixture(scope="module")
def rational() -> RewardCurve:
    return RewardCurve(RationalCurve())


@pytest.fixture(scope="module")
def stationary_run(rational):
    """Shared by the stationary-value and accept-frequency criteria."""
    config = GameConfig(reward=rational, q=1.0, policy=NaivePolicy(1.0),
                        rounds=100_000, seed=2024, burn_in=10_000)
    start = time.perf_counter()
    summary = monte_carlo(config, 8)
    history, stats = run(config)
    elapsed = time.perf_counter() - start
    return summary, stats, elapsed


def test_criterion_01_stationary_surplus_and_revenue(stationary_run):
    summary, _, elapsed = stationary_run
    surplus = summary.stats["surplus_avg"].mean
    revenue = summary.stats["revenue_avg"].mean
    assert abs(surplus - R1) <= 0.02, f"surplus {surplus} vs {R1}"
    assert abs(revenue - REV1) <= 0.02, f"revenue {revenue} vs {REV1}"
    assert elapsed <= 10.0, f"runtime {elapsed:.1f}s over budget"
    report("stationary-values",
           f"surplus={surplus:.6f} (target {R1:.6f}±0.02) "
           f"revenue={revenue:.6f} (target {REV1:.6f}±0.02) in {elapsed:.1f}s")


def test_criterion_02_accept_frequency_and_welfare_identity(stationary_run):
    _, stats, _ = stationary_run
    assert abs(stats.accept_freq - 0.5) <= 0.02
    # the identity must hold at every logged prefix, not just at the end
    worst = 0.0
    for n, rev, sur, acc in stats.trace + [
            (stats.rounds, stats.revenue_avg, stats.surplus_avg, stats.accept_freq)]:
        target = stats.q * acc
        worst = max(worst, abs(rev + sur - target) / max(1.0, abs(target)))
    assert worst <= 1e-9, f"welfare identity broke at a prefix: {worst:.3e}"
    report("accept-frequency",
           f"p_hat={stats.accept_freq:.6f} (target 0.5±0.02), "
           f"worst prefix identity error {worst:.2e} over {len(stats.trace)} prefixes")


def test_criterion_03_threshold_sweep_incentive_compatibility(rational):
    config = GameConfig(reward=rational, q=2.0, policy=NaivePolicy(2.0),
                        rounds=100_000, seed=77, burn_in=10_000)
    thresholds = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    start = time.perf_counter()
    result = threshold_sweep(config, thresholds, replications=8)
    elapsed = time.perf_counter() - start
    assert result.argmax == 2.0, f"argmax {result.argmax}"
    for row in result.rows:
        target = naive_payoff(rational, 2.0, row.threshold)
        assert abs(row.payoff_mean - target) <= 0.02, \
            f"x={row.threshold}: {row.payoff_mean} vs closed form {target}"
    assert elapsed <= 60.0, f"runtime {elapsed:.1f}s over budget"
    report("threshold-sweep",
           f"argmax at x=2.0, all 6 payoffs within ±0.02 of closed form, {elapsed:.1f}s")


def test_criterion_04_inequality_grids(rational):
    grid = default_grid(10.0, 0.1)
    start = time.perf_counter()
    worst = 0.0
    for rc in (rational, RewardCurve(ExponentialCurve(rate=1.0))):
        for check in (check_spence_mirrlees, check_key_inequality):
            rep = check(rc, grid, grid, tolerance=1e-9)
            assert rep.passed, rep.summary()
            worst = max(worst, rep.worst_violation)
    elapsed = time.perf_counter() - start
    assert elapsed <= 1.0, f"runtime {elapsed:.2f}s over budget"
    report("inequality-grids",
           f"key inequality + surplus growth on 2 families, "
           f"worst violation {worst:.2e} <= 1e-9, {elapsed:.2f}s")


def test_criterion_05_distortion_at_the_top(rational):
    rows, rep = distortion_curve(rational, [1.0, 10.0, 100.0, 1000.0])
    ratios = [row.ratio for row in rows]
    assert all(a > b for a, b in zip(ratios, ratios[1:])), ratios
    assert abs(ratios[2] - 0.038004) <= 1e-6, ratios[2]

    start = time.perf_counter()
    config = GameConfig(reward=rational, q=100.0, policy=NaivePolicy(100.0),
                        rounds=100_000, seed=404, burn_in=10_000)
    _, stats = run(config)
    elapsed = time.perf_counter() - start
    simulated = stats.revenue_avg / stats.surplus_avg
    rel = abs(simulated - ratios[2]) / ratios[2]
    assert rel <= 0.15, f"simulated ratio {simulated} off by {rel:.1%}"
    assert elapsed <= 20.0
    report("distortion-at-the-top",
           f"ratios strictly decreasing, ratio(100)={ratios[2]:.6f}, "
           f"simulated {simulated:.6f} ({rel:.1%} rel), {elapsed:.1f}s")


def test_criterion_06_revenue_share_bound(rational):
    start = time.perf_counter()
    config = GameConfig(reward=rational, q=100.0, policy=NaivePolicy(1.0),
                        rounds=100_000, seed=11, burn_in=10_000)
    _, stats = run(config)
    elapsed = time.perf_counter() - start
    bound = 100.0 * (0.01 + 0.5)
    assert stats.revenue_liminf <= bound
    assert abs(stats.revenue_avg - REV1) <= 0.02
    assert elapsed <= 10.0
    report("revenue-share-bound",
           f"revenue liminf {stats.revenue_liminf:.6f} <= {bound}, "
           f"avg {stats.revenue_avg:.6f} (target {REV1:.6f}±0.02), {elapsed:.1f}s")


def test_criterion_07_demotion_worked_examples():
    assert demotion_candidate([0.5, 1.2, 0.9, 0.8], [1, 0, 0, 1]) == 1.05
    assert demote([0.5, 1.2, 0.9, 0.8], [1, 0, 0, 1], 1.4) == 1.05
    # tied prices: candidate equals the estimate, fallback kicks in
    assert demote([0.5, 0.5], [1, 0], 0.5) == 0.5 * 2 / 3
    # all refused: padding duplicates the top price, fallback halves
    assert demote([0.7], [0], 0.7) == 0.35
    report("demotion-examples", "1.05; 0.3333...; 0.35 reproduced exactly")


def test_criterion_08_oracle(rational):
    start = time.perf_counter()
    # H=1: the tree value must equal the direct sum over the price atoms
    for grid in (1, 2, 3):
        res = expectimax_oracle(OracleConfig(horizon=1, grid=grid, q=1.0))
        expected = 0.0
        for j in range(1, grid + 1):
            expected += (1 / grid) * max(0.0, 1.0 - (2 * j - 1) / (2 * grid))
        assert res.optimal == expected
        assert res.naive == expected

    for horizon in (1, 2, 3, 4):
        for q in (0.5, 1.0, 2.0):
            res = expectimax_oracle(OracleConfig(horizon=horizon, grid=2, q=q))
            assert res.optimal >= res.naive, (horizon, q)

    first = expectimax_oracle(OracleConfig(horizon=4, grid=2, q=1.0))
    second = expectimax_oracle(OracleConfig(horizon=4, grid=2, q=1.0))
    assert (first.optimal, first.naive) == (second.optimal, second.naive)
    assert first.optimal == float.fromhex("0x1.8145aba39d4eep+0")
    assert first.naive == float.fromhex("0x1.778f91cd8f099p+0")
    elapsed = time.perf_counter() - start
    assert elapsed <= 30.0
    report("oracle",
           f"H=1 exact, optimal>=naive on 12 configs, H=4 fixture bit-identical "
           f"(optimal={first.optimal.hex()}), {elapsed:.2f}s")


def test_criterion_09_credibility_audit(tmp_path):
    start = time.perf_counter()
    store = SessionStore(tmp_path / "sessions")
    created = store.create(curve_spec={"family": "rational"}, seed=90210,
                           round_cap=10_000)
    sid = created["session_id"]
    offer = created["offer"]
    i = 0
    while True:
        res = store.decide(sid, offer["price"] <= 1.0, token=f"t{i}")
        i += 1
        if res["next"] is None:
            break
        offer = res["next"]
    audit = store.audit_view(sid)
    assert audit["verdict"] == "pass", audit["verdict"]
    checked = [b for b in audit["bands"] if b["within_bounds"] is not None]
    assert checked and all(band["within_bounds"] for band in checked)

    decisions = [row["accepted"] for row in audit["rounds"]]
    replayed = replay_offers(audit["curve"], audit["seed"], decisions)
    original = [json.dumps({k: row[k] for k in ("round", "price", "branch")},
                           sort_keys=True) for row in audit["rounds"]]
    regenerated = [json.dumps({k: row[k] for k in ("round", "price", "branch")},
                              sort_keys=True) for row in replayed]
    assert original == regenerated
    elapsed = time.perf_counter() - start
    assert elapsed <= 10.0
    report("credibility-audit",
           f"{len(checked)} branch-frequency bands inside 99% bounds, "
           f"seed replay byte-identical over 10000 rounds, {elapsed:.1f}s")


def test_criterion_10_play_flow_end_to_end():
    """Secondary criterion: delegated to the browser client's own suite,
    which spawns this package's live server. Run here when the frontend
    toolchain is installed so the gate covers it end to end."""
    import shutil
    import subprocess
    from pathlib import Path

    frontend = Path(__file__).resolve().parent.parent / "frontend"
    if shutil.which("npx") is None or not (frontend / "node_modules").is_dir():
        pytest.skip("frontend toolchain not installed; run `npm install && "
                    "npm test` inside frontend/ to exercise this criterion")
    proc = subprocess.run(
        ["npx", "vitest", "run", "tests/e2e.test.ts"],
        cwd=frontend, capture_output=True, text=True, timeout=180)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    report("play-flow-e2e",
           "20 live rounds + finish + audit panel against a spawned server, "
           "valuation never on the wire, averages match exactly")
