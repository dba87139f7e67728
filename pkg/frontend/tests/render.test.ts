import { describe, expect, it } from "vitest";

import type { AuditResponse, CreateSessionResponse } from "../src/api.js";
import { auditPanel, averagesPanel, commitmentPanel, historyPanel, offerPanel } from "../src/render.js";
import { applyDecision, startView } from "../src/state.js";

const created: CreateSessionResponse = {
  session_id: "s1",
  status: "awaiting-decision",
  commitment: {
    curve: { family: "exponential", rate: 2.0 },
    mechanism: "three-branch posted-price commitment",
    seed_commitment: "deadbeef".repeat(8),
    round_cap: 40,
  },
  offer: { round: 0, price: 0.37 },
  stats: { rounds_played: 0, accept_count: 0, revenue_total: 0, revenue_avg: 0 },
};

describe("commitmentPanel", () => {
  it("shows family, parameters and the hash, not the seed", () => {
    const html = commitmentPanel(startView(created, 1.0));
    expect(html).toContain("exponential");
    expect(html).toContain("rate=2");
    expect(html).toContain("deadbeef");
    expect(html).not.toMatch(/\bseed:\s*\d/i);
  });

  it("escapes hostile curve parameters", () => {
    const hostile = {
      ...created,
      commitment: {
        ...created.commitment,
        curve: { family: "<script>alert(1)</script>" },
      },
    };
    const html = commitmentPanel(startView(hostile, 1.0));
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("offerPanel", () => {
  it("shows the asking price and the net gain at the private valuation", () => {
    const html = offerPanel(startView(created, 1.0));
    expect(html).toContain("0.3700");
    expect(html).toContain("0.6300"); // 1.0 - 0.37
  });

  it("reports completion when no offer is pending", () => {
    const view = { ...startView(created, 1.0), offer: null };
    expect(offerPanel(view)).toContain("finished");
  });
});

describe("averagesPanel", () => {
  it("declares exact agreement when client and server match", () => {
    const html = averagesPanel(startView(created, 1.0));
    expect(html).toContain("agree exactly");
  });

  it("shouts when the server's revenue figure deviates", () => {
    let view = startView(created, 1.0);
    view = applyDecision(view, {
      session_id: "s1", status: "awaiting-decision", round: 0, price: 0.37,
      accepted: true,
      stats: { rounds_played: 1, accept_count: 1, revenue_total: 0.38, revenue_avg: 0.38 },
      next: { round: 1, price: 0.5 },
    });
    expect(averagesPanel(view)).toContain("MISMATCH");
  });
});

describe("historyPanel", () => {
  it("renders newest rounds first", () => {
    let view = startView(created, 1.0);
    view = applyDecision(view, {
      session_id: "s1", status: "awaiting-decision", round: 0, price: 0.37, accepted: true,
      stats: { rounds_played: 1, accept_count: 1, revenue_total: 0.37, revenue_avg: 0.37 },
      next: { round: 1, price: 0.9 },
    });
    view = applyDecision(view, {
      session_id: "s1", status: "awaiting-decision", round: 1, price: 0.9, accepted: false,
      stats: { rounds_played: 2, accept_count: 1, revenue_total: 0.37, revenue_avg: 0.185 },
      next: { round: 2, price: 0.5 },
    });
    const html = historyPanel(view);
    expect(html.indexOf("rejected")).toBeLessThan(html.indexOf("accepted"));
  });
});

describe("auditPanel", () => {
  const audit: AuditResponse = {
    session_id: "s1",
    curve: { family: "rational" },
    seed: 90210,
    nonce: "f00d",
    seed_commitment: "ab".repeat(32),
    rounds: [
      { round: 0, price: 0.4, accepted: true, branch: "adaptation", estimate_before: 0.0 },
      { round: 1, price: 0.4, accepted: true, branch: "confirmation", estimate_before: 0.4 },
      { round: 2, price: 0.0, accepted: true, branch: "reward", estimate_before: 0.4 },
    ],
    bands: [
      {
        estimate: 0.4,
        rounds: 2,
        observed: { adaptation: 0, reward: 0.5, confirmation: 0.5 },
        expected: { adaptation: 0.714, reward: 0.132, confirmation: 0.154 },
        within_bounds: null,
      },
    ],
    verdict: "insufficient-sample",
    stats: { rounds_played: 3, accept_count: 3, revenue_total: 0.8, revenue_avg: 0.26666666666666666 },
  };

  it("renders the verdict, the seed reveal and one row per band", () => {
    const html = auditPanel(audit);
    expect(html).toContain("insufficient-sample");
    expect(html).toContain("90210");
    expect(html).toContain("f00d");
    expect((html.match(/<tr><td>/g) ?? []).length).toBe(1);
    expect(html).toContain("too few rounds");
  });

  it("collapses the estimate trace into runs", () => {
    const html = auditPanel(audit);
    expect(html).toContain("0.0000×1");
    expect(html).toContain("0.4000×2");
  });
});
