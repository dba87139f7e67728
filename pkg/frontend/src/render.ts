// render.ts — pure HTML fragment builders; main.ts injects them into the page.
// Kept DOM-free so the test suite can assert on output without a browser.

import { AuditResponse } from "./api.js";
import {
  GameView,
  acceptCount,
  revenueAverage,
  statsMismatches,
  surplusAverage,
} from "./state.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function money(x: number): string {
  return x.toFixed(4);
}

function pct(x: number): string {
  return (100 * x).toFixed(1) + "%";
}

export function commitmentPanel(view: GameView): string {
  const c = view.commitment;
  const params = Object.entries(c.curve)
    .filter(([key]) => key !== "family")
    .map(([key, value]) => `${escapeHtml(key)}=${escapeHtml(value)}`)
    .join(", ");
  return [
    `<h2>Seller commitment</h2>`,
    `<p>Acceptance curve: <strong>${escapeHtml(c.curve.family)}</strong>` +
      (params ? ` (${params})` : "") + `</p>`,
    `<p>${escapeHtml(c.mechanism)}</p>`,
    `<p>Round cap: ${c.round_cap}. Seed commitment: <code>${escapeHtml(c.seed_commitment)}</code>` +
      ` (the seed itself is revealed at audit time).</p>`,
  ].join("\n");
}

export function offerPanel(view: GameView): string {
  if (view.offer === null) {
    return `<p class="done">Session finished after ${view.history.length} rounds.</p>`;
  }
  return [
    `<p class="offer">Round ${view.offer.round + 1}: the seller asks ` +
      `<strong>${money(view.offer.price)}</strong> per unit.</p>`,
    `<p class="hint">Your private valuation is ${money(view.valuation)}; ` +
      `accepting nets ${money(view.valuation - view.offer.price)} this round.</p>`,
  ].join("\n");
}

export function averagesPanel(view: GameView): string {
  const n = view.history.length;
  const drift = statsMismatches(view);
  const driftNote = drift.length === 0
    ? `<span class="ok">client and server agree exactly</span>`
    : `<span class="bad">MISMATCH: ${escapeHtml(drift.join("; "))}</span>`;
  return [
    `<table class="averages"><tbody>`,
    `<tr><th>Rounds played</th><td>${n}</td></tr>`,
    `<tr><th>Accepted</th><td>${acceptCount(view)}</td></tr>`,
    `<tr><th>Your surplus / round</th><td>${money(surplusAverage(view))}</td></tr>`,
    `<tr><th>Seller revenue / round</th><td>${money(revenueAverage(view))}</td></tr>`,
    `</tbody></table>`,
    `<p class="drift">${driftNote}</p>`,
  ].join("\n");
}

export function historyPanel(view: GameView, limit = 12): string {
  const rows = view.history.slice(-limit).map((row) =>
    `<tr><td>${row.round + 1}</td><td>${money(row.price)}</td>` +
    `<td>${row.accepted ? "accepted" : "rejected"}</td></tr>`,
  );
  if (rows.length === 0) {
    return `<p>No rounds played yet.</p>`;
  }
  return [
    `<table class="history"><thead><tr><th>#</th><th>Price</th><th>Decision</th></tr></thead>`,
    `<tbody>`,
    ...rows.reverse(),
    `</tbody></table>`,
  ].join("\n");
}

export function auditPanel(audit: AuditResponse): string {
  const bandRows = audit.bands.map((band) => {
    const status = band.within_bounds === null
      ? "too few rounds"
      : band.within_bounds ? "within bounds" : "OUT OF BOUNDS";
    const cells = ["adaptation", "reward", "confirmation"].map((name) => {
      const obs = band.observed[name] ?? 0;
      const exp = band.expected[name] ?? 0;
      return `<td>${pct(obs)} vs ${pct(exp)}</td>`;
    }).join("");
    return `<tr><td>${money(band.estimate)}</td><td>${band.rounds}</td>${cells}` +
      `<td>${status}</td></tr>`;
  });
  const verdictClass = audit.verdict === "fail" ? "bad" : "ok";
  return [
    `<h2>Credibility audit</h2>`,
    `<p>Verdict: <strong class="${verdictClass}">${escapeHtml(audit.verdict)}</strong></p>`,
    `<p>Revealed seed <code>${audit.seed}</code> with nonce <code>${escapeHtml(audit.nonce)}</code>; ` +
      `check SHA-256 of "<code>${audit.seed}:${escapeHtml(audit.nonce)}</code>" against the ` +
      `commitment <code>${escapeHtml(audit.seed_commitment)}</code> shown at the start, then ` +
      `replay the offer stream from the seed and your own decisions.</p>`,
    `<table class="bands"><thead><tr><th>Estimate</th><th>Rounds</th>` +
      `<th>Adaptation</th><th>Reward</th><th>Confirmation</th><th>99% band</th></tr></thead>`,
    `<tbody>`,
    ...bandRows,
    `</tbody></table>`,
    `<p>Estimate trace (revealed post-game): ` +
      escapeHtml(summarizeTrace(audit.rounds.map((r) => r.estimate_before))) + `</p>`,
  ].join("\n");
}

// Collapse the piecewise-constant estimate series into "value x rounds" runs.
function summarizeTrace(estimates: number[]): string {
  const runs: string[] = [];
  let i = 0;
  while (i < estimates.length && runs.length < 20) {
    let j = i;
    while (j < estimates.length && estimates[j] === estimates[i]) j += 1;
    runs.push(`${(estimates[i] as number).toFixed(4)}×${j - i}`);
    i = j;
  }
  if (i < estimates.length) runs.push("…");
  return runs.join(", ");
}
