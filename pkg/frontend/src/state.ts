/**
 * state.ts — client-side game view and the round-playing loop.
 *
 * The valuation lives only in this structure; it is read when the player
 * clicks accept/reject and when averages are displayed, never serialized.
 * The revenue fold must mirror the server's arithmetic operation for
 * operation (a plain left-to-right sum of accepted prices), so the client
 * figure can be compared to the server's with === rather than a tolerance.
 */

import {
  ApiError,
  AuditResponse,
  CreateSessionResponse,
  Commitment,
  DecisionResponse,
  Offer,
  PlayClient,
  PublicStats,
} from "./api.js";

export interface DecisionRecord {
  round: number;
  price: number;
  accepted: boolean;
}

export interface GameView {
  sessionId: string;
  valuation: number; // client-only, never transmitted
  commitment: Commitment;
  status: string;
  offer: Offer | null;
  history: DecisionRecord[];
  revenueTotal: number; // left-to-right sum of accepted prices
  serverStats: PublicStats;
  audit: AuditResponse | null;
}

export function startView(created: CreateSessionResponse, valuation: number): GameView {
  if (!Number.isFinite(valuation) || valuation < 0) {
    throw new Error(`valuation must be a nonnegative number, got ${valuation}`);
  }
  return {
    sessionId: created.session_id,
    valuation,
    commitment: created.commitment,
    status: created.status,
    offer: created.offer,
    history: [],
    revenueTotal: 0,
    serverStats: created.stats,
    audit: null,
  };
}

/** Fold one settled round into the view. Pure; the server echo is authoritative. */
export function applyDecision(view: GameView, res: DecisionResponse): GameView {
  const record: DecisionRecord = {
    round: res.round,
    price: res.price,
    accepted: res.accepted,
  };
  return {
    ...view,
    status: res.status,
    offer: res.next,
    history: [...view.history, record],
    revenueTotal: res.accepted ? view.revenueTotal + res.price : view.revenueTotal,
    serverStats: res.stats,
  };
}

/** Running cook surplus, recomputed from history: sum of a_i (q - Q_i) over n. */
export function surplusAverage(view: GameView): number {
  if (view.history.length === 0) return 0;
  let total = 0;
  for (const row of view.history) {
    if (row.accepted) total += view.valuation - row.price;
  }
  return total / view.history.length;
}

export function revenueAverage(view: GameView): number {
  if (view.history.length === 0) return 0;
  return view.revenueTotal / view.history.length;
}

export function acceptCount(view: GameView): number {
  let count = 0;
  for (const row of view.history) {
    if (row.accepted) count += 1;
  }
  return count;
}

/**
 * Compare every server-observable quantity against the client recomputation.
 * Equality is exact: both sides run the same IEEE-754 operations in the same
 * order, and JSON round-trips doubles losslessly.
 */
export function statsMismatches(view: GameView): string[] {
  const mismatches: string[] = [];
  const server = view.serverStats;
  if (server.rounds_played !== view.history.length) {
    mismatches.push(`rounds: server ${server.rounds_played} != client ${view.history.length}`);
  }
  if (server.accept_count !== acceptCount(view)) {
    mismatches.push(`accepts: server ${server.accept_count} != client ${acceptCount(view)}`);
  }
  if (server.revenue_total !== view.revenueTotal) {
    mismatches.push(`revenue: server ${server.revenue_total} != client ${view.revenueTotal}`);
  }
  if (server.revenue_avg !== revenueAverage(view)) {
    mismatches.push(`revenue avg: server ${server.revenue_avg} != client ${revenueAverage(view)}`);
  }
  return mismatches;
}

/** One idempotency token per round: a resend after a dropped response is absorbed. */
export function decisionToken(view: GameView): string {
  if (view.offer === null) {
    throw new Error("no offer is pending");
  }
  return `round-${view.offer.round}`;
}

/**
 * Post the decision for the currently displayed offer and fold the result.
 * On a duplicate submit the server replays its first answer, so calling this
 * twice with the same pending offer cannot double-count a round.
 */
export async function playRound(
  client: PlayClient,
  view: GameView,
  accept: boolean,
): Promise<GameView> {
  if (view.offer === null) {
    throw new Error("session has no pending offer");
  }
  const res = await client.postDecision(view.sessionId, accept, decisionToken(view));
  if (res.round < view.history.length) {
    // stale duplicate of an already-folded round (e.g. a retry raced a
    // success); the view already contains it
    return view;
  }
  return applyDecision(view, res);
}

export async function finishSession(client: PlayClient, view: GameView): Promise<GameView> {
  const res = await client.finish(view.sessionId);
  const audit = await client.getAudit(view.sessionId);
  return { ...view, status: res.status, offer: null, serverStats: res.stats, audit };
}

export function isRetryable(err: unknown): boolean {
  return err instanceof ApiError && (err.code === "network" || err.status >= 500);
}
