/**
 * End-to-end: spawns the real Python service, plays 20 live rounds through
 * PlayClient, finishes, and checks the audit against the commitment shown at
 * session start. Requires the fishmonger package to be installed (pip install
 * -e . from the repository root).
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, type ChildProcess } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { PlayClient } from "../src/api.js";
import { auditPanel, averagesPanel } from "../src/render.js";
import {
  finishSession,
  playRound,
  startView,
  statsMismatches,
  type GameView,
} from "../src/state.js";

const PORT = 18100 + (process.pid % 1800);
const BASE = `http://127.0.0.1:${PORT}`;
const VALUATION = 1.372036; // distinctive digits never allowed on the wire

let server: ChildProcess;
const traffic: string[] = [];

const recordingFetch = (url: string, init?: RequestInit) => {
  traffic.push(`${url} ${typeof init?.body === "string" ? init.body : ""}`);
  return fetch(url, init);
};

async function waitForServer(): Promise<void> {
  const deadline = Date.now() + 20_000;
  let lastError = "";
  while (Date.now() < deadline) {
    if (server.exitCode !== null) {
      throw new Error(`service exited with code ${server.exitCode}: ${lastError}`);
    }
    try {
      const res = await fetch(`${BASE}/sessions/warmup-probe/offer`);
      if (res.status === 404) return; // routing is up
    } catch (err) {
      lastError = err instanceof Error ? err.message : String(err);
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error(`service did not come up on ${BASE}: ${lastError}`);
}

beforeAll(async () => {
  const logDir = mkdtempSync(join(tmpdir(), "play-e2e-"));
  server = spawn(
    "python3",
    ["-m", "fishmonger.cli", "serve", "--port", String(PORT), "--out-dir", logDir],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stderr?.on("data", () => undefined); // uvicorn logs; keep the pipe drained
  server.stdout?.on("data", () => undefined);
  await waitForServer();
}, 30_000);

afterAll(async () => {
  if (!server) return;
  const exited = new Promise((resolve) => server.once("exit", resolve));
  server.kill("SIGTERM");
  const timeout = setTimeout(() => server.kill("SIGKILL"), 3000);
  await exited;
  clearTimeout(timeout);
});

describe("live play flow", () => {
  let view: GameView;
  let client: PlayClient;

  it("creates a session and shows the commitment before round 1", async () => {
    client = new PlayClient(BASE, recordingFetch);
    const created = await client.createSession({ seed: 424242, roundCap: 30 });
    view = startView(created, VALUATION);
    expect(view.commitment.seed_commitment).toMatch(/^[0-9a-f]{64}$/);
    expect(view.commitment.curve.family).toBe("rational");
    expect(view.offer).not.toBeNull();
    expect(view.offer!.price).toBeGreaterThanOrEqual(0);
    expect(view.offer!.price).toBeLessThanOrEqual(1);
  }, 15_000);

  it("plays 20 rounds with client and server figures in exact agreement", async () => {
    for (let i = 0; i < 20; i++) {
      expect(view.offer).not.toBeNull();
      const accept = view.offer!.price <= VALUATION;
      view = await playRound(client, view, accept);
      // exact equality, not approximate: same fold, same doubles
      expect(statsMismatches(view)).toEqual([]);
      expect(view.serverStats.revenue_avg).toBe(
        view.history.length ? view.revenueTotal / view.history.length : 0,
      );
    }
    expect(view.history).toHaveLength(20);
    expect(averagesPanel(view)).toContain("agree exactly");
  }, 30_000);

  it("a duplicate submit with the same token does not double-count", async () => {
    const before = view.history.length;
    const token = `round-${view.offer!.round}`;
    const first = await client.postDecision(view.sessionId, true, token);
    const second = await client.postDecision(view.sessionId, false, token);
    expect(second).toEqual(first);
    view = await playRound(client, view, true); // folds the stored answer once
    expect(view.history).toHaveLength(before + 1);
    expect(statsMismatches(view)).toEqual([]);
  }, 15_000);

  it("finishes and renders an audit panel consistent with the commitment", async () => {
    view = await finishSession(client, view);
    expect(view.status).toBe("finished");
    const audit = view.audit!;
    expect(audit.rounds).toHaveLength(view.history.length);

    // the offers the audit reveals are exactly the ones we decided on
    for (const row of view.history) {
      const revealed = audit.rounds[row.round]!;
      expect(revealed.price).toBe(row.price);
      expect(revealed.accepted).toBe(row.accepted);
    }

    // seed reveal must hash to the commitment shown before round 1
    const recomputed = createHash("sha256")
      .update(`${audit.seed}:${audit.nonce}`)
      .digest("hex");
    expect(recomputed).toBe(view.commitment.seed_commitment);

    const html = auditPanel(audit);
    expect(html).toContain("Credibility audit");
    expect(html).toContain(String(audit.seed));
    expect(html).toContain(audit.verdict);
  }, 15_000);

  it("never sent the valuation over the wire", () => {
    expect(traffic.length).toBeGreaterThan(20);
    for (const line of traffic) {
      expect(line).not.toContain("valuation");
      expect(line).not.toContain("1.372036");
    }
  });
});
