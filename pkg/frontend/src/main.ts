/**
 * main.ts — page wiring. Valuation is entered once, locked for the session,
 * and kept in a local variable only; every server interaction goes through
 * PlayClient, which serializes an explicit field list.
 */

import { ApiError, PlayClient } from "./api.js";
import {
  GameView,
  finishSession,
  isRetryable,
  playRound,
  startView,
} from "./state.js";
import { auditPanel, averagesPanel, commitmentPanel, historyPanel, offerPanel } from "./render.js";

const DEFAULT_BASE = "http://127.0.0.1:8765";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let client: PlayClient;
let view: GameView | null = null;
let busy = false;
// set when a decision post failed; "retry" re-sends with the same token
let pendingRetry: { accept: boolean } | null = null;

function redraw(): void {
  if (!view) return;
  el("commitment").innerHTML = commitmentPanel(view);
  el("offer").innerHTML = offerPanel(view);
  el("averages").innerHTML = averagesPanel(view);
  el("history").innerHTML = historyPanel(view);
  el("audit").innerHTML = view.audit ? auditPanel(view.audit) : "";
  const live = view.offer !== null;
  el<HTMLButtonElement>("accept").disabled = !live || busy;
  el<HTMLButtonElement>("reject").disabled = !live || busy;
  el<HTMLButtonElement>("finish").disabled = view.status === "finished" || busy;
  el<HTMLButtonElement>("retry").hidden = pendingRetry === null;
}

function showError(message: string, retryable: boolean): void {
  el("error").textContent = retryable ? `${message} — you can retry.` : message;
}

function clearError(): void {
  el("error").textContent = "";
  pendingRetry = null;
}

async function decide(accept: boolean): Promise<void> {
  if (!view || busy) return;
  busy = true;
  redraw();
  try {
    view = await playRound(client, view, accept);
    clearError();
    if (view.offer === null && view.status === "finished") {
      // round cap reached: fetch the audit right away
      view = await finishSession(client, view);
    }
  } catch (err) {
    pendingRetry = { accept };
    showError(err instanceof Error ? err.message : String(err), isRetryable(err));
  } finally {
    busy = false;
    redraw();
  }
}

async function start(): Promise<void> {
  const valuation = Number(el<HTMLInputElement>("valuation").value);
  const seedText = el<HTMLInputElement>("seed").value.trim();
  const capText = el<HTMLInputElement>("cap").value.trim();
  const base = el<HTMLInputElement>("server").value.trim() || DEFAULT_BASE;
  client = new PlayClient(base);
  try {
    const created = await client.createSession({
      seed: seedText ? Number(seedText) : undefined,
      roundCap: capText ? Number(capText) : undefined,
    });
    view = startView(created, valuation);
    clearError();
    el<HTMLFieldSetElement>("setup").disabled = true; // valuation locked for the session
  } catch (err) {
    const hint = err instanceof ApiError && err.code === "network"
      ? " (is the service running? start it with: python3 -m fishmonger.cli serve)"
      : "";
    showError((err instanceof Error ? err.message : String(err)) + hint, false);
  }
  redraw();
}

async function finishClicked(): Promise<void> {
  if (!view || busy) return;
  busy = true;
  redraw();
  try {
    view = await finishSession(client, view);
    clearError();
  } catch (err) {
    showError(err instanceof Error ? err.message : String(err), isRetryable(err));
  } finally {
    busy = false;
    redraw();
  }
}

el("start").addEventListener("click", () => void start());
el("accept").addEventListener("click", () => void decide(true));
el("reject").addEventListener("click", () => void decide(false));
el("finish").addEventListener("click", () => void finishClicked());
el("retry").addEventListener("click", () => {
  if (pendingRetry) void decide(pendingRetry.accept);
});
