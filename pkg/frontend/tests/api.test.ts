import { describe, expect, it } from "vitest";

import { ApiError, PlayClient } from "../src/api.js";
import { isRetryable } from "../src/state.js";

interface Recorded {
  url: string;
  method: string;
  body: string | null;
}

function recordingFetch(
  responder: (url: string, init?: RequestInit) => { status: number; payload: unknown },
): { log: Recorded[]; fetchImpl: (url: string, init?: RequestInit) => Promise<Response> } {
  const log: Recorded[] = [];
  return {
    log,
    fetchImpl: async (url, init) => {
      log.push({
        url,
        method: init?.method ?? "GET",
        body: typeof init?.body === "string" ? init.body : null,
      });
      const { status, payload } = responder(url, init);
      return new Response(JSON.stringify(payload), {
        status,
        headers: { "content-type": "application/json" },
      });
    },
  };
}

const okSession = {
  session_id: "abc",
  status: "awaiting-decision",
  commitment: { curve: { family: "rational" }, mechanism: "m", seed_commitment: "x", round_cap: 5 },
  offer: { round: 0, price: 0.5 },
  stats: { rounds_played: 0, accept_count: 0, revenue_total: 0, revenue_avg: 0 },
};

describe("PlayClient request construction", () => {
  it("serializes only the whitelisted session options", async () => {
    const { log, fetchImpl } = recordingFetch(() => ({ status: 200, payload: okSession }));
    const client = new PlayClient("http://h", fetchImpl);
    await client.createSession({ seed: 7, roundCap: 30, curve: { family: "rational" } });
    expect(log).toHaveLength(1);
    expect(log[0]!.url).toBe("http://h/sessions");
    expect(log[0]!.method).toBe("POST");
    expect(Object.keys(JSON.parse(log[0]!.body!)).sort()).toEqual(["curve", "round_cap", "seed"]);
  });

  it("sends an empty object when no options are given", async () => {
    const { log, fetchImpl } = recordingFetch(() => ({ status: 200, payload: okSession }));
    await new PlayClient("http://h", fetchImpl).createSession();
    expect(JSON.parse(log[0]!.body!)).toEqual({});
  });

  it("decision bodies carry exactly accept and token", async () => {
    const { log, fetchImpl } = recordingFetch(() => ({ status: 200, payload: {} }));
    const client = new PlayClient("http://h", fetchImpl);
    await client.postDecision("abc", true, "round-0");
    expect(log[0]!.url).toBe("http://h/sessions/abc/decision");
    expect(JSON.parse(log[0]!.body!)).toEqual({ accept: true, token: "round-0" });
  });

  it("read endpoints hit the documented paths", async () => {
    const { log, fetchImpl } = recordingFetch(() => ({ status: 200, payload: {} }));
    const client = new PlayClient("http://h", fetchImpl);
    await client.getOffer("s");
    await client.getHistory("s");
    await client.getAudit("s");
    await client.finish("s");
    expect(log.map((r) => `${r.method} ${r.url.slice(8)}`)).toEqual([
      "GET /sessions/s/offer",
      "GET /sessions/s/history",
      "GET /sessions/s/audit",
      "POST /sessions/s/finish",
    ]);
    expect(log[3]!.body).toBeNull(); // finish posts no body
  });
});

describe("valuation privacy", () => {
  it("never appears in any request, whatever the client does", async () => {
    const valuation = 1.372036; // distinctive digits; grep-able in traffic
    const { log, fetchImpl } = recordingFetch((url) => {
      if (url.endsWith("/decision")) {
        return {
          status: 200,
          payload: {
            session_id: "abc", status: "awaiting-decision", round: 0, price: 0.5,
            accepted: true,
            stats: { rounds_played: 1, accept_count: 1, revenue_total: 0.5, revenue_avg: 0.5 },
            next: { round: 1, price: 0.6 },
          },
        };
      }
      return { status: 200, payload: okSession };
    });
    const client = new PlayClient("http://h", fetchImpl);
    const created = await client.createSession({ seed: 1 });
    // the decision itself is a function of the valuation, but only the
    // boolean crosses the wire
    const accept = created.offer.price <= valuation;
    await client.postDecision(created.session_id, accept, "round-0");
    await client.getOffer(created.session_id);
    await client.finish(created.session_id);
    await client.getAudit(created.session_id);

    for (const entry of log) {
      const wire = `${entry.url} ${entry.body ?? ""}`;
      expect(wire).not.toContain("valuation");
      expect(wire).not.toContain("1.372036");
    }
  });
});

describe("error mapping", () => {
  it("surfaces the machine-readable code from the error envelope", async () => {
    const { fetchImpl } = recordingFetch(() => ({
      status: 409,
      payload: { detail: { code: "missing-token", message: "a decision needs an idempotency token" } },
    }));
    const client = new PlayClient("http://h", fetchImpl);
    const err = await client.postDecision("s", true, "t").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe("missing-token");
    expect(isRetryable(err)).toBe(false);
  });

  it("wraps transport failures as retryable network errors", async () => {
    const client = new PlayClient("http://h", () => Promise.reject(new Error("ECONNREFUSED")));
    const err = await client.getOffer("s").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("network");
    expect(isRetryable(err)).toBe(true);
  });

  it("treats 5xx as retryable and unparseable bodies as bad responses", async () => {
    const { fetchImpl } = recordingFetch(() => ({ status: 502, payload: { detail: {} } }));
    const err = await new PlayClient("http://h", fetchImpl).getOffer("s").catch((e) => e);
    expect(err.code).toBe("http-error");
    expect(isRetryable(err)).toBe(true);

    const raw = async () => new Response("<html>oops</html>", { status: 200 });
    const err2 = await new PlayClient("http://h", raw).getOffer("s").catch((e) => e);
    expect(err2.code).toBe("bad-response");
  });
});
