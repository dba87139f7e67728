/**
 * api.ts — typed client for the pricing-game session service.
 *
 * Every request body is built from an explicit field list; nothing from
 * client-side state (in particular the private valuation) can ride along.
 * The fetch implementation is injectable so tests can record traffic.
 */

export interface CurveSpec {
  family: string;
  [param: string]: unknown;
}

export interface Offer {
  round: number;
  price: number;
}

// Server-observable aggregates; mirrors the server's running sums exactly.
export interface PublicStats {
  rounds_played: number;
  accept_count: number;
  revenue_total: number;
  revenue_avg: number;
}

export interface Commitment {
  curve: CurveSpec;
  mechanism: string;
  seed_commitment: string;
  round_cap: number;
}

export interface CreateSessionResponse {
  session_id: string;
  status: string;
  commitment: Commitment;
  offer: Offer;
  stats: PublicStats;
}

export interface DecisionResponse {
  session_id: string;
  status: string;
  round: number;
  price: number;
  accepted: boolean;
  stats: PublicStats;
  next: Offer | null;
}

export interface OfferResponse {
  session_id: string;
  status: string;
  offer: Offer;
  stats: PublicStats;
  round_cap: number;
}

export interface FinishResponse {
  session_id: string;
  status: string;
  rounds_played: number;
  stats: PublicStats;
}

export interface HistoryRow {
  round: number;
  price: number;
  accepted: boolean;
  branch?: string;
  estimate_before?: number;
}

export interface HistoryResponse {
  session_id: string;
  status: string;
  rounds: HistoryRow[];
  stats: PublicStats;
}

export interface AuditBand {
  estimate: number;
  rounds: number;
  observed: Record<string, number>;
  expected: Record<string, number>;
  within_bounds: boolean | null;
}

export interface AuditResponse {
  session_id: string;
  curve: CurveSpec;
  seed: number;
  nonce: string;
  seed_commitment: string;
  rounds: Required<HistoryRow>[];
  bands: AuditBand[];
  verdict: "pass" | "fail" | "insufficient-sample";
  stats: PublicStats;
}

export interface SessionOptions {
  curve?: CurveSpec;
  seed?: number;
  roundCap?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class PlayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async createSession(options: SessionOptions = {}): Promise<CreateSessionResponse> {
    const body: Record<string, unknown> = {};
    if (options.curve !== undefined) body.curve = options.curve;
    if (options.seed !== undefined) body.seed = options.seed;
    if (options.roundCap !== undefined) body.round_cap = options.roundCap;
    return this.request<CreateSessionResponse>("POST", "/sessions", body);
  }

  async getOffer(sessionId: string): Promise<OfferResponse> {
    return this.request<OfferResponse>("GET", `/sessions/${sessionId}/offer`);
  }

  async postDecision(sessionId: string, accept: boolean, token: string): Promise<DecisionResponse> {
    return this.request<DecisionResponse>("POST", `/sessions/${sessionId}/decision`, {
      accept,
      token,
    });
  }

  async finish(sessionId: string): Promise<FinishResponse> {
    return this.request<FinishResponse>("POST", `/sessions/${sessionId}/finish`);
  }

  async getHistory(sessionId: string): Promise<HistoryResponse> {
    return this.request<HistoryResponse>("GET", `/sessions/${sessionId}/history`);
  }

  async getAudit(sessionId: string): Promise<AuditResponse> {
    return this.request<AuditResponse>("GET", `/sessions/${sessionId}/audit`);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "network", err instanceof Error ? err.message : String(err));
    }
    const text = await response.text();
    let payload: unknown = null;
    if (text) {
      try {
        payload = JSON.parse(text);
      } catch {
        throw new ApiError(response.status, "bad-response", `unparseable body: ${text.slice(0, 200)}`);
      }
    }
    if (!response.ok) {
      const detail = (payload as { detail?: { code?: string; message?: string } })?.detail;
      throw new ApiError(
        response.status,
        detail?.code ?? "http-error",
        detail?.message ?? `HTTP ${response.status}`,
      );
    }
    return payload as T;
  }
}
