import {
  ApiError,
  ProviderUnavailableError,
  TimeoutError,
  TransportError,
} from "./errors.js";
import type {
  ErrorBody,
  HealthResult,
  LpmDump,
  MtmDump,
  RecordResult,
  RespondResult,
  RetrieveResult,
  StmDump,
  TierDump,
  TierName,
  WipeResult,
} from "./types.js";

export interface MemoryClientOptions {
  /** Server origin, e.g. "http://127.0.0.1:8077". */
  baseUrl: string;
  /** Sent as "Authorization: Bearer <token>" when the server requires one. */
  authToken?: string;
  /** Per-request deadline. Default 10s. */
  timeoutMs?: number;
  /**
   * Extra attempts after a transport failure (connection refused, reset).
   * Timeouts and HTTP error statuses are never retried: a timed-out request
   * may already have been processed, and the server rolls failed exchanges
   * back itself, so blind client retries would only duplicate work.
   * Default 2.
   */
  retries?: number;
  /** First retry delay; doubles per attempt. Default 250ms. */
  backoffBaseMs?: number;
  /** Injectable fetch, mainly for tests. Defaults to the global. */
  fetchImpl?: typeof fetch;
}

interface RequestSpec {
  method: "GET" | "POST" | "DELETE";
  path: string;
  body?: unknown;
  query?: Record<string, string>;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

/**
 * Client for the hiermem tiered-memory service. One instance per server;
 * all methods are safe to call concurrently.
 */
export class MemoryClient {
  private readonly baseUrl: string;
  private readonly authToken?: string;
  private readonly timeoutMs: number;
  private readonly retries: number;
  private readonly backoffBaseMs: number;
  private readonly fetchImpl: typeof fetch;

  constructor(options: MemoryClientOptions) {
    if (!options.baseUrl) {
      throw new TypeError("baseUrl is required");
    }
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.authToken = options.authToken;
    this.timeoutMs = options.timeoutMs ?? 10_000;
    this.retries = options.retries ?? 2;
    this.backoffBaseMs = options.backoffBaseMs ?? 250;
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  /** Liveness probe; does not require auth. */
  health(): Promise<HealthResult> {
    return this.request<HealthResult>({ method: "GET", path: "/healthz" });
  }

  /** Ask the agent to answer `query`; the exchange is recorded in memory. */
  respond(
    userId: string,
    query: string,
    opts: { timestamp?: number } = {},
  ): Promise<RespondResult> {
    return this.request<RespondResult>({
      method: "POST",
      path: `/v1/users/${encodeURIComponent(userId)}/respond`,
      body: { query, timestamp: opts.timestamp },
    });
  }

  /** Record an exchange that already happened, without generating a reply. */
  record(
    userId: string,
    query: string,
    opts: { response?: string; timestamp?: number } = {},
  ): Promise<RecordResult> {
    return this.request<RecordResult>({
      method: "POST",
      path: `/v1/users/${encodeURIComponent(userId)}/messages`,
      body: { query, response: opts.response ?? "", timestamp: opts.timestamp },
    });
  }

  /**
   * Query memory without generating. A plain retrieve is a pure read;
   * `touch: true` also commits visit-count bumps on the segments that
   * contributed, which feeds their heat.
   */
  retrieve(
    userId: string,
    query: string,
    opts: { touch?: boolean; timestamp?: number } = {},
  ): Promise<RetrieveResult> {
    return this.request<RetrieveResult>({
      method: "POST",
      path: `/v1/users/${encodeURIComponent(userId)}/retrieve`,
      body: { query, touch: opts.touch ?? false, timestamp: opts.timestamp },
    });
  }

  /** Dump one memory tier. For mtm, `now` picks the heat reference time. */
  memory(userId: string, tier: "stm", opts?: { now?: number }): Promise<StmDump>;
  memory(userId: string, tier: "mtm", opts?: { now?: number }): Promise<MtmDump>;
  memory(userId: string, tier: "lpm", opts?: { now?: number }): Promise<LpmDump>;
  memory(userId: string, tier: TierName, opts: { now?: number } = {}): Promise<TierDump> {
    return this.request<TierDump>({
      method: "GET",
      path: `/v1/users/${encodeURIComponent(userId)}/memory/${tier}`,
      query: opts.now !== undefined ? { now: String(opts.now) } : undefined,
    });
  }

  /** Delete the user's memory and snapshot files. */
  wipe(userId: string): Promise<WipeResult> {
    return this.request<WipeResult>({
      method: "DELETE",
      path: `/v1/users/${encodeURIComponent(userId)}`,
    });
  }

  // -- transport ----------------------------------------------------------

  private async request<T>(spec: RequestSpec): Promise<T> {
    let lastError: TransportError | undefined;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      if (attempt > 0) {
        await sleep(this.backoffBaseMs * 2 ** (attempt - 1));
      }
      try {
        return await this.once<T>(spec);
      } catch (error) {
        if (error instanceof TransportError) {
          lastError = error;
          continue;
        }
        throw error;
      }
    }
    throw lastError ?? new TransportError("request failed");
  }

  private async once<T>(spec: RequestSpec): Promise<T> {
    let url = this.baseUrl + spec.path;
    if (spec.query) {
      url += "?" + new URLSearchParams(spec.query).toString();
    }
    const headers: Record<string, string> = {};
    if (spec.body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    if (this.authToken) {
      headers["Authorization"] = `Bearer ${this.authToken}`;
    }

    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), this.timeoutMs);
    let response: Response;
    try {
      response = await this.fetchImpl(url, {
        method: spec.method,
        headers,
        body: spec.body !== undefined ? JSON.stringify(spec.body) : undefined,
        signal: controller.signal,
      });
    } catch (error) {
      if ((error as { name?: string } | null)?.name === "AbortError") {
        throw new TimeoutError(this.timeoutMs);
      }
      throw new TransportError(
        `${spec.method} ${spec.path}: ${String((error as Error)?.message ?? error)}`,
        error,
      );
    } finally {
      clearTimeout(timer);
    }

    if (!response.ok) {
      throw await this.toApiError(response);
    }
    return (await response.json()) as T;
  }

  private async toApiError(response: Response): Promise<ApiError> {
    let code = `http_${response.status}`;
    let message = response.statusText || "request failed";
    try {
      const body = (await response.json()) as Partial<ErrorBody> & { detail?: string };
      if (typeof body.code === "string") code = body.code;
      if (typeof body.message === "string") message = body.message;
      else if (typeof body.detail === "string") message = body.detail;
    } catch {
      // non-JSON error body; keep the status line
    }
    if (response.status === 503) {
      return new ProviderUnavailableError(message);
    }
    return new ApiError(response.status, code, message);
  }
}
