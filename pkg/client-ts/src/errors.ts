/** Typed failures, so callers can branch without string matching. */

/** Base class for everything this client throws on purpose. */
export class MemoryClientError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/**
 * The server answered with a non-2xx status. `code` is the server's error
 * code ("invalid_argument", "not_found", "unauthorized", ...), which is more
 * stable than the message text.
 */
export class ApiError extends MemoryClientError {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(`${code} (HTTP ${status}): ${message}`);
    this.status = status;
    this.code = code;
  }
}

/**
 * HTTP 503: the model provider behind the server is down. The server rolled
 * the exchange back, so nothing was recorded; retrying later is safe.
 */
export class ProviderUnavailableError extends ApiError {
  constructor(message: string) {
    super(503, "provider_unavailable", message);
  }
}

/** The request never produced a response (connection refused, reset, DNS). */
export class TransportError extends MemoryClientError {
  override readonly cause?: unknown;

  constructor(message: string, cause?: unknown) {
    super(message);
    this.cause = cause;
  }
}

/** The per-request deadline elapsed before the server answered. */
export class TimeoutError extends MemoryClientError {
  constructor(timeoutMs: number) {
    super(`request timed out after ${timeoutMs}ms`);
  }
}
