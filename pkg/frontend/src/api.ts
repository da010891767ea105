/**
 * Typed JSON client for the intervention service.
 *
 * Every mutating request carries a client-generated event id; network-level
 * retries re-send the SAME id, and the server deduplicates, so a flaky
 * connection can never produce duplicate activity rows.
 */

export interface ApiConfig {
  baseUrl: string;
  retries?: number;
  retryDelayMs?: number;
}

export interface RegisterResult {
  user_id: number;
  registration_code: string;
}

export interface ShareOutcome {
  decision: "intervene" | "pass";
  legend: string;
  intervention_token?: string;
  expires_at?: string;
  message_id?: number;
  message_text?: string;
  event_id?: number;
}

export interface ResolveAck {
  status: string;
  popup_action: number;
  event_id: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly errorCode: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

export function newEventId(): string {
  return crypto.randomUUID();
}

export class ApiClient {
  private readonly retries: number;
  private readonly retryDelayMs: number;

  constructor(
    private readonly config: ApiConfig,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {
    this.retries = config.retries ?? 3;
    this.retryDelayMs = config.retryDelayMs ?? 300;
  }

  async register(
    username: string,
    password: string,
    appVariant: "V1" | "V2",
    language: "EN" | "DE",
  ): Promise<RegisterResult> {
    return this.post("/api/v1/register", {
      username,
      password,
      app_variant: appVariant,
      language,
    });
  }

  async login(username: string, password: string): Promise<{ session_token: string }> {
    return this.post("/api/v1/login", { username, password });
  }

  async logout(sessionToken: string): Promise<void> {
    await this.post("/api/v1/logout", { session_token: sessionToken });
  }

  async shareAttempt(body: {
    session_token: string;
    client_event_id: string;
    post_length: number;
    post_hash: string;
    image_hash: string;
    client_timestamp: string;
  }): Promise<ShareOutcome> {
    return this.post("/api/v1/share-attempt", body);
  }

  async resolve(body: {
    session_token: string;
    client_event_id: string;
    intervention_token: string;
    action: "edit" | "post";
    post_length: number;
    post_hash: string;
    image_hash: string;
  }): Promise<ResolveAck> {
    return this.post("/api/v1/resolve", body);
  }

  async health(): Promise<{ status: string; protocol_version: string }> {
    const response = await this.fetchImpl(`${this.config.baseUrl}/api/v1/health`, {
      method: "GET",
    });
    return response.json();
  }

  /**
   * POST with retry on transport failures only. HTTP error responses are
   * surfaced as ApiError without retrying: thanks to the idempotency keys a
   * replayed success is safe, but a rejected request will not change.
   */
  private async post<T>(path: string, body: unknown): Promise<T> {
    const url = `${this.config.baseUrl}${path}`;
    let lastError: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      try {
        const response = await this.fetchImpl(url, {
          method: "POST",
          headers: { "content-type": "application/json; charset=utf-8" },
          body: JSON.stringify(body),
        });
        if (!response.ok) {
          const payload = (await response.json().catch(() => ({}))) as {
            error_code?: string;
            message?: string;
          };
          throw new ApiError(
            response.status,
            payload.error_code ?? "unknown_error",
            payload.message ?? `HTTP ${response.status}`,
          );
        }
        return (await response.json()) as T;
      } catch (error) {
        if (error instanceof ApiError) {
          throw error;
        }
        lastError = error;
        if (attempt < this.retries) {
          await delay(this.retryDelayMs * 2 ** attempt);
        }
      }
    }
    throw lastError;
  }
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Runtime configuration: the API base URL ships next to the bundle. */
export async function loadConfig(url = "./config.json"): Promise<ApiConfig> {
  const response = await fetch(url);
  if (!response.ok) {
    throw new Error(`cannot load ${url}: HTTP ${response.status}`);
  }
  return (await response.json()) as ApiConfig;
}
