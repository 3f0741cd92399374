/** Typed client for the labeling-session HTTP API.
 *
 * Every method maps to exactly one documented route.  Network failures
 * and gateway errors are retried with exponential backoff, so a caller
 * never has to skip a stimulus; contract errors (4xx) surface as
 * `ApiError` immediately.
 */

export type StimulusView = {
  status: "stimulus";
  stimulusId: string;
  /** Base64 PNG, one per display scale, smallest first. */
  images: string[];
  index: number;
  total: number;
  category: string;
};

export type SessionComplete = {
  status: "complete";
  total: number;
  category: string;
};

export type NextPayload = StimulusView | SessionComplete;

export type LabelAck = {
  progress: { labeled: number; total: number };
  qualified: boolean;
};

export type TemplateView =
  | { status: "not_ready"; reason: string }
  | { status: "ready"; values: number[]; trialsUsed: number; glyph: string };

export type YesNo = "yes" | "no";

export class ApiError extends Error {
  constructor(
    readonly httpStatus: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export interface ApiClientOptions {
  fetchFn?: FetchLike;
  sleep?: (ms: number) => Promise<void>;
  backoffBaseMs?: number;
  backoffCapMs?: number;
}

const RETRYABLE_STATUS = new Set([502, 503, 504]);

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class ApiClient {
  private readonly fetchFn: FetchLike;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly backoffBaseMs: number;
  private readonly backoffCapMs: number;

  constructor(
    readonly baseUrl: string = "",
    options: ApiClientOptions = {},
  ) {
    this.fetchFn =
      options.fetchFn ?? ((url, init) => globalThis.fetch(url, init));
    this.sleep = options.sleep ?? defaultSleep;
    this.backoffBaseMs = options.backoffBaseMs ?? 250;
    this.backoffCapMs = options.backoffCapMs ?? 4000;
  }

  async nextStimulus(session: string, worker: string): Promise<NextPayload> {
    const path =
      `/api/sessions/${encodeURIComponent(session)}/next` +
      `?worker=${encodeURIComponent(worker)}`;
    const body = await this.requestJson(path);
    if (body.status === "complete") {
      return { status: "complete", total: body.total, category: body.category };
    }
    return {
      status: "stimulus",
      stimulusId: body.stimulus_id,
      images: body.images,
      index: body.index,
      total: body.total,
      category: body.category,
    };
  }

  async submitLabel(
    session: string,
    worker: string,
    stimulusId: string,
    response: YesNo,
  ): Promise<LabelAck> {
    const path = `/api/sessions/${encodeURIComponent(session)}/labels`;
    const body = await this.requestJson(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        worker,
        stimulus_id: stimulusId,
        response,
      }),
    });
    return { progress: body.progress, qualified: body.qualified };
  }

  async template(session: string): Promise<TemplateView> {
    const path = `/api/sessions/${encodeURIComponent(session)}/template`;
    const resp = await this.fetchWithRetry(this.baseUrl + path);
    const body = await resp.json();
    // Not-ready is a normal state of the resource, not a failure.
    if (resp.status === 409 && body.status === "not_ready") {
      return { status: "not_ready", reason: body.reason };
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, errorMessage(body, resp.status));
    }
    return {
      status: "ready",
      values: body.values,
      trialsUsed: body.trials_used,
      glyph: body.glyph,
    };
  }

  private async requestJson(path: string, init?: RequestInit): Promise<any> {
    const resp = await this.fetchWithRetry(this.baseUrl + path, init);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, errorMessage(body, resp.status));
    }
    return body;
  }

  private async fetchWithRetry(
    url: string,
    init?: RequestInit,
  ): Promise<Response> {
    let delay = this.backoffBaseMs;
    for (;;) {
      let resp: Response | null = null;
      try {
        resp = await this.fetchFn(url, init);
      } catch {
        // Network failure; fall through to the backoff.
      }
      if (resp !== null && !RETRYABLE_STATUS.has(resp.status)) {
        return resp;
      }
      await this.sleep(delay);
      delay = Math.min(delay * 2, this.backoffCapMs);
    }
  }
}

function errorMessage(body: any, status: number): string {
  if (body && typeof body.error === "string") {
    return body.error;
  }
  return `request failed with HTTP ${status}`;
}
