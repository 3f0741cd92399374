/** In-memory double of the session HTTP API for unit tests.
 *
 * Exposes a fetch-compatible function so tests exercise the real
 * `ApiClient` request path.  Mirrors the wire contract: idempotent
 * `next`, outstanding-index validation on `labels`, duplicate submits
 * acknowledged without effect, and the 409 not-ready template state.
 */

import type { FetchLike } from "../../src/api.js";

/** 1x1 transparent PNG. */
export const TINY_PNG =
  "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8z8" +
  "BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg==";

export interface MockLogEntry {
  worker: string;
  index: number;
  stimulusId: string;
  response: string;
}

export type MockTemplateState =
  | { status: "not_ready"; reason: string }
  | { status: "ready"; values: number[]; trials_used: number; glyph: string };

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export class MockSessionServer {
  readonly log: MockLogEntry[] = [];
  template: MockTemplateState = {
    status: "not_ready",
    reason: "no labels yet",
  };
  /** Reject this many upcoming fetches with a network error. */
  failNextFetches = 0;
  /** Answer this many upcoming fetches with HTTP 503. */
  gatewayErrors = 0;
  /** Pending label acks are held until this resolves (when set). */
  labelGate: Promise<void> | null = null;

  private labeled = new Map<string, number>();

  constructor(
    readonly sessionId: string,
    readonly category: string,
    readonly total: number,
  ) {}

  labeledCount(worker: string): number {
    return this.labeled.get(worker) ?? 0;
  }

  /** Pre-seed progress, as if the worker answered earlier. */
  setLabeled(worker: string, count: number): void {
    this.labeled.set(worker, count);
  }

  readonly fetchFn: FetchLike = async (url, init) => {
    if (this.failNextFetches > 0) {
      this.failNextFetches -= 1;
      throw new TypeError("network failure (mock)");
    }
    if (this.gatewayErrors > 0) {
      this.gatewayErrors -= 1;
      return jsonResponse(503, { error: "gateway (mock)" });
    }
    const parsed = new URL(url, "http://mock.invalid");
    const method = (init?.method ?? "GET").toUpperCase();
    const match = parsed.pathname.match(
      /^\/api\/sessions\/([^/]+)(?:\/(next|labels|template))?$/,
    );
    if (match === null || decodeURIComponent(match[1]) !== this.sessionId) {
      return jsonResponse(404, { error: "no such session (mock)" });
    }
    const route = match[2];
    if (route === "next" && method === "GET") {
      return this.handleNext(parsed.searchParams.get("worker") ?? "");
    }
    if (route === "labels" && method === "POST") {
      return this.handleLabel(JSON.parse(String(init?.body)));
    }
    if (route === "template" && method === "GET") {
      if (this.template.status === "not_ready") {
        return jsonResponse(409, this.template);
      }
      return jsonResponse(200, this.template);
    }
    return jsonResponse(404, { error: `no route ${method} ${parsed.pathname}` });
  };

  private handleNext(worker: string): Response {
    if (worker === "") {
      return jsonResponse(400, { error: "worker id must be nonempty" });
    }
    const index = this.labeledCount(worker);
    if (index >= this.total) {
      return jsonResponse(200, {
        status: "complete",
        total: this.total,
        category: this.category,
      });
    }
    return jsonResponse(200, {
      stimulus_id: stimulusId(worker, index),
      images: [TINY_PNG, TINY_PNG, TINY_PNG],
      index,
      total: this.total,
      category: this.category,
    });
  }

  private async handleLabel(body: {
    worker?: unknown;
    stimulus_id?: unknown;
    response?: unknown;
  }): Promise<Response> {
    if (this.labelGate !== null) {
      await this.labelGate;
    }
    const { worker, stimulus_id, response } = body;
    if (
      typeof worker !== "string" ||
      typeof stimulus_id !== "string" ||
      typeof response !== "string"
    ) {
      return jsonResponse(400, { error: "label body needs string fields" });
    }
    const index = this.labeledCount(worker);
    if (stimulus_id === stimulusId(worker, index) && index < this.total) {
      this.log.push({ worker, index, stimulusId: stimulus_id, response });
      this.labeled.set(worker, index + 1);
    } else if (!isPastStimulus(stimulus_id, worker, index)) {
      return jsonResponse(409, {
        error: `stimulus ${stimulus_id} is not outstanding`,
      });
    }
    return jsonResponse(200, {
      progress: { labeled: this.labeledCount(worker), total: this.total },
      qualified: true,
    });
  }
}

function stimulusId(worker: string, index: number): string {
  return `${String(index).padStart(6, "0")}:${worker}`;
}

function isPastStimulus(
  stimulusId: string,
  worker: string,
  labeled: number,
): boolean {
  const head = stimulusId.split(":", 1)[0];
  return (
    stimulusId.endsWith(`:${worker}`) &&
    /^\d{6}$/.test(head) &&
    Number(head) < labeled
  );
}
