/** Session-owner view: polls the live template estimate.
 *
 * Shows a placeholder until the session has at least one yes and one
 * no answer from a qualified worker, then the rendered glyph plus the
 * number of noise trials behind it.  Poll errors of any kind leave a
 * readable placeholder rather than crashing the page.
 */

import { ApiClient, ApiError } from "./api.js";

export interface TemplateMonitorOptions {
  intervalMs?: number;
}

export class TemplateMonitor {
  private readonly intervalMs: number;
  private viewEl!: HTMLElement;
  private stopped = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly session: string,
    options: TemplateMonitorOptions = {},
  ) {
    this.intervalMs = options.intervalMs ?? 2000;
    this.renderSkeleton();
  }

  /** One poll + render; callers may drive this directly instead of
   * using the timer loop. */
  async refresh(): Promise<void> {
    try {
      const view = await this.api.template(this.session);
      if (view.status === "not_ready") {
        this.renderPlaceholder(`Not ready yet — ${view.reason}`);
      } else {
        this.renderTemplate(view.glyph, view.trialsUsed);
      }
    } catch (err) {
      if (err instanceof ApiError) {
        this.renderPlaceholder(`Unavailable — ${err.message}`);
        return;
      }
      throw err;
    }
  }

  start(): void {
    const tick = async () => {
      if (this.stopped) {
        return;
      }
      await this.refresh();
      if (!this.stopped) {
        this.timer = setTimeout(tick, this.intervalMs);
      }
    };
    void tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private renderSkeleton(): void {
    this.root.innerHTML = `
      <div class="monitor">
        <h1 data-testid="monitor-title"></h1>
        <div data-testid="template-view"></div>
      </div>`;
    const title = this.root.querySelector(
      '[data-testid="monitor-title"]',
    ) as HTMLElement;
    title.textContent = `Live template — ${this.session}`;
    this.viewEl = this.root.querySelector(
      '[data-testid="template-view"]',
    ) as HTMLElement;
    this.renderPlaceholder("Waiting for the first poll…");
  }

  private renderPlaceholder(text: string): void {
    this.viewEl.innerHTML =
      `<p class="placeholder" data-testid="not-ready"></p>`;
    (this.viewEl.firstElementChild as HTMLElement).textContent = text;
  }

  private renderTemplate(glyphB64: string, trialsUsed: number): void {
    this.viewEl.innerHTML = `
      <img class="glyph" data-testid="glyph" alt="estimated template glyph">
      <p data-testid="trials-used"></p>`;
    const img = this.viewEl.querySelector(
      '[data-testid="glyph"]',
    ) as HTMLImageElement;
    img.src = `data:image/png;base64,${glyphB64}`;
    const label = this.viewEl.querySelector(
      '[data-testid="trials-used"]',
    ) as HTMLElement;
    label.textContent = `Estimated from ${trialsUsed} noise trials`;
  }
}
