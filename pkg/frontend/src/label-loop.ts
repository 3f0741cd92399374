/** The worker-facing labeling loop.
 *
 * Strict fetch → display → respond → ack cycle: the yes/no controls
 * stay disabled from the moment an answer is taken until the next
 * stimulus is fully on screen, so double submission is impossible.
 * Answers are accepted from the buttons and from the 'y'/'n' keys.
 */

import { ApiClient, ApiError, StimulusView, YesNo } from "./api.js";

const KEY_TO_ANSWER: Record<string, YesNo> = { y: "yes", n: "no" };

export class LabelLoop {
  private yesBtn!: HTMLButtonElement;
  private noBtn!: HTMLButtonElement;
  private imgs: HTMLImageElement[] = [];
  private promptEl!: HTMLElement;
  private progressEl!: HTMLElement;
  private statusEl!: HTMLElement;
  private busy = true;
  private resolveAnswer: ((answer: YesNo) => void) | null = null;
  private readonly keyHandler = (event: KeyboardEvent) => {
    const answer = KEY_TO_ANSWER[event.key.toLowerCase()];
    if (answer !== undefined) {
      this.takeAnswer(answer);
    }
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly session: string,
    private readonly worker: string,
  ) {}

  /** Runs the session to completion; resolves once the summary (or a
   * fatal-error screen) is shown. */
  async start(): Promise<void> {
    this.renderSkeleton();
    const doc = this.root.ownerDocument;
    doc.addEventListener("keydown", this.keyHandler);
    try {
      for (;;) {
        this.setBusy(true, "Loading stimulus…");
        const next = await this.api.nextStimulus(this.session, this.worker);
        if (next.status === "complete") {
          this.renderComplete(next.total, next.category);
          return;
        }
        await this.showStimulus(next);
        this.setBusy(false, "");
        const answer = await this.waitForAnswer();
        this.setBusy(true, "Saving…");
        await this.api.submitLabel(
          this.session,
          this.worker,
          next.stimulusId,
          answer,
        );
      }
    } catch (err) {
      if (err instanceof ApiError) {
        this.renderFatal(err);
        return;
      }
      throw err;
    } finally {
      doc.removeEventListener("keydown", this.keyHandler);
    }
  }

  private renderSkeleton(): void {
    this.root.innerHTML = `
      <div class="labeler">
        <h1 data-testid="prompt"></h1>
        <div class="stimulus-row" data-testid="stimulus-row">
          <img class="stimulus-img" data-testid="stimulus-img-0" alt="stimulus, small scale">
          <img class="stimulus-img" data-testid="stimulus-img-1" alt="stimulus, medium scale">
          <img class="stimulus-img" data-testid="stimulus-img-2" alt="stimulus, large scale">
        </div>
        <div class="controls">
          <button type="button" data-testid="yes-btn" disabled>Yes <kbd>y</kbd></button>
          <button type="button" data-testid="no-btn" disabled>No <kbd>n</kbd></button>
        </div>
        <p class="progress" data-testid="progress"></p>
        <p class="status" role="status" data-testid="status"></p>
      </div>`;
    const byId = (id: string) =>
      this.root.querySelector(`[data-testid="${id}"]`) as HTMLElement;
    this.promptEl = byId("prompt");
    this.progressEl = byId("progress");
    this.statusEl = byId("status");
    this.yesBtn = byId("yes-btn") as HTMLButtonElement;
    this.noBtn = byId("no-btn") as HTMLButtonElement;
    this.imgs = [0, 1, 2].map(
      (i) => byId(`stimulus-img-${i}`) as HTMLImageElement,
    );
    this.yesBtn.addEventListener("click", () => this.takeAnswer("yes"));
    this.noBtn.addEventListener("click", () => this.takeAnswer("no"));
  }

  private async showStimulus(view: StimulusView): Promise<void> {
    this.promptEl.textContent = `Do you see a ${view.category}?`;
    this.progressEl.textContent = `Trial ${view.index + 1} of ${view.total}`;
    view.images.forEach((encoded, i) => {
      this.imgs[i].src = `data:image/png;base64,${encoded}`;
    });
    // All images must be decoded before input opens; environments
    // without HTMLImageElement.decode (or that reject data URIs) fall
    // through, the src assignments above having already taken effect.
    await Promise.all(
      this.imgs.map((img) =>
        typeof img.decode === "function"
          ? img.decode().catch(() => undefined)
          : Promise.resolve(),
      ),
    );
  }

  private waitForAnswer(): Promise<YesNo> {
    return new Promise((resolve) => {
      this.resolveAnswer = resolve;
    });
  }

  private takeAnswer(answer: YesNo): void {
    if (this.busy || this.resolveAnswer === null) {
      return;
    }
    const resolve = this.resolveAnswer;
    this.resolveAnswer = null;
    this.setBusy(true, "Saving…");
    resolve(answer);
  }

  private setBusy(busy: boolean, status: string): void {
    this.busy = busy;
    this.yesBtn.disabled = busy;
    this.noBtn.disabled = busy;
    this.statusEl.textContent = status;
  }

  private renderComplete(total: number, category: string): void {
    this.root.innerHTML = `
      <div class="labeler complete" data-testid="complete">
        <h1>Session complete</h1>
        <p data-testid="complete-summary"></p>
        <p>Thank you for labeling.</p>
      </div>`;
    const summary = this.root.querySelector(
      '[data-testid="complete-summary"]',
    ) as HTMLElement;
    summary.textContent =
      `You answered all ${total} trials for “${category}”.`;
  }

  private renderFatal(err: ApiError): void {
    this.root.innerHTML = `
      <div class="labeler error" data-testid="error">
        <h1>Something went wrong</h1>
        <p data-testid="error-message"></p>
      </div>`;
    const message = this.root.querySelector(
      '[data-testid="error-message"]',
    ) as HTMLElement;
    message.textContent = `HTTP ${err.httpStatus}: ${err.message}`;
  }
}
