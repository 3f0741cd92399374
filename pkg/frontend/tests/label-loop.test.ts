/** Label loop: strict cycle, disabled controls, keyboard input, retry. */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { LabelLoop } from "../src/label-loop.js";
import {
  byTestId,
  controlsEnabled,
  freshRoot,
  pressKey,
  shownTrialIndex,
  waitFor,
} from "./helpers/dom.js";
import { MockSessionServer } from "./helpers/mock-session.js";

function loopFor(mock: MockSessionServer, worker = "w1") {
  const root = freshRoot();
  const api = new ApiClient("", {
    fetchFn: mock.fetchFn,
    sleep: () => Promise.resolve(),
  });
  const loop = new LabelLoop(root, api, mock.sessionId, worker);
  return { root, loop, done: loop.start() };
}

describe("fetch → display → respond → ack cycle", () => {
  it("shows prompt, three images, and progress before accepting input", async () => {
    const mock = new MockSessionServer("s1", "dax", 2);
    const { done } = loopFor(mock);
    await waitFor(controlsEnabled);

    expect(byTestId("prompt")?.textContent).toBe("Do you see a dax?");
    expect(byTestId("progress")?.textContent).toBe("Trial 1 of 2");
    for (let i = 0; i < 3; i += 1) {
      const img = byTestId(`stimulus-img-${i}`) as HTMLImageElement;
      expect(img.src.startsWith("data:image/png;base64,")).toBe(true);
    }

    (byTestId("yes-btn") as HTMLButtonElement).click();
    await waitFor(controlsEnabled);
    expect(byTestId("progress")?.textContent).toBe("Trial 2 of 2");
    (byTestId("no-btn") as HTMLButtonElement).click();
    await done;

    expect(mock.log.map((e) => e.response)).toEqual(["yes", "no"]);
    expect(byTestId("complete")).not.toBeNull();
    expect(byTestId("complete-summary")?.textContent).toContain("2 trials");
  });

  it("keeps controls disabled until the ack returns", async () => {
    const mock = new MockSessionServer("s1", "dax", 1);
    let release!: () => void;
    mock.labelGate = new Promise((resolve) => {
      release = resolve;
    });
    const { done } = loopFor(mock);
    await waitFor(controlsEnabled);

    (byTestId("yes-btn") as HTMLButtonElement).click();
    expect(controlsEnabled()).toBe(false);
    // The ack is still pending; nothing reached the log yet.
    expect(mock.log.length).toBe(0);
    release();
    await done;
    expect(mock.log.length).toBe(1);
    expect(byTestId("complete")).not.toBeNull();
  });

  it("makes double submission impossible", async () => {
    const mock = new MockSessionServer("s1", "dax", 2);
    const { done } = loopFor(mock);
    await waitFor(controlsEnabled);

    const yes = byTestId("yes-btn") as HTMLButtonElement;
    yes.click();
    yes.click();
    pressKey("y");
    pressKey("n");
    await waitFor(controlsEnabled);

    // Exactly one label for trial 0; the burst did not leak forward.
    expect(mock.log).toHaveLength(1);
    expect(mock.log[0]).toMatchObject({ index: 0, response: "yes" });
    expect(shownTrialIndex()).toBe(1);
    pressKey("n");
    await done;
    expect(mock.log).toHaveLength(2);
  });
});

describe("keyboard input", () => {
  it("maps y/n keys to yes/no and ignores other keys", async () => {
    const mock = new MockSessionServer("s1", "dax", 3);
    const { done } = loopFor(mock);

    await waitFor(controlsEnabled);
    pressKey("x");
    pressKey("Enter");
    expect(mock.log).toHaveLength(0);
    pressKey("y");
    await waitFor(() => controlsEnabled() && shownTrialIndex() === 1);
    pressKey("N"); // case-insensitive
    await waitFor(() => controlsEnabled() && shownTrialIndex() === 2);
    pressKey("n");
    await done;

    expect(mock.log.map((e) => e.response)).toEqual(["yes", "no", "no"]);
    expect(byTestId("complete")).not.toBeNull();
  });

  it("stops listening after completion", async () => {
    const mock = new MockSessionServer("s1", "dax", 1);
    const { done } = loopFor(mock);
    await waitFor(controlsEnabled);
    pressKey("y");
    await done;
    pressKey("y");
    pressKey("n");
    expect(mock.log).toHaveLength(1);
  });
});

describe("resilience", () => {
  it("retries a failed fetch and never skips a stimulus", async () => {
    const mock = new MockSessionServer("s1", "dax", 1);
    mock.failNextFetches = 2;
    const { done } = loopFor(mock);
    await waitFor(controlsEnabled);
    expect(shownTrialIndex()).toBe(0);
    pressKey("y");
    await done;
    expect(mock.log).toEqual([
      { worker: "w1", index: 0, stimulusId: "000000:w1", response: "yes" },
    ]);
  });

  it("retries a failed label submit without duplicating it", async () => {
    const mock = new MockSessionServer("s1", "dax", 1);
    const { done } = loopFor(mock);
    await waitFor(controlsEnabled);
    mock.failNextFetches = 1;
    pressKey("n");
    await done;
    expect(mock.log.map((e) => e.response)).toEqual(["no"]);
  });

  it("resumes at the outstanding stimulus after a refresh", async () => {
    const mock = new MockSessionServer("s1", "dax", 5);
    const first = loopFor(mock);
    await waitFor(controlsEnabled);
    pressKey("y");
    await waitFor(() => controlsEnabled() && shownTrialIndex() === 1);

    // A reload tears down the page; the server still holds progress.
    const second = loopFor(mock);
    await waitFor(controlsEnabled);
    expect(shownTrialIndex()).toBe(1);
    void first.done;
    void second.done;
  });

  it("renders a readable screen on a contract error", async () => {
    const mock = new MockSessionServer("s1", "dax", 1);
    const root = freshRoot();
    const api = new ApiClient("", {
      fetchFn: mock.fetchFn,
      sleep: () => Promise.resolve(),
    });
    const loop = new LabelLoop(root, api, "missing-session", "w1");
    await loop.start();
    expect(byTestId("error")).not.toBeNull();
    expect(byTestId("error-message")?.textContent).toContain("404");
  });
});
