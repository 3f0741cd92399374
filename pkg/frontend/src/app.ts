/** Entry-point wiring: URL query parameters pick the view.
 *
 *   ?session=S&worker=W   labeling loop for worker W
 *   ?session=S            template monitor for session S
 *   (nothing)             usage help
 *
 * An explicit ?view=label or ?view=monitor overrides the default.
 */

import { ApiClient } from "./api.js";
import { LabelLoop } from "./label-loop.js";
import { TemplateMonitor } from "./template-monitor.js";

export interface AppHandles {
  loop?: LabelLoop;
  monitor?: TemplateMonitor;
  /** Resolves when the chosen view has finished starting up (for the
   * label loop: when the session is complete). */
  done: Promise<void>;
}

export function initApp(
  root: HTMLElement,
  search: string,
  api: ApiClient = new ApiClient(),
): AppHandles {
  const params = new URLSearchParams(search);
  const session = params.get("session");
  const worker = params.get("worker");
  const view =
    params.get("view") ?? (worker !== null ? "label" : "monitor");

  if (view === "label" && session !== null && worker !== null) {
    const loop = new LabelLoop(root, api, session, worker);
    return { loop, done: loop.start() };
  }
  if (view === "monitor" && session !== null) {
    const monitor = new TemplateMonitor(root, api, session);
    monitor.start();
    return { monitor, done: Promise.resolve() };
  }
  renderHelp(root);
  return { done: Promise.resolve() };
}

function renderHelp(root: HTMLElement): void {
  root.innerHTML = `
    <div class="help" data-testid="help">
      <h1>Noise labeling</h1>
      <p>Open this page with query parameters:</p>
      <ul>
        <li><code>?session=SESSION&amp;worker=WORKER</code> — label stimuli</li>
        <li><code>?session=SESSION</code> — watch the live template</li>
      </ul>
    </div>`;
}
