/**
 * Single-page annotation client.
 *
 * Three screens: predicate selection (sorted by remaining queue depth so
 * rare classes drain first), the annotation screen (one fixed predicate,
 * subject and object highlighted in two colors, one key per decision),
 * and the end-of-queue screen with campaign statistics.
 *
 * The page is stateless across reloads except for the session id kept in
 * sessionStorage; everything else is refetched from the service.
 */

import { ServiceClient } from "./api.js";
import type { Decision, ProposalPayload, SessionInfo } from "./api.js";
import { AnnotationFlow } from "./flow.js";
import { OBJECT_COLOR, SUBJECT_COLOR, decodeRle, paintMask } from "./rle.js";

const SESSION_KEY = "predkit-session";

/** One key per action; mirrored on the button labels. */
export const KEY_BINDINGS: Record<string, Decision> = {
  "1": "positive",
  "2": "negative",
  "3": "no_relation",
  "4": "skip",
  q: "faulty_subject",
  w: "faulty_object",
};

const DECISION_LABELS: Record<Decision, string> = {
  positive: "Correct [1]",
  negative: "Incorrect [2]",
  no_relation: "No relation [3]",
  skip: "Skip [4]",
  faulty_subject: "Subject mask faulty [Q]",
  faulty_object: "Object mask faulty [W]",
};

const NO_RELATION_HINT =
  "No relation marks every predicate as negative for this pair. " +
  "Press again to confirm.";

export interface AppOptions {
  client: ServiceClient;
  /** session persistence; defaults to window.sessionStorage */
  storage?: Storage;
  retryDelayMs?: number;
}

export class App {
  readonly client: ServiceClient;
  readonly storage: Storage;
  private readonly retryDelayMs: number;

  screen: "setup" | "annotate" | "done" = "setup";
  flow: AnnotationFlow | null = null;
  /** resolves when the initial screen finished rendering */
  booted: Promise<void>;
  /** last button-initiated action; tests await this */
  pending: Promise<unknown> = Promise.resolve();

  private session: SessionInfo | null = null;
  private buttonsEnabled = false;
  private noRelationArmed = false;
  private noRelationSeen = false;

  constructor(private readonly root: HTMLElement, options: AppOptions) {
    this.client = options.client;
    this.storage = options.storage ?? window.sessionStorage;
    this.retryDelayMs = options.retryDelayMs ?? 1500;
    document.addEventListener("keydown", (event) => this.onKeyDown(event));
    this.booted = this.boot();
  }

  private async boot(): Promise<void> {
    const stored = this.storage.getItem(SESSION_KEY);
    if (stored) {
      try {
        this.session = JSON.parse(stored) as SessionInfo;
        await this.startAnnotating();
        return;
      } catch {
        this.storage.removeItem(SESSION_KEY);
      }
    }
    await this.renderSetup();
  }

  // -- setup screen ---------------------------------------------------------

  private async renderSetup(): Promise<void> {
    this.screen = "setup";
    this.flow = null;
    this.root.innerHTML = `
      <div class="screen screen-setup">
        <h1>Relation annotation</h1>
        <label>Annotator id
          <input type="text" class="annotator-input" placeholder="who is annotating?">
        </label>
        <p class="setup-hint">Pick a predicate; rarest queues first.</p>
        <ul class="predicate-list"></ul>
        <div class="status" role="status"></div>
      </div>`;
    const list = this.query(".predicate-list");
    try {
      const predicates = await this.client.predicates();
      predicates.sort((a, b) => b.queue_depth - a.queue_depth);
      for (const predicate of predicates) {
        const item = document.createElement("li");
        const button = document.createElement("button");
        button.className = "predicate-choice";
        button.dataset.predicateId = String(predicate.predicate_id);
        button.textContent = `${predicate.display_name} (${predicate.queue_depth} left)`;
        button.addEventListener("click", () => {
          this.pending = this.openSession(predicate.predicate_id);
        });
        item.appendChild(button);
        list.appendChild(item);
      }
    } catch (error) {
      this.setStatus(`could not load predicates: ${String(error)}`, "error");
    }
  }

  private async openSession(predicateId: number): Promise<void> {
    const input = this.query<HTMLInputElement>(".annotator-input");
    const annotator = input.value.trim() || "anonymous";
    try {
      this.session = await this.client.openSession(annotator, predicateId);
    } catch (error) {
      this.setStatus(`could not open session: ${String(error)}`, "error");
      return;
    }
    this.storage.setItem(SESSION_KEY, JSON.stringify(this.session));
    await this.startAnnotating();
  }

  // -- annotation screen ------------------------------------------------------

  private async startAnnotating(): Promise<void> {
    const session = this.session;
    if (!session) {
      await this.renderSetup();
      return;
    }
    this.screen = "annotate";
    this.root.innerHTML = `
      <div class="screen screen-annotate">
        <header class="annotate-header">
          <h1 class="predicate-name"></h1>
          <div class="progress" role="status"></div>
          <div class="status" role="status"></div>
        </header>
        <div class="image-stage">
          <img class="stage-image" alt="proposal image">
          <canvas class="stage-overlay"></canvas>
        </div>
        <div class="legend">
          <span class="legend-subject">subject</span>
          <span class="legend-object">object</span>
        </div>
        <div class="decision-bar"></div>
        <div class="faulty-bar"></div>
      </div>`;
    this.query(".predicate-name").textContent = session.display_name;
    const decisionBar = this.query(".decision-bar");
    const faultyBar = this.query(".faulty-bar");
    const order: Decision[] = ["positive", "negative", "no_relation", "skip"];
    for (const decision of order) {
      decisionBar.appendChild(this.decisionButton(decision));
    }
    for (const decision of ["faulty_subject", "faulty_object"] as Decision[]) {
      faultyBar.appendChild(this.decisionButton(decision));
    }
    this.enableButtons(false);

    this.flow = new AnnotationFlow(
      this.client,
      session.session_id,
      {
        onProposal: (proposal, progress) => this.renderProposal(proposal, progress),
        onDone: () => this.renderDone(),
        onStatus: (message, kind) => this.setStatus(message, kind),
      },
      this.retryDelayMs,
    );
    await this.flow.start();
  }

  private decisionButton(decision: Decision): HTMLButtonElement {
    const button = document.createElement("button");
    button.className = `decision decision-${decision}`;
    button.dataset.decision = decision;
    button.disabled = true;
    button.textContent = DECISION_LABELS[decision];
    button.addEventListener("click", () => {
      this.pending = this.decide(decision);
    });
    return button;
  }

  private async renderProposal(proposal: ProposalPayload, progress: { done: number; remaining: number }): Promise<void> {
    this.enableButtons(false);
    this.noRelationArmed = false;
    this.setStatus("", "info");
    this.query(".progress").textContent =
      `${progress.remaining} left in queue, ${progress.done} done this session`;

    const image = this.query<HTMLImageElement>(".stage-image");
    const canvas = this.query<HTMLCanvasElement>(".stage-overlay");
    canvas.width = proposal.width;
    canvas.height = proposal.height;
    canvas.getContext?.("2d")?.clearRect(0, 0, canvas.width, canvas.height);
    image.src = proposal.image_url;
    if (image.decode) {
      try {
        await image.decode();
      } catch {
        // image may be unavailable (or jsdom); overlays still gate the buttons
      }
    }

    // both overlays must be decoded (and painted where a canvas exists)
    // before the decision buttons activate
    for (const [entity, color] of [
      [proposal.subject, SUBJECT_COLOR],
      [proposal.object, OBJECT_COLOR],
    ] as const) {
      if (entity.mask) {
        paintMask(canvas, entity.mask, decodeRle(entity.mask), color);
      }
    }
    this.query(".legend-subject").textContent = `subject: ${proposal.subject.category}`;
    this.query(".legend-object").textContent = `object: ${proposal.object.category}`;
    this.enableButtons(true);
  }

  async decide(decision: Decision): Promise<void> {
    if (this.screen !== "annotate" || !this.flow || !this.buttonsEnabled) {
      return;
    }
    if (decision === "no_relation" && !this.noRelationSeen) {
      if (!this.noRelationArmed) {
        this.noRelationArmed = true;
        this.setStatus(NO_RELATION_HINT, "info");
        return;
      }
      this.noRelationSeen = true;
    }
    if (decision !== "no_relation") {
      this.noRelationArmed = false;
    }
    const result = await this.flow.decide(decision);
    if (result === "ignored") {
      return;
    }
  }

  // -- end-of-queue screen ----------------------------------------------------

  private async renderDone(): Promise<void> {
    this.screen = "done";
    this.enableButtons(false);
    this.root.innerHTML = `
      <div class="screen screen-done">
        <h1>Queue exhausted</h1>
        <p>No proposals left for this predicate. Campaign so far:</p>
        <table class="stats-table">
          <thead><tr><th>predicate</th><th>decided</th><th>positive ratio</th><th>left</th></tr></thead>
          <tbody></tbody>
        </table>
        <button class="restart">Pick another predicate</button>
      </div>`;
    this.query(".restart").addEventListener("click", () => {
      this.storage.removeItem(SESSION_KEY);
      this.session = null;
      this.pending = this.renderSetup();
    });
    try {
      const stats = (await this.client.stats()) as {
        predicates: Record<string, Record<string, unknown>>;
      };
      const body = this.query(".stats-table tbody");
      for (const entry of Object.values(stats.predicates)) {
        const row = document.createElement("tr");
        const ratio = entry.positive_ratio;
        row.innerHTML =
          `<td>${entry.predicate}</td><td>${entry.terminal}</td>` +
          `<td>${typeof ratio === "number" ? (100 * ratio).toFixed(1) + "%" : "-"}</td>` +
          `<td>${entry.queue_depth}</td>`;
        body.appendChild(row);
      }
    } catch (error) {
      this.setStatus(`could not load stats: ${String(error)}`, "error");
    }
  }

  // -- shared helpers -----------------------------------------------------------

  private onKeyDown(event: KeyboardEvent): void {
    if (this.screen !== "annotate") {
      return;
    }
    const target = event.target as HTMLElement | null;
    if (target && target.tagName === "INPUT") {
      return;
    }
    const decision = KEY_BINDINGS[event.key];
    if (decision) {
      event.preventDefault();
      this.pending = this.decide(decision);
    }
  }

  private enableButtons(enabled: boolean): void {
    this.buttonsEnabled = enabled;
    for (const button of Array.from(this.root.querySelectorAll<HTMLButtonElement>("button.decision"))) {
      button.disabled = !enabled;
    }
  }

  private setStatus(message: string, kind: "info" | "error"): void {
    const status = this.root.querySelector<HTMLElement>(".status");
    if (status) {
      status.textContent = message;
      status.dataset.kind = kind;
    }
  }

  private query<T extends Element = HTMLElement>(selector: string): T {
    const element = this.root.querySelector<T>(selector);
    if (!element) {
      throw new Error(`missing element: ${selector}`);
    }
    return element;
  }
}

export function mountApp(root: HTMLElement, options: AppOptions): App {
  return new App(root, options);
}
