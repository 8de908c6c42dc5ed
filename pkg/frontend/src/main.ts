import { ApiClient, ApiError } from "./api.js";
import { renderDashboard, ProgressLog } from "./dashboard.js";
import { LabelingCardState, lossSparkline, renderLabelingCard } from "./labeling.js";
import { renderVerificationView, VerificationState } from "./verify.js";
import type { LabelSummary, StatusPayload, Verdict } from "./types.js";

declare global {
  interface Window {
    NAMESTRUCT_BASE_URL?: string;
  }
}

/** Orchestrates the label -> verify -> repeat loop against one session. */
export class App {
  private status: StatusPayload | null = null;
  private log = new ProgressLog();
  private pollTimer: number | null = null;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
    private doc: Document = document,
  ) {}

  async start(params: { budget: number; k: number; p: number; q: number }) {
    this.status = await this.api.createSession(params);
    this.log.record(this.status);
    this.startPolling();
    await this.resync();
  }

  async resync(): Promise<void> {
    if (!this.status) return;
    try {
      this.status = await this.api.status(this.status.session_id);
      this.log.record(this.status);
      if (this.status.stopped) {
        this.renderStopped();
      } else if (this.status.status === "awaiting_verification") {
        await this.showVerification();
      } else {
        await this.showLabeling();
      }
    } catch (error) {
      this.renderError(error, () => this.resync());
    }
  }

  private startPolling(): void {
    if (this.pollTimer !== null) return;
    this.pollTimer = setInterval(async () => {
      if (!this.status) return;
      try {
        const status = await this.api.status(this.status.session_id);
        this.status = status;
        this.log.record(status);
        const panel = this.root.querySelector(".dashboard");
        if (panel) {
          panel.replaceWith(renderDashboard(this.doc, status, this.log));
        }
      } catch {
        // transient; the next poll retries
      }
    }, 2000) as unknown as number;
  }

  private frame(content: HTMLElement): void {
    this.root.replaceChildren(content);
    if (this.status) {
      this.root.appendChild(renderDashboard(this.doc, this.status, this.log));
    }
  }

  private async showLabeling(): Promise<void> {
    if (!this.status) return;
    try {
      const query = await this.api.next(this.status.session_id);
      const state = new LabelingCardState(query, this.status.schema);
      const card = renderLabelingCard(this.doc, state, {
        onSubmit: (labels) => void this.submitLabels(query.mention_id, labels),
      });
      this.frame(card);
    } catch (error) {
      this.handleFlowError(error);
    }
  }

  private async submitLabels(mentionId: string, labels: string[]): Promise<void> {
    if (!this.status) return;
    try {
      const summary = await this.api.submitLabel(
        this.status.session_id,
        mentionId,
        labels,
      );
      this.renderSummary(summary);
    } catch (error) {
      this.handleFlowError(error);
    }
  }

  private renderSummary(summary: LabelSummary): void {
    const box = this.doc.createElement("section");
    box.className = "card iteration-summary";
    const heading = this.doc.createElement("h2");
    heading.textContent = "Model updated";
    box.appendChild(heading);
    const weak = this.doc.createElement("p");
    weak.className = "weak-count";
    weak.textContent = `${summary.weak_labeled_count} structurally similar mentions labeled automatically`;
    box.appendChild(weak);
    const lossCaption = this.doc.createElement("p");
    lossCaption.textContent = `training loss over ${summary.loss_trace.length} epochs`;
    box.appendChild(lossCaption);
    box.appendChild(lossSparkline(this.doc, summary.loss_trace));
    const onward = this.doc.createElement("button");
    onward.type = "button";
    onward.className = "continue";
    onward.textContent = "Verify machine labels";
    onward.addEventListener("click", () => void this.showVerification());
    box.appendChild(onward);
    this.frame(box);
  }

  private async showVerification(): Promise<void> {
    if (!this.status) return;
    try {
      const batch = await this.api.verificationBatch(this.status.session_id);
      const state = new VerificationState(batch);
      if (state.items.length === 0) {
        await this.submitVerdicts({});
        return;
      }
      const view = renderVerificationView(this.doc, state, {
        onSubmit: (verdicts) => void this.submitVerdicts(verdicts),
      });
      this.frame(view);
    } catch (error) {
      this.handleFlowError(error);
    }
  }

  private async submitVerdicts(verdicts: Record<string, Verdict>): Promise<void> {
    if (!this.status) return;
    try {
      const result = await this.api.submitFeedback(
        this.status.session_id,
        verdicts,
      );
      if (result.stopped) {
        this.status = await this.api.status(this.status.session_id);
        this.log.record(this.status);
        this.renderStopped();
      } else {
        await this.resync();
      }
    } catch (error) {
      this.handleFlowError(error);
    }
  }

  private renderStopped(): void {
    const banner = this.doc.createElement("section");
    banner.className = "card stop-banner";
    const heading = this.doc.createElement("h2");
    heading.textContent = "Session complete";
    banner.appendChild(heading);
    const reason = this.doc.createElement("p");
    reason.textContent = `stop reason: ${this.status?.stop_reason ?? "unknown"}`;
    banner.appendChild(reason);
    this.frame(banner);
  }

  /** 409 means our view of the loop phase is stale: resync, don't lose work. */
  private handleFlowError(error: unknown): void {
    if (error instanceof ApiError && error.status === 409) {
      const banner = this.doc.createElement("div");
      banner.className = "banner resync-banner";
      banner.textContent = "Session state changed elsewhere; refreshing.";
      this.root.prepend(banner);
      void this.resync();
      return;
    }
    this.renderError(error, () => this.resync());
  }

  private renderError(error: unknown, retry: () => void): void {
    const banner = this.doc.createElement("div");
    banner.className = "banner error-banner";
    const message =
      error instanceof Error ? error.message : "network request failed";
    banner.textContent = `Request failed: ${message}. `;
    const button = this.doc.createElement("button");
    button.type = "button";
    button.textContent = "Retry";
    button.addEventListener("click", retry);
    banner.appendChild(button);
    this.root.prepend(banner);
  }
}

function boot(): void {
  const root = document.getElementById("app");
  const form = document.getElementById("session-form") as HTMLFormElement | null;
  if (!root || !form) return;
  const api = new ApiClient(window.NAMESTRUCT_BASE_URL ?? "");
  const app = new App(api, root);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    void app.start({
      budget: Number(data.get("budget") ?? 20),
      k: Number(data.get("k") ?? 50),
      p: Number(data.get("p") ?? 15),
      q: Number(data.get("q") ?? 15),
    });
    form.classList.add("hidden");
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
