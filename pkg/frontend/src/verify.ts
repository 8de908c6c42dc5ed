import type { Verdict, VerificationItem, VerifyPayload } from "./types.js";

/**
 * Verdict collection for one verification round. Submit is allowed only
 * when every card (both buckets) has a verdict.
 */
export class VerificationState {
  readonly items: VerificationItem[];
  private verdicts = new Map<string, Verdict>();

  constructor(batch: VerifyPayload) {
    this.items = [...batch.high, ...batch.low];
  }

  setVerdict(mentionId: string, verdict: Verdict): void {
    if (!this.items.some((it) => it.mention_id === mentionId)) {
      throw new Error(`mention ${mentionId} is not in this round`);
    }
    this.verdicts.set(mentionId, verdict);
  }

  verdictFor(mentionId: string): Verdict | undefined {
    return this.verdicts.get(mentionId);
  }

  complete(): boolean {
    return this.items.length > 0 && this.verdicts.size === this.items.length;
  }

  collect(): Record<string, Verdict> {
    return Object.fromEntries(this.verdicts);
  }
}

export interface VerifyHandlers {
  onSubmit(verdicts: Record<string, Verdict>): void;
}

function renderItem(
  doc: Document,
  state: VerificationState,
  item: VerificationItem,
  rerender: () => void,
): HTMLElement {
  const card = doc.createElement("article");
  card.className = "card verification-card";
  card.dataset.mentionId = item.mention_id;
  card.dataset.bucket = item.bucket;

  const line = doc.createElement("p");
  line.className = "machine-labels";
  line.textContent = item.labels.join(" / ");
  card.appendChild(line);

  const badge = doc.createElement("span");
  badge.className = "confidence-badge";
  badge.textContent = `conf ${(item.confidence * 100).toFixed(1)}%`;
  card.appendChild(badge);

  const tag = doc.createElement("span");
  tag.className = `bucket-tag bucket-${item.bucket}`;
  tag.textContent = item.bucket;
  card.appendChild(tag);

  for (const verdict of ["correct", "incorrect"] as Verdict[]) {
    const button = doc.createElement("button");
    button.type = "button";
    button.className = `verdict verdict-${verdict}`;
    button.textContent = verdict;
    if (state.verdictFor(item.mention_id) === verdict) {
      button.classList.add("chosen");
    }
    button.addEventListener("click", () => {
      state.setVerdict(item.mention_id, verdict);
      rerender();
    });
    card.appendChild(button);
  }
  return card;
}

/** Render both buckets separately plus a completeness-gated submit button. */
export function renderVerificationView(
  doc: Document,
  state: VerificationState,
  handlers: VerifyHandlers,
): HTMLElement {
  const view = doc.createElement("section");
  view.className = "verification-view";

  function rerender(): void {
    view.replaceWith(renderVerificationView(doc, state, handlers));
  }

  for (const bucket of ["high", "low"] as const) {
    const column = doc.createElement("div");
    column.className = `bucket-column bucket-column-${bucket}`;
    const heading = doc.createElement("h3");
    heading.textContent =
      bucket === "high" ? "High confidence" : "Low confidence";
    column.appendChild(heading);
    for (const item of state.items.filter((it) => it.bucket === bucket)) {
      column.appendChild(renderItem(doc, state, item, rerender));
    }
    view.appendChild(column);
  }

  const submit = doc.createElement("button");
  submit.type = "button";
  submit.className = "submit";
  submit.textContent = "Submit verdicts";
  submit.disabled = !state.complete();
  submit.addEventListener("click", () => {
    if (state.complete()) handlers.onSubmit(state.collect());
  });
  view.appendChild(submit);

  return view;
}
