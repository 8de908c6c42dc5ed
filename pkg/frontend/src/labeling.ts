import type { NextPayload, SchemaInfo } from "./types.js";

/** The label palette is exactly the session schema plus its separator. */
export function palette(schema: SchemaInfo): string[] {
  return [...schema.components, schema.separator];
}

/**
 * State of one labeling card: paint tokens with the armed palette label.
 * Submit stays disabled until every token has a label.
 */
export class LabelingCardState {
  readonly assigned: (string | null)[];
  armed: string | null = null;

  constructor(
    readonly query: NextPayload,
    readonly schema: SchemaInfo,
  ) {
    this.assigned = query.tokens.map(() => null);
  }

  arm(label: string): void {
    if (!palette(this.schema).includes(label)) {
      throw new Error(`label ${label} is not in the palette`);
    }
    this.armed = label;
  }

  paint(tokenIndex: number): void {
    if (tokenIndex < 0 || tokenIndex >= this.assigned.length) {
      throw new Error(`token index ${tokenIndex} out of range`);
    }
    if (this.armed !== null) {
      this.assigned[tokenIndex] = this.armed;
    }
  }

  clear(tokenIndex: number): void {
    this.assigned[tokenIndex] = null;
  }

  complete(): boolean {
    return this.assigned.every((label) => label !== null);
  }

  labels(): string[] {
    if (!this.complete()) {
      throw new Error("not every token has a label");
    }
    return this.assigned as string[];
  }
}

export interface LabelingCardHandlers {
  onSubmit(labels: string[]): void;
}

/**
 * Render the labeling card: structure-grouped token chips, the palette, and
 * a submit button gated on completeness. Tokens sharing a collapsed
 * structure group are bracketed so the annotator can see what propagation
 * will reuse.
 */
export function renderLabelingCard(
  doc: Document,
  state: LabelingCardState,
  handlers: LabelingCardHandlers,
): HTMLElement {
  const card = doc.createElement("section");
  card.className = "card labeling-card";
  card.dataset.mentionId = state.query.mention_id;

  const heading = doc.createElement("h2");
  heading.textContent = `Label: ${state.query.raw}`;
  card.appendChild(heading);

  const meta = doc.createElement("p");
  meta.className = "meta";
  meta.textContent =
    `informative score ${state.query.informative_score.toFixed(2)} · ` +
    `${state.query.representativeness} structural twins · ` +
    `label ${state.query.budget_used + 1} of ${state.query.budget_max}`;
  card.appendChild(meta);

  const tokenRow = doc.createElement("div");
  tokenRow.className = "token-row";
  for (const group of state.query.groups) {
    const bracket = doc.createElement("span");
    bracket.className = group.length > 1 ? "group bracketed" : "group";
    for (const index of group) {
      const chip = doc.createElement("button");
      chip.type = "button";
      chip.className = "token-chip";
      chip.dataset.index = String(index);
      const label = state.assigned[index];
      chip.textContent = label
        ? `${state.query.tokens[index]} [${label}]`
        : state.query.tokens[index];
      if (label) chip.classList.add("labeled");
      chip.addEventListener("click", () => {
        state.paint(index);
        rerender();
      });
      bracket.appendChild(chip);
    }
    tokenRow.appendChild(bracket);
  }
  card.appendChild(tokenRow);

  const paletteRow = doc.createElement("div");
  paletteRow.className = "palette";
  for (const label of palette(state.schema)) {
    const swatch = doc.createElement("button");
    swatch.type = "button";
    swatch.className = "palette-label";
    swatch.dataset.label = label;
    swatch.textContent = label;
    if (state.armed === label) swatch.classList.add("armed");
    swatch.addEventListener("click", () => {
      state.arm(label);
      rerender();
    });
    paletteRow.appendChild(swatch);
  }
  card.appendChild(paletteRow);

  const submit = doc.createElement("button");
  submit.type = "button";
  submit.className = "submit";
  submit.textContent = "Submit labels";
  submit.disabled = !state.complete();
  submit.addEventListener("click", () => {
    if (state.complete()) handlers.onSubmit(state.labels());
  });
  card.appendChild(submit);

  function rerender(): void {
    const next = renderLabelingCard(doc, state, handlers);
    card.replaceWith(next);
  }

  return card;
}

/** Sparkline of the per-epoch training loss shown in the iteration summary. */
export function lossSparkline(doc: Document, trace: number[]): SVGElement {
  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 120 32");
  svg.setAttribute("class", "sparkline");
  if (trace.length === 0) return svg;
  const max = Math.max(...trace, 1e-9);
  const min = Math.min(...trace);
  const span = max - min || 1;
  const points = trace
    .map((value, i) => {
      const x = trace.length === 1 ? 60 : (i / (trace.length - 1)) * 116 + 2;
      const y = 30 - ((value - min) / span) * 28;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  const line = doc.createElementNS("http://www.w3.org/2000/svg", "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "currentColor");
  svg.appendChild(line);
  return svg;
}
