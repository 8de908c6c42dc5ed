import type { PoolSizes, StatusPayload } from "./types.js";

export interface ProgressPoint {
  budget: number;
  entityF1: number | null;
  tokenF1: number | null;
  unlabeled: number;
}

/**
 * Accumulates one point per observed budget step. Every number comes from a
 * /status response; the dashboard never extrapolates.
 */
export class ProgressLog {
  readonly points: ProgressPoint[] = [];

  record(status: StatusPayload): void {
    const last = this.points[this.points.length - 1];
    if (last && last.budget === status.budget_used) {
      return;
    }
    this.points.push({
      budget: status.budget_used,
      entityF1: status.f1 ? status.f1.entity_f1 : null,
      tokenF1: status.f1 ? status.f1.token_f1 : null,
      unlabeled: status.pools.unlabeled,
    });
  }

  hasF1(): boolean {
    return this.points.some((p) => p.entityF1 !== null);
  }
}

function polyline(
  doc: Document,
  xs: number[],
  ys: number[],
  width: number,
  height: number,
  yMax: number,
): SVGElement {
  const line = doc.createElementNS("http://www.w3.org/2000/svg", "polyline");
  const xMax = Math.max(...xs, 1);
  const points = xs
    .map((x, i) => {
      const px = (x / xMax) * (width - 8) + 4;
      const py = height - 4 - (ys[i] / (yMax || 1)) * (height - 8);
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(" ");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "currentColor");
  return line;
}

export function renderF1Chart(doc: Document, log: ProgressLog): SVGElement {
  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 240 120");
  svg.setAttribute("class", "chart f1-chart");
  const scored = log.points.filter((p) => p.entityF1 !== null);
  if (scored.length) {
    svg.appendChild(
      polyline(
        doc,
        scored.map((p) => p.budget),
        scored.map((p) => p.entityF1 as number),
        240,
        120,
        1.0,
      ),
    );
  }
  return svg;
}

export function renderPoolChart(doc: Document, log: ProgressLog): SVGElement {
  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 240 120");
  svg.setAttribute("class", "chart pool-chart");
  if (log.points.length) {
    const most = Math.max(...log.points.map((p) => p.unlabeled));
    svg.appendChild(
      polyline(
        doc,
        log.points.map((p) => p.budget),
        log.points.map((p) => p.unlabeled),
        240,
        120,
        most,
      ),
    );
  }
  return svg;
}

function poolSummary(pools: PoolSizes): string {
  return (
    `unlabeled ${pools.unlabeled} · human ${pools.human} · ` +
    `weak ${pools.weak} · verified ${pools.verified}`
  );
}

/** Status panel: pools, budget, convergence rate, charts, stop summary. */
export function renderDashboard(
  doc: Document,
  status: StatusPayload,
  log: ProgressLog,
): HTMLElement {
  const panel = doc.createElement("aside");
  panel.className = "dashboard";

  const pools = doc.createElement("p");
  pools.className = "pools";
  pools.textContent = poolSummary(status.pools);
  panel.appendChild(pools);

  const budget = doc.createElement("p");
  budget.className = "budget";
  budget.textContent = `labels used ${status.budget_used} / ${status.budget_max}`;
  panel.appendChild(budget);

  if (status.low_conf_correct_rate !== null) {
    const rate = doc.createElement("p");
    rate.className = "low-rate";
    rate.textContent = `low-confidence correct rate ${(status.low_conf_correct_rate * 100).toFixed(0)}%`;
    panel.appendChild(rate);
  }

  if (log.hasF1()) {
    const caption = doc.createElement("h4");
    caption.textContent = "Held-out F1 vs labels";
    panel.appendChild(caption);
    panel.appendChild(renderF1Chart(doc, log));
  }

  const poolCaption = doc.createElement("h4");
  poolCaption.textContent = "Unlabeled pool";
  panel.appendChild(poolCaption);
  panel.appendChild(renderPoolChart(doc, log));

  if (status.stopped) {
    const done = doc.createElement("div");
    done.className = "stop-banner";
    done.textContent = `Session complete: ${status.stop_reason}`;
    panel.appendChild(done);
  }

  return panel;
}
