/** HTML renderers: query cards for the pending batch and the progress panel.
 *
 * Renderers are pure string builders so they can be exercised without a DOM.
 */

import type { PendingInstance, SessionStatus } from "./api.js";
import type { LabelingState, UiState } from "./state.js";

const FEATURE_ORDER = [
  "datetime", "latitude", "longitude", "pressure", "temperature", "salinity",
];

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatValue(name: string, value: number): string {
  if (name === "datetime") {
    return new Date(value * 1000).toISOString().replace(".000Z", "Z");
  }
  return value.toFixed(4);
}

function contextSvg(instance: PendingInstance): string {
  const rows = instance.context;
  if (rows.length < 2) return "";
  const width = 260;
  const height = 72;
  const series: Array<[keyof typeof palette, (r: (typeof rows)[number]) => number]> = [
    ["temperature", (r) => r.temperature],
    ["salinity", (r) => r.salinity],
    ["pressure", (r) => r.pressure],
  ];
  const palette = { temperature: "#d9534f", salinity: "#5bc0de", pressure: "#5e5e5e" };
  const parts: string[] = [];
  series.forEach(([name, pick], band) => {
    const values = rows.map(pick);
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    const span = hi - lo || 1;
    const y0 = band * (height / 3);
    const points = values
      .map((v, i) => {
        const x = (i / (rows.length - 1)) * width;
        const y = y0 + (height / 3 - 4) * (1 - (v - lo) / span) + 2;
        return `${x.toFixed(1)},${y.toFixed(1)}`;
      })
      .join(" ");
    parts.push(
      `<polyline fill="none" stroke="${palette[name]}" stroke-width="1.5" points="${points}"></polyline>`,
    );
  });
  const queriedAt = rows.findIndex((r) => r.is_queried);
  if (queriedAt >= 0) {
    const x = ((queriedAt / (rows.length - 1)) * width).toFixed(1);
    parts.push(
      `<line x1="${x}" y1="0" x2="${x}" y2="${height}" stroke="#f0ad4e" stroke-dasharray="3,2"></line>`,
    );
  }
  return `<svg class="context" viewBox="0 0 ${width} ${height}" role="img" aria-label="profile context">${parts.join("")}</svg>`;
}

export function renderCard(
  instance: PendingInstance,
  judgment: 0 | 1 | undefined,
  disabled: boolean,
): string {
  const rows = FEATURE_ORDER.map((name) => {
    const value = instance.features[name];
    const unit = instance.units[name] ?? "";
    const shown = value === undefined ? "?" : formatValue(name, value);
    return `<tr><th>${escapeHtml(name)}</th><td>${escapeHtml(shown)}</td><td class="unit">${escapeHtml(unit)}</td></tr>`;
  }).join("");
  const model =
    instance.model_p1 === null
      ? "no model yet"
      : `P(bad) ${instance.model_p1.toFixed(3)} · entropy ${instance.model_entropy?.toFixed(3) ?? "?"}`;
  const pressed = (label: 0 | 1) => (judgment === label ? " pressed" : "");
  const off = disabled ? " disabled" : "";
  return `
<article class="card" data-index="${instance.index}">
  <header>record #${instance.index} <span class="model">${escapeHtml(model)}</span></header>
  <table>${rows}</table>
  ${contextSvg(instance)}
  <footer>
    <button class="judge good${pressed(0)}" data-index="${instance.index}" data-label="0"${off}>good</button>
    <button class="judge bad${pressed(1)}" data-index="${instance.index}" data-label="1"${off}>bad</button>
  </footer>
</article>`;
}

export function renderPending(state: LabelingState): string {
  const disabled = state.submitting;
  const cards = state.batch.instances
    .map((instance) => renderCard(instance, state.judgments[instance.index], disabled))
    .join("\n");
  const judged = state.batch.instances.filter(
    (i) => state.judgments[i.index] !== undefined,
  ).length;
  const submitOff = disabled || judged < state.batch.instances.length ? " disabled" : "";
  return `
<section class="pending ${state.batch.kind}">
  <h2>${state.batch.kind === "initial" ? "Label the initial set" : "Queried for labeling"}
      <span class="count">${judged}/${state.batch.instances.length} judged</span></h2>
  ${cards}
  <button id="submit-batch"${submitOff}>submit labels</button>
</section>`;
}

function curveSvg(status: SessionStatus): string {
  const points = status.curve;
  if (points.length === 0) return "";
  const width = 320;
  const height = 120;
  const xMax = Math.max(status.budget, ...points.map((p) => p.labels_spent));
  const coords = points
    .map((p) => {
      const x = (p.labels_spent / xMax) * (width - 10) + 5;
      const y = height - 10 - p.f1 * (height - 20);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  return `<svg class="curve" viewBox="0 0 ${width} ${height}" role="img" aria-label="F1 learning curve">
  <polyline fill="none" stroke="#2a7" stroke-width="2" points="${coords}"></polyline>
</svg>`;
}

export function renderProgress(status: SessionStatus | null): string {
  if (status === null) return `<aside class="progress empty">no status yet</aside>`;
  const spentPct = status.budget ? (100 * status.labels_spent) / status.budget : 0;
  const entropy = status.max_entropy;
  const tau = status.confidence_tau;
  const entropyBar =
    entropy === null
      ? "<p>no unlabeled instances scored yet</p>"
      : `<div class="entropy">
  <span>max entropy ${entropy.toFixed(4)} vs τ ${tau.toFixed(4)}</span>
  <div class="bar"><div class="fill" style="width:${Math.min(100, (entropy / Math.max(tau, 1e-9)) * 10).toFixed(1)}%"></div>
  <div class="tau-line" title="confidence threshold"></div></div>
</div>`;
  const f1Panel = status.f1_available
    ? `<div class="f1-panel"><h3>labels spent vs F1</h3>${curveSvg(status)}
       <p>latest F1 ${status.curve.length ? status.curve[status.curve.length - 1]!.f1.toFixed(4) : "–"}</p></div>`
    : "";
  return `
<aside class="progress">
  <h3>budget</h3>
  <div class="gauge"><div class="used" style="width:${spentPct.toFixed(1)}%"></div></div>
  <p>${status.labels_spent} of ${status.budget} labels spent
     (${status.n_initial} initial + ${status.n_queried} queried)</p>
  <h3>labeled-set balance</h3>
  <p>${status.class_balance.good} good · ${status.class_balance.bad} bad</p>
  ${entropyBar}
  ${f1Panel}
</aside>`;
}

export function renderTerminal(status: SessionStatus, finalF1: number | null): string {
  const f1Line =
    finalF1 === null
      ? "<p>no evaluation labels available for this dataset</p>"
      : `<p class="final-f1">final F1 <strong>${finalF1.toFixed(4)}</strong></p>`;
  const links = [
    status.predictions_url
      ? `<a href="${escapeHtml(status.predictions_url)}" download>download predictions (CSV)</a>`
      : "",
    status.report_url
      ? `<a href="${escapeHtml(status.report_url)}" download>session report (JSON)</a>`
      : "",
  ].join(" · ");
  return `
<section class="terminal">
  <h2>Session complete (${escapeHtml(status.stop_reason ?? "done")})</h2>
  ${f1Line}
  <p>${status.labels_spent} labels spent of ${status.budget}</p>
  ${links}
  ${renderProgress(status)}
</section>`;
}

export function renderApp(state: UiState): string {
  switch (state.kind) {
    case "loading":
      return `<section class="notice">loading session…</section>`;
    case "training":
      return `<section class="notice">model retraining…</section>${renderProgress(state.status)}`;
    case "labeling":
      return renderPending(state) + renderProgress(state.status);
    case "terminal":
      return renderTerminal(state.status, state.finalF1);
    case "stale_locked":
      return `<section class="banner locked">${escapeHtml(state.message)}</section>${renderProgress(state.status)}`;
    case "error":
      return `<section class="banner error">service unreachable: ${escapeHtml(state.message)}
        <span class="retry">retrying in ${(state.retryMs / 1000).toFixed(0)}s</span></section>`;
  }
}
