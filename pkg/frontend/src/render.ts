/** HTML and SVG builders. Pure string producers so rendering is testable
 * without a browser; main.ts pushes the output into the page. */

import type { DisplayData } from "./csv.js";
import type { Clusters, Embedding, NextQuery, SessionView } from "./types.js";
import { displayedCounts } from "./state.js";

const PALETTE = [
  "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2",
  "#eeca3b", "#b279a2", "#ff9da6", "#9d755d", "#bab0ac",
];

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmt(value: number): string {
  return Math.abs(value) >= 1000 ? value.toFixed(0) : value.toPrecision(4);
}

export function countsPanel(view: SessionView): string {
  const counts = displayedCounts(view);
  return `<dl class="counts">
    <dt>queries</dt><dd id="count-spent">${counts.spent} / ${counts.budget}</dd>
    <dt>similar</dt><dd id="count-similar">${counts.similar}</dd>
    <dt>dissimilar</dt><dd id="count-dissimilar">${counts.dissimilar}</dd>
    <dt>neighborhoods</dt><dd id="count-neighborhoods">${counts.neighborhoods}</dd>
    <dt>loops</dt><dd id="count-loops">${counts.loops}</dd>
  </dl>`;
}

/** Side-by-side feature values with difference bars scaled by metric weight.
 * The width of each bar is weight * |difference|, normalized across rows, so
 * a heavy feature with a large gap dominates the eye the way it dominates
 * the learned distance. */
export function pairPanel(pending: NextQuery, view: SessionView, display: DisplayData | null): string {
  const [i, j] = pending.pair;
  const head = `<h2>Is instance <b>${i}</b> similar to instance <b>${j}</b>?</h2>`;
  const probing = pending.neighborhood_probed === null
    ? ""
    : `<p class="hint">probing neighborhood ${pending.neighborhood_probed + 1}</p>`;
  if (display === null || display.rows.length === 0) {
    return `${head}${probing}<p class="hint">load the dataset file to see feature values</p>`;
  }
  const weights = view.state.feature_weights;
  const names = view.state.feature_names;
  const left = display.rows[i];
  const right = display.rows[j];
  if (left === undefined || right === undefined) {
    return `${head}${probing}<p class="hint">dataset file does not cover these instances</p>`;
  }
  const gaps = names.map((_, k) => (weights[k] ?? 0) * Math.abs((left[k] ?? 0) - (right[k] ?? 0)));
  const top = Math.max(...gaps, 1e-12);
  const heavy = heavyFeatures(weights);
  const rows = names.map((name, k) => {
    const cls = heavy.has(k) ? ' class="heavy"' : "";
    const width = (100 * (gaps[k] ?? 0)) / top;
    return `<tr${cls}><td>${esc(name)}</td><td>${fmt(left[k] ?? 0)}</td><td>${fmt(right[k] ?? 0)}</td>
      <td class="bar"><div style="width:${width.toFixed(1)}%"></div></td></tr>`;
  });
  return `${head}${probing}<table class="pair">
    <thead><tr><th>feature</th><th>#${i}</th><th>#${j}</th><th>weighted gap</th></tr></thead>
    <tbody>${rows.join("\n")}</tbody></table>`;
}

/** Features holding the top half of total weight, largest first. */
export function heavyFeatures(weights: number[]): Set<number> {
  const total = weights.reduce((a, b) => a + b, 0);
  if (total <= 0) {
    return new Set();
  }
  const order = weights.map((w, k) => [w, k] as const).sort((a, b) => b[0] - a[0]);
  const heavy = new Set<number>();
  let mass = 0;
  for (const [w, k] of order) {
    if (mass >= total / 2) {
      break;
    }
    heavy.add(k);
    mass += w;
  }
  return heavy;
}

export function neighborhoodPanel(neighborhoods: number[][]): string {
  if (neighborhoods.length === 0) {
    return `<p class="hint">no neighborhoods yet</p>`;
  }
  const items = neighborhoods.map((members, m) => {
    const swatch = `<span class="swatch" style="background:${PALETTE[m % PALETTE.length]}"></span>`;
    return `<li>${swatch}N${m + 1}: ${members.length} instance${members.length === 1 ? "" : "s"}</li>`;
  });
  return `<ul class="neighborhoods">${items.join("")}</ul>`;
}

export function weightsChart(names: string[], weights: number[]): string {
  const order = weights.map((w, k) => k).sort((a, b) => (weights[b] ?? 0) - (weights[a] ?? 0));
  const top = Math.max(...weights, 1e-12);
  const rows = order.map((k) => {
    const width = (100 * (weights[k] ?? 0)) / top;
    return `<tr><td>${esc(names[k] ?? `x${k + 1}`)}</td>
      <td class="bar"><div style="width:${width.toFixed(1)}%"></div></td>
      <td>${(weights[k] ?? 0).toFixed(4)}</td></tr>`;
  });
  return `<table class="weights">${rows.join("\n")}</table>`;
}

/** Scatter of the two heaviest features; members colored by neighborhood. */
export function embeddingPlot(
  embedding: Embedding,
  neighborhoods: number[][],
  pair: [number, number] | null,
): string {
  const coords = embedding.coordinates;
  if (coords.length === 0) {
    return "<svg class='embedding'></svg>";
  }
  const xs = coords.map((c) => c[0]);
  const ys = coords.map((c) => c[1]);
  const span = (lo: number, hi: number) => (hi - lo) > 1e-12 ? hi - lo : 1;
  const [xLo, xHi] = [Math.min(...xs), Math.max(...xs)];
  const [yLo, yHi] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x: number) => 10 + (280 * (x - xLo)) / span(xLo, xHi);
  const sy = (y: number) => 290 - (280 * (y - yLo)) / span(yLo, yHi);
  const colorOf = new Map<number, string>();
  neighborhoods.forEach((members, m) =>
    members.forEach((i) => colorOf.set(i, PALETTE[m % PALETTE.length]!)));
  const marked = new Set(pair ?? []);
  const dots = coords.map((c, i) => {
    const fill = colorOf.get(i) ?? "#cccccc";
    const ring = marked.has(i) ? ' stroke="#222" stroke-width="2"' : "";
    return `<circle cx="${sx(c[0]).toFixed(1)}" cy="${sy(c[1]).toFixed(1)}" r="${marked.has(i) ? 6 : 3.5}" fill="${fill}"${ring}/>`;
  });
  return `<svg class="embedding" viewBox="0 0 300 300">${dots.join("")}</svg>`;
}

export function contradictionBanner(detail: string | null): string {
  if (detail === null) {
    return "";
  }
  return `<div class="banner" role="alert">That answer conflicts with earlier ones: ${esc(detail)}. The pair stays open; answer again.</div>`;
}

export function clustersPanel(clusters: Clusters): string {
  const sizes = clusters.sizes.map((s, c) => `<li>cluster ${c + 1}: ${s} instances</li>`);
  const note = clusters.finalized
    ? "final assignment from the aggregated metric"
    : "provisional assignment; the budget ran out before a full loop";
  return `<h2>Clustering</h2><p class="hint">${note}</p><ul class="clusters">${sizes.join("")}</ul>`;
}

/** Whole-page body for the current view. */
export function page(view: SessionView, display: DisplayData | null): string {
  const parts = [contradictionBanner(view.contradiction), countsPanel(view)];
  if (view.finished) {
    parts.push(view.clusters ? clustersPanel(view.clusters) : "");
    parts.push(`<h3>Feature weights</h3>`,
               weightsChart(view.state.feature_names, view.state.feature_weights));
    parts.push(embeddingPlot(view.state.embedding, view.state.neighborhoods, null));
  } else if (view.pending) {
    parts.push(pairPanel(view.pending, view, display));
    parts.push(`<div class="actions">
      <button id="btn-similar">similar</button>
      <button id="btn-dissimilar">dissimilar</button>
    </div>`);
    parts.push(`<h3>Neighborhoods</h3>`, neighborhoodPanel(view.state.neighborhoods));
    parts.push(`<h3>Feature weights</h3>`,
               weightsChart(view.state.feature_names, view.state.feature_weights));
    parts.push(embeddingPlot(view.state.embedding, view.state.neighborhoods, view.pending.pair));
  }
  return parts.filter((part) => part.length > 0).join("\n");
}
