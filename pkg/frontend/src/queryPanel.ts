/** Ranked-results gallery and year-estimate card.
 *
 * Every displayed figure is a server value: similarities, years, weights and
 * the predicted year are rendered from the response (full precision kept in
 * data attributes, rounding applied only for display). Bar widths scale the
 * server similarity for layout; the number next to a bar is the raw value.
 */

import { FeedbackPayload, QueryResponse, YearEstimate, escapeHtml } from "./api.js";

export function renderHits(response: QueryResponse): string {
  const items = response.hits
    .map((hit, position) => {
      const width = Math.max(0, hit.similarity) * 100;
      return (
        `<li class="hit" data-doc-id="${escapeHtml(hit.doc_id)}"` +
        ` data-year="${hit.year}" data-similarity="${String(hit.similarity)}">` +
        `<span class="rank">#${position + 1}</span>` +
        `<code class="doc-id">${escapeHtml(hit.doc_id)}</code>` +
        `<span class="year-badge">${hit.year}</span>` +
        `<span class="bar-track"><span class="bar" style="width:${width.toFixed(2)}%"></span></span>` +
        `<span class="similarity">${hit.similarity.toFixed(4)}</span>` +
        `</li>`
      );
    })
    .join("");
  return (
    `<ol class="hits" data-model-version="${escapeHtml(response.model_version)}">` +
    `${items}</ol>`
  );
}

export function renderEstimateCard(estimate: YearEstimate): string {
  const neighbors = estimate.neighbor_ids
    .map((docId, i) => {
      const weight = estimate.weights[i];
      return (
        `<li data-doc-id="${escapeHtml(docId)}" data-weight="${String(weight)}">` +
        `<code>${escapeHtml(docId)}</code>` +
        `<span class="weight">${weight.toFixed(3)}</span></li>`
      );
    })
    .join("");
  return (
    `<div class="estimate-card" data-predicted-year="${String(estimate.predicted_year)}">` +
    `<p class="predicted">estimated year <strong>${estimate.predicted_year.toFixed(2)}</strong></p>` +
    `<ul class="neighbors">${neighbors}</ul>` +
    `</div>`
  );
}

/** Exact POST /feedback/label body for the "confirm year" control. */
export function buildFeedbackPayload(
  docId: string,
  features: number[],
  year: number,
): FeedbackPayload {
  return { doc_id: docId, features, year };
}

export function renderIndexSize(response: { index_size: number; model_version: string }): string {
  return (
    `<p class="index-size" data-index-size="${response.index_size}">` +
    `index now holds <strong>${response.index_size}</strong> documents</p>`
  );
}

/** Parse one uploaded CSV feature row ("0.1, -2.4, ...") into numbers. */
export function parseFeatureRow(text: string): number[] {
  const line = text
    .split(/\r?\n/)
    .map((candidate) => candidate.trim())
    .find((candidate) => candidate.length > 0);
  if (!line) throw new Error("the file holds no feature row");
  return line.split(",").map((field) => {
    const value = Number(field.trim());
    if (!Number.isFinite(value)) throw new Error(`not a finite number: ${field.trim()}`);
    return value;
  });
}

export function renderQueryError(code: string, message: string): string {
  const hint =
    code === "no_model"
      ? `<p class="hint">No model is being served yet — run a training first.</p>`
      : "";
  return `<div class="error" data-code="${escapeHtml(code)}">${escapeHtml(message)}${hint}</div>`;
}
