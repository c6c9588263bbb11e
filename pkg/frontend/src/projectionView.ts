/** Scatter plot of per-year cluster centers.
 *
 * Point positions come straight from the server's x/y coordinates (scaled to
 * the viewport); the fill color follows a monotone year gradient, so the
 * legend endpoints are always the oldest and newest projected year.
 */

import { ProjectionResponse, escapeHtml } from "./api.js";

/** Monotone year gradient: older = deep blue (hue 240), newer = amber (hue 45). */
export function yearColor(year: number, minYear: number, maxYear: number): string {
  const t = maxYear > minYear ? (year - minYear) / (maxYear - minYear) : 0;
  const hue = 240 - 195 * t;
  return `hsl(${hue.toFixed(1)}, 75%, 45%)`;
}

export function renderProjection(response: ProjectionResponse, size = 360): string {
  if (!response.points.length) {
    return `<div class="projection empty">No projection yet — train a model first.</div>`;
  }
  const years = response.points.map((p) => p.year);
  const minYear = Math.min(...years);
  const maxYear = Math.max(...years);
  const xs = response.points.map((p) => p.x);
  const ys = response.points.map((p) => p.y);
  const pad = 14;
  const spanX = Math.max(...xs) - Math.min(...xs) || 1;
  const spanY = Math.max(...ys) - Math.min(...ys) || 1;
  const toPixelX = (x: number) => pad + ((x - Math.min(...xs)) / spanX) * (size - 2 * pad);
  const toPixelY = (y: number) => size - pad - ((y - Math.min(...ys)) / spanY) * (size - 2 * pad);

  const circles = response.points
    .map(
      (point) =>
        `<circle cx="${toPixelX(point.x).toFixed(1)}" cy="${toPixelY(point.y).toFixed(1)}"` +
        ` r="4" fill="${yearColor(point.year, minYear, maxYear)}"` +
        ` data-year="${point.year}" data-x="${String(point.x)}" data-y="${String(point.y)}">` +
        `<title>${point.year}</title></circle>`,
    )
    .join("");

  const excluded = response.excluded_years.length
    ? `<p class="excluded">excluded years (degenerate centers): ` +
      `${response.excluded_years.join(", ")}</p>`
    : "";

  return (
    `<div class="projection" data-model-version="${escapeHtml(response.model_version)}"` +
    ` data-point-count="${response.points.length}">` +
    `<svg width="${size}" height="${size}" viewBox="0 0 ${size} ${size}" role="img">${circles}</svg>` +
    `<div class="legend">` +
    `<span class="legend-min" style="color:${yearColor(minYear, minYear, maxYear)}">${minYear}</span>` +
    `<span class="legend-max" style="color:${yearColor(maxYear, minYear, maxYear)}">${maxYear}</span>` +
    `</div>` +
    excluded +
    `</div>`
  );
}
