/** Relevance-matrix heatmap editor.
 *
 * Edits accumulate in a local pending buffer and are sent with "Apply" as
 * one PUT per edit, in staging order. Until a PUT succeeds, a cell shows the
 * last value fetched from the server (never a locally computed preview: the
 * server owns relevance arithmetic); staged cells are only marked. A staged
 * "set" cell shows its buffered value, which is the user's own input, not a
 * computation.
 */

import { ApiClient, ApiError, MatrixDoc, MatrixEdit, escapeHtml } from "./api.js";

export interface EditorState {
  doc: MatrixDoc;
  pending: MatrixEdit[];
}

export function initEditor(doc: MatrixDoc): EditorState {
  return { doc, pending: [] };
}

export function stageBoost(
  state: EditorState,
  lo: number,
  hi: number,
  factor: number,
): EditorState {
  if (lo > hi) throw new Error(`boost range is inverted: ${lo} > ${hi}`);
  if (!(factor > 0)) throw new Error(`boost factor must be > 0, got ${factor}`);
  return { doc: state.doc, pending: [...state.pending, { op: "boost", lo, hi, factor }] };
}

export function stageSet(
  state: EditorState,
  queryYear: number,
  itemYear: number,
  value: number,
): EditorState {
  if (!(value >= 0)) throw new Error(`cell value must be >= 0, got ${value}`);
  return {
    doc: state.doc,
    pending: [...state.pending, { op: "set", query_year: queryYear, item_year: itemYear, value }],
  };
}

export function discardPending(state: EditorState): EditorState {
  return { doc: state.doc, pending: [] };
}

/** The exact PUT bodies "Apply" will send, in order. */
export function pendingPayloads(state: EditorState): MatrixEdit[] {
  return state.pending.map((edit) => ({ ...edit }));
}

/** What a cell displays: the staged set-value (user input) or the server value. */
export function displayedCellValue(
  state: EditorState,
  queryYear: number,
  itemYear: number,
): number {
  for (let i = state.pending.length - 1; i >= 0; i -= 1) {
    const edit = state.pending[i];
    if (edit.op === "set" && edit.query_year === queryYear && edit.item_year === itemYear) {
      return edit.value;
    }
  }
  const row = state.doc.years.indexOf(queryYear);
  const col = state.doc.years.indexOf(itemYear);
  return state.doc.values[row][col];
}

export function cellMarker(
  state: EditorState,
  queryYear: number,
  itemYear: number,
): "pending-set" | "pending-boost" | null {
  for (let i = state.pending.length - 1; i >= 0; i -= 1) {
    const edit = state.pending[i];
    if (edit.op === "set" && edit.query_year === queryYear && edit.item_year === itemYear) {
      return "pending-set";
    }
    if (edit.op === "boost" && queryYear >= edit.lo && queryYear <= edit.hi) {
      return "pending-boost";
    }
  }
  return null;
}

function editTouches(edit: MatrixEdit, queryYear: number, itemYear: number): boolean {
  if (edit.op === "set") {
    return edit.query_year === queryYear && edit.item_year === itemYear;
  }
  return queryYear >= edit.lo && queryYear <= edit.hi;
}

export interface RenderOptions {
  /** Edit rejected by the server; its cells get the "rejected" class. */
  failedEdit?: MatrixEdit;
}

export function renderMatrixEditor(state: EditorState, options: RenderOptions = {}): string {
  const { years } = state.doc;
  let max = 0;
  for (const row of state.doc.values) {
    for (const value of row) max = Math.max(max, value);
  }
  const header = years.map((year) => `<th scope="col">${year}</th>`).join("");
  const rows = years
    .map((queryYear) => {
      const cells = years
        .map((itemYear) => {
          const value = displayedCellValue(state, queryYear, itemYear);
          const classes = ["cell"];
          const marker = cellMarker(state, queryYear, itemYear);
          if (marker) classes.push(marker);
          if (options.failedEdit && editTouches(options.failedEdit, queryYear, itemYear)) {
            classes.push("rejected");
          }
          const alpha = max > 0 ? value / max : 0;
          return (
            `<td class="${classes.join(" ")}" data-query-year="${queryYear}"` +
            ` data-item-year="${itemYear}" data-value="${String(value)}"` +
            ` style="background:rgba(214,93,30,${alpha.toFixed(3)})">` +
            `${String(value)}</td>`
          );
        })
        .join("");
      return `<tr><th scope="row">${queryYear}</th>${cells}</tr>`;
    })
    .join("");
  const pendingNote = state.pending.length
    ? `<p class="pending-note">${state.pending.length} pending edit(s) — not applied yet</p>`
    : "";
  return (
    `<div class="matrix-editor" data-matrix-version="${escapeHtml(state.doc.matrix_version)}"` +
    ` data-provenance="${escapeHtml(state.doc.provenance)}">` +
    `<p>version <code>${escapeHtml(state.doc.matrix_version)}</code>` +
    ` · provenance ${escapeHtml(state.doc.provenance)}</p>` +
    pendingNote +
    `<table><thead><tr><th></th>${header}</tr></thead><tbody>${rows}</tbody></table>` +
    `</div>`
  );
}

export type ApplyOutcome =
  | { result: "applied"; state: EditorState; version: string }
  | { result: "rejected"; state: EditorState; failed: MatrixEdit; error: ApiError }
  | { result: "network-error"; state: EditorState; error: Error };

/** Send pending edits in order; refresh from the server on full success.
 *
 * A 422 stops the sequence: already-accepted edits leave the buffer, the
 * failing edit and everything after it stay staged, and no version bump is
 * shown. A network failure preserves the whole remaining buffer for retry.
 */
export async function applyPending(client: ApiClient, state: EditorState): Promise<ApplyOutcome> {
  let remaining = [...state.pending];
  let current = state;
  while (remaining.length) {
    const edit = remaining[0];
    try {
      await client.putMatrix(edit);
    } catch (error) {
      if (error instanceof ApiError) {
        return { result: "rejected", state: current, failed: edit, error };
      }
      return { result: "network-error", state: current, error: error as Error };
    }
    remaining = remaining.slice(1);
    current = { doc: current.doc, pending: remaining };
  }
  const doc = await client.getMatrix();
  return { result: "applied", state: initEditor(doc), version: doc.matrix_version };
}
