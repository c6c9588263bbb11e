/** Browser bootstrap: wires the panels to the service and the DOM.
 *
 * All rendering and payload construction lives in the panel modules (which
 * the contract tests cover); this file only moves strings and events around.
 */

import { ApiClient, ApiError, QueryResponse } from "./api.js";
import {
  EditorState,
  applyPending,
  initEditor,
  renderMatrixEditor,
  stageBoost,
  stageSet,
} from "./matrixEditor.js";
import {
  buildFeedbackPayload,
  parseFeatureRow,
  renderEstimateCard,
  renderHits,
  renderIndexSize,
  renderQueryError,
} from "./queryPanel.js";
import { canLaunch, renderJob, watchJob } from "./retrainPanel.js";
import { renderProjection } from "./projectionView.js";

declare global {
  interface Window {
    CHRONORANK_API?: string;
  }
}

// same-origin by default; a static dev server can point elsewhere by setting
// window.CHRONORANK_API before this module loads
const client = new ApiClient(window.CHRONORANK_API ?? "");

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

let editor: EditorState | null = null;
let lastQuery: { features: number[]; response: QueryResponse } | null = null;
let liveJobId: string | null = null;

function drawMatrix(options = {}) {
  if (editor) element("matrix-host").innerHTML = renderMatrixEditor(editor, options);
}

async function reloadMatrix() {
  editor = initEditor(await client.getMatrix());
  drawMatrix();
}

async function refreshProjection() {
  try {
    element("projection-host").innerHTML = renderProjection(await client.getProjection());
  } catch (error) {
    if (error instanceof ApiError) {
      element("projection-host").innerHTML = renderQueryError(error.code, error.message);
    }
  }
}

function wireMatrixPanel() {
  element("boost-apply").addEventListener("click", () => {
    if (!editor) return;
    editor = stageBoost(
      editor,
      Number(element<HTMLInputElement>("boost-lo").value),
      Number(element<HTMLInputElement>("boost-hi").value),
      Number(element<HTMLInputElement>("boost-factor").value),
    );
    drawMatrix();
  });
  element("set-apply").addEventListener("click", () => {
    if (!editor) return;
    editor = stageSet(
      editor,
      Number(element<HTMLInputElement>("set-query-year").value),
      Number(element<HTMLInputElement>("set-item-year").value),
      Number(element<HTMLInputElement>("set-value").value),
    );
    drawMatrix();
  });
  element("matrix-apply").addEventListener("click", async () => {
    if (!editor) return;
    const outcome = await applyPending(client, editor);
    editor = outcome.state;
    if (outcome.result === "applied") {
      drawMatrix();
      element("matrix-status").textContent = `applied — version ${outcome.version}`;
    } else if (outcome.result === "rejected") {
      drawMatrix({ failedEdit: outcome.failed });
      element("matrix-status").textContent = `rejected: ${outcome.error.message}`;
    } else {
      element("matrix-status").textContent = "network problem — edits kept, retry Apply";
    }
  });
}

function wireQueryPanel() {
  element("query-run").addEventListener("click", async () => {
    const raw = element<HTMLTextAreaElement>("query-features").value;
    try {
      const features = parseFeatureRow(raw);
      const response = await client.query({
        features,
        top_k: Number(element<HTMLInputElement>("query-top-k").value) || undefined,
      });
      lastQuery = { features, response };
      element("hits-host").innerHTML = renderHits(response);
      element("estimate-host").innerHTML = renderEstimateCard(response.estimate);
    } catch (error) {
      if (error instanceof ApiError) {
        element("hits-host").innerHTML = renderQueryError(error.code, error.message);
      } else {
        element("hits-host").innerHTML = renderQueryError("bad_input", String(error));
      }
    }
  });
  element("confirm-year").addEventListener("click", async () => {
    if (!lastQuery) return;
    const payload = buildFeedbackPayload(
      element<HTMLInputElement>("confirm-doc-id").value,
      lastQuery.features,
      Number(element<HTMLInputElement>("confirm-year-value").value),
    );
    const response = await client.submitFeedback(payload);
    element("feedback-status").innerHTML = renderIndexSize(response);
  });
}

function wireRetrainPanel() {
  const launch = element<HTMLButtonElement>("retrain-launch");
  launch.addEventListener("click", async () => {
    if (liveJobId) return;
    try {
      const { job_id } = await client.submitRetrain({});
      liveJobId = job_id;
      launch.disabled = true;
      await watchJob(client, job_id, {
        onUpdate: (job) => {
          element("job-host").innerHTML = renderJob(job);
          launch.disabled = !canLaunch(job);
        },
        onProjectionRefresh: () => void refreshProjection(),
      });
    } catch (error) {
      if (error instanceof ApiError) {
        element("job-host").innerHTML = renderQueryError(error.code, error.message);
      }
    } finally {
      liveJobId = null;
      launch.disabled = false;
    }
  });
}

async function start() {
  wireMatrixPanel();
  wireQueryPanel();
  wireRetrainPanel();
  await Promise.all([reloadMatrix(), refreshProjection()]);
}

start().catch((error) => {
  document.body.insertAdjacentHTML(
    "beforeend",
    renderQueryError("startup_failure", String(error)),
  );
});
