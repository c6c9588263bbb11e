/** Retrain launcher and live job status.
 *
 * The panel polls the job endpoint once per second, renders the states it
 * sees in lifecycle order (queued, running, then done or failed), and on
 * completion triggers exactly one projection refresh.
 */

import { ApiClient, RetrainJobView, escapeHtml } from "./api.js";

const LIFECYCLE_RANK: Record<RetrainJobView["state"], number> = {
  queued: 0,
  running: 1,
  done: 2,
  failed: 2,
};

export function isTerminal(state: RetrainJobView["state"]): boolean {
  return state === "done" || state === "failed";
}

/** The launch button stays disabled while a job is live. */
export function canLaunch(job: RetrainJobView | null): boolean {
  return job === null || isTerminal(job.state);
}

/** True when states only ever move forward through the lifecycle. */
export function inLifecycleOrder(states: RetrainJobView["state"][]): boolean {
  for (let i = 1; i < states.length; i += 1) {
    if (LIFECYCLE_RANK[states[i]] < LIFECYCLE_RANK[states[i - 1]]) return false;
  }
  return true;
}

export function renderSparkline(losses: number[], width = 240, height = 48): string {
  if (!losses.length) return `<svg class="sparkline" width="${width}" height="${height}"></svg>`;
  const low = Math.min(...losses);
  const high = Math.max(...losses);
  const spread = high - low || 1;
  const step = losses.length > 1 ? width / (losses.length - 1) : 0;
  const points = losses
    .map((loss, i) => {
      const x = i * step;
      const y = height - ((loss - low) / spread) * height;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  return (
    `<svg class="sparkline" width="${width}" height="${height}"` +
    ` data-point-count="${losses.length}" viewBox="0 0 ${width} ${height}">` +
    `<polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${points}"/></svg>`
  );
}

export function renderJob(job: RetrainJobView): string {
  let body = "";
  if (job.state === "running") {
    body =
      `<p class="progress" data-iteration="${job.iteration ?? ""}"` +
      ` data-loss="${job.loss !== undefined ? String(job.loss) : ""}">` +
      `iteration ${job.iteration ?? "?"} · batch objective ` +
      `${job.loss !== undefined ? job.loss.toFixed(4) : "?"}</p>`;
  } else if (job.state === "done" && job.report) {
    body =
      `<p class="done" data-model-version="${escapeHtml(job.report.model_version)}">` +
      `finished ${job.report.iterations} iterations · new model ` +
      `<code>${escapeHtml(job.report.model_version)}</code></p>` +
      renderSparkline(job.report.losses);
  } else if (job.state === "failed") {
    body = `<p class="reason">${escapeHtml(job.reason ?? "unknown failure")}</p>`;
  }
  return (
    `<div class="job" data-job-id="${escapeHtml(job.job_id)}" data-state="${job.state}"` +
    ` data-matrix-version="${escapeHtml(job.matrix_version)}">` +
    `<span class="state state-${job.state}">${job.state}</span>${body}</div>`
  );
}

export interface WatchEvents {
  onUpdate?: (job: RetrainJobView) => void;
  onProjectionRefresh?: () => void;
}

export interface WatchOptions {
  intervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Poll a job to completion; fires onProjectionRefresh once iff it finishes done. */
export async function watchJob(
  client: ApiClient,
  jobId: string,
  events: WatchEvents = {},
  options: WatchOptions = {},
): Promise<RetrainJobView> {
  const intervalMs = options.intervalMs ?? 1000;
  const sleep = options.sleep ?? defaultSleep;
  for (;;) {
    const job = await client.getJob(jobId);
    events.onUpdate?.(job);
    if (isTerminal(job.state)) {
      if (job.state === "done") events.onProjectionRefresh?.();
      return job;
    }
    await sleep(intervalMs);
  }
}
