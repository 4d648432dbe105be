/**
 * Sudoku dashboard: run suite evaluations against the current corpus
 * and plot solve rates per configuration as CSS bars, with the delta
 * against the previous snapshot annotated after each revision.
 */

import { ApiClient, SudokuReport } from "../api.js";
import { el } from "../format.js";
import { SessionStore, reportDelta } from "../state.js";

export class SudokuDashboard {
  private status = el("div", "job-status");
  private chart = el("div", "bar-chart");
  private variant: string;

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    private store: SessionStore,
    variant: string = "easy",
    private count: number = 20,
  ) {
    this.variant = variant;
  }

  async render(): Promise<void> {
    this.root.replaceChildren(el("h3", undefined, "sudoku solve rates"));
    const run = el("button", "eval-btn", "evaluate current corpus");
    run.addEventListener("click", () => void this.runEval("ncb"));
    const gt = el("button", "eval-gt-btn", "ground-truth baseline");
    gt.addEventListener("click", () => void this.runEval("gt"));
    const controls = el("div", "dashboard-controls");
    controls.append(run, gt, this.status);
    this.root.append(controls, this.chart);
    const last = this.store.get().lastReport;
    if (last) this.plot(last, new Map());
  }

  private async runEval(pipeline: "ncb" | "gt"): Promise<void> {
    this.status.textContent = "running...";
    try {
      const { job_id } = await this.client.submitSudokuEval({
        variant: this.variant,
        k_empty: 30,
        n_examples: 1,
        count: this.count,
        pipeline,
      });
      const done = await this.client.pollJob(job_id);
      if (done.status !== "done" || !done.result) {
        this.status.textContent = `job failed: ${done.error ?? "unknown"}`;
        return;
      }
      this.status.textContent = `done (corpus v${done.result.corpus_version ?? "?"})`;
      if (pipeline === "gt") {
        // baseline renders alongside, never stored as the delta anchor
        this.plot(done.result, new Map(), "ground truth");
        return;
      }
      const previous = this.store.snapshotReport(done.result);
      this.plot(done.result, reportDelta(previous, done.result));
    } catch (err) {
      this.status.textContent = `error: ${(err as Error).message}`;
    }
  }

  private plot(
    report: SudokuReport,
    delta: Map<string, number | null>,
    label?: string,
  ): void {
    this.chart.replaceChildren();
    if (label) this.chart.appendChild(el("h4", undefined, label));
    for (const row of report.rows) {
      const key = `${row.variant}/K=${row.k_empty}/N=${row.n_examples}`;
      const line = el("div", "bar-row");
      line.appendChild(el("span", "bar-label", key));
      const track = el("div", "bar-track");
      const bar = el("div", "bar-fill");
      bar.style.width = `${row.solved_pct}%`;
      track.appendChild(bar);
      line.appendChild(track);
      line.appendChild(el("span", "bar-value", `${row.solved_pct.toFixed(1)}%`));
      const d = delta.get(key);
      if (d !== null && d !== undefined) {
        const cls = d >= 0 ? "delta up" : "delta down";
        line.appendChild(
          el("span", cls, `${d >= 0 ? "+" : ""}${d.toFixed(1)} vs last`),
        );
      }
      this.chart.appendChild(line);
    }
  }
}
