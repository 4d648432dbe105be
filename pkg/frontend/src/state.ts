/**
 * Client-side session state: corpus version tracking, the revision
 * draft, and the last evaluation snapshot for dashboard deltas.
 *
 * Invariant: a draft remembers the corpus version it was started
 * against and submits against exactly that version, so edits raced by
 * another client surface as a conflict instead of silently applying to
 * a different corpus.
 */

import type { RevisionAction, SudokuReport } from "./api.js";

export interface SessionState {
  corpusVersion: number;
  draftedAgainst: number | null;
  draft: RevisionAction[];
  conflict: boolean;
  lastReport: SudokuReport | null;
  selectedBlock: number | null;
  selectedConcept: number | null;
}

export type Listener = (state: SessionState) => void;

export class SessionStore {
  private state: SessionState;
  private listeners: Listener[] = [];

  constructor(corpusVersion: number) {
    this.state = {
      corpusVersion,
      draftedAgainst: null,
      draft: [],
      conflict: false,
      lastReport: null,
      selectedBlock: null,
      selectedConcept: null,
    };
  }

  get(): SessionState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private commit(next: Partial<SessionState>): void {
    this.state = { ...this.state, ...next };
    for (const l of this.listeners) l(this.state);
  }

  select(block: number | null, concept: number | null): void {
    this.commit({ selectedBlock: block, selectedConcept: concept });
  }

  /** Note a fresh version observed from any read; an open draft against
   * an older version flips into the conflict state. */
  observeVersion(version: number): void {
    const conflict =
      this.state.draftedAgainst !== null && this.state.draftedAgainst !== version;
    this.commit({ corpusVersion: version, conflict });
  }

  draftAction(action: RevisionAction): void {
    const draftedAgainst = this.state.draftedAgainst ?? this.state.corpusVersion;
    this.commit({
      draftedAgainst,
      draft: [...this.state.draft, action],
      conflict: draftedAgainst !== this.state.corpusVersion,
    });
  }

  removeDraft(index: number): void {
    const draft = this.state.draft.filter((_a, i) => i !== index);
    this.commit({
      draft,
      draftedAgainst: draft.length ? this.state.draftedAgainst : null,
    });
  }

  clearDraft(): void {
    this.commit({ draft: [], draftedAgainst: null, conflict: false });
  }

  /** Version to submit the draft against. */
  submitVersion(): number {
    return this.state.draftedAgainst ?? this.state.corpusVersion;
  }

  applied(newVersion: number): void {
    this.commit({
      corpusVersion: newVersion,
      draft: [],
      draftedAgainst: null,
      conflict: false,
    });
  }

  markConflict(): void {
    this.commit({ conflict: true });
  }

  reloadResolved(version: number): void {
    this.commit({
      corpusVersion: version,
      draft: [],
      draftedAgainst: null,
      conflict: false,
    });
  }

  snapshotReport(report: SudokuReport): SudokuReport | null {
    const previous = this.state.lastReport;
    this.commit({ lastReport: report });
    return previous;
  }
}

/** Solve-rate deltas between two reports, keyed by (variant, K, N). */
export function reportDelta(
  previous: SudokuReport | null,
  current: SudokuReport,
): Map<string, number | null> {
  const key = (r: { variant: string; k_empty: number; n_examples: number }) =>
    `${r.variant}/K=${r.k_empty}/N=${r.n_examples}`;
  const before = new Map<string, number>();
  if (previous) {
    for (const row of previous.rows) before.set(key(row), row.solved_pct);
  }
  const out = new Map<string, number | null>();
  for (const row of current.rows) {
    const prev = before.get(key(row));
    out.set(key(row), prev === undefined ? null : row.solved_pct - prev);
  }
  return out;
}
