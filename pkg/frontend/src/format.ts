/** Small pure helpers shared by the views. */

import type { Factors, MatchedSample, RevisionAction } from "./api.js";

export function pct(x: number, digits = 1): string {
  return `${(100 * x).toFixed(digits)}%`;
}

export function formatFactor(value: string | number[]): string {
  if (Array.isArray(value)) {
    return `(${value.map((v) => v.toFixed(2)).join(", ")})`;
  }
  return value;
}

/** Per-category value counts over the matched samples' ground truth;
 * continuous factors are skipped. This is the human-judgment signal the
 * card shows instead of rendered images. */
export function factorHistogram(
  matched: MatchedSample[],
): Map<string, Map<string, number>> {
  const out = new Map<string, Map<string, number>>();
  for (const m of matched) {
    if (!m.factors) continue;
    for (const [category, value] of Object.entries(m.factors)) {
      if (Array.isArray(value)) continue;
      let counts = out.get(category);
      if (!counts) {
        counts = new Map();
        out.set(category, counts);
      }
      counts.set(value, (counts.get(value) ?? 0) + 1);
    }
  }
  return out;
}

/** One-line human summary of a draft action, e.g. for the console list. */
export function describeAction(a: RevisionAction): string {
  switch (a.action) {
    case "merge":
      return `block ${a.block}: merge concept ${a.m} into ${a.b}`;
    case "delete_concept":
      return `block ${a.block}: delete concept ${a.m}`;
    case "delete_entry":
      return `block ${a.block}: delete entry ${a.l}`;
    case "add_entry":
      return `block ${a.block}: add entry to concept ${a.m}`;
    case "add_concept":
      return `block ${a.block}: add concept from ${
        (a.encs as unknown[] | undefined)?.length ?? 0
      } encodings`;
    case "zero_concept":
      return `block ${a.block}: zero concept ${a.m}`;
    default:
      return `block ${a.block}: ${a.action}`;
  }
}

export function factorDiffRows(
  before: Factors,
  after: Factors,
): { category: string; before: string; after: string; changed: boolean }[] {
  const categories = Object.keys(before);
  return categories.map((category) => {
    const b = formatFactor(before[category] as string | number[]);
    const a = formatFactor(after[category] as string | number[]);
    return { category, before: b, after: a, changed: b !== a };
  });
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
