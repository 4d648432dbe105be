import { describe, expect, it } from "vitest";

import type { MatchedSample } from "../src/api.js";
import {
  describeAction,
  factorDiffRows,
  factorHistogram,
  formatFactor,
  pct,
} from "../src/format.js";

describe("pct", () => {
  it("renders fractions as percentages", () => {
    expect(pct(0.158)).toBe("15.8%");
    expect(pct(1)).toBe("100.0%");
    expect(pct(0, 0)).toBe("0%");
  });
});

describe("formatFactor", () => {
  it("passes strings through and rounds positions", () => {
    expect(formatFactor("purple")).toBe("purple");
    expect(formatFactor([0.25, 0.751])).toBe("(0.25, 0.75)");
  });
});

describe("factorHistogram", () => {
  const matched: MatchedSample[] = [
    { scene: 0, slot: 1, factors: { color: "purple", shape: "cube", position: [0.1, 0.2] } },
    { scene: 1, slot: 0, factors: { color: "purple", shape: "sphere", position: [0.3, 0.4] } },
    { scene: 2, slot: 2, factors: { color: "red", shape: "cube", position: [0.5, 0.6] } },
    { scene: 3, slot: 0, factors: null },
  ];

  it("counts categorical values and skips continuous factors", () => {
    const hist = factorHistogram(matched);
    expect(hist.get("color")?.get("purple")).toBe(2);
    expect(hist.get("color")?.get("red")).toBe(1);
    expect(hist.get("shape")?.get("cube")).toBe(2);
    expect(hist.has("position")).toBe(false);
  });

  it("ignores samples without ground truth", () => {
    const total = [...factorHistogram(matched).get("color")!.values()].reduce(
      (a, b) => a + b,
      0,
    );
    expect(total).toBe(3);
  });
});

describe("describeAction", () => {
  it("names merge arguments", () => {
    expect(describeAction({ block: 1, action: "merge", m: 9, b: 4 })).toBe(
      "block 1: merge concept 9 into 4",
    );
  });

  it("handles deletion and zeroing", () => {
    expect(describeAction({ block: 0, action: "delete_concept", m: 2 })).toContain(
      "delete concept 2",
    );
    expect(describeAction({ block: 3, action: "zero_concept", m: 5 })).toContain(
      "zero concept 5",
    );
  });
});

describe("factorDiffRows", () => {
  it("marks exactly the changed categories", () => {
    const rows = factorDiffRows(
      { shape: "cube", color: "red", position: [0.1, 0.2] },
      { shape: "sphere", color: "red", position: [0.1, 0.2] },
    );
    const changed = rows.filter((r) => r.changed).map((r) => r.category);
    expect(changed).toEqual(["shape"]);
    expect(rows.find((r) => r.category === "color")?.changed).toBe(false);
  });
});
