/**
 * What-if panel: pick a dataset object, a block and a target concept,
 * and show decoded factors before and after the block swap. Distractor
 * blocks surface the "no visible effect" notice instead of a diff.
 */

import { ApiClient } from "../api.js";
import { el, factorDiffRows, formatFactor } from "../format.js";

export class WhatIfPanel {
  private sceneSelect = el("select", "scene-select");
  private blockSelect = el("select", "block-select");
  private conceptSelect = el("select", "concept-select");
  private result = el("div", "whatif-result");

  constructor(private root: HTMLElement, private client: ApiClient) {}

  async render(): Promise<void> {
    this.root.replaceChildren(el("h3", undefined, "what if?"));
    const [scenes, blocks] = await Promise.all([
      this.client.scenes(0, 40),
      this.client.blocks(),
    ]);
    this.sceneSelect.replaceChildren(
      ...scenes.scenes
        .filter((s) => s.objects.length > 0)
        .map((s) => {
          const factors = s.objects[0]
            ? Object.entries(s.objects[0].factors)
                .map(([k, v]) => `${k}=${formatFactor(v)}`)
                .join(" ")
            : "";
          const opt = el("option", undefined, `scene ${s.scene}: ${factors}`);
          opt.value = String(s.scene);
          return opt;
        }),
    );
    this.blockSelect.replaceChildren(
      ...blocks
        .filter((b) => !b.deleted_to_single)
        .map((b) => {
          const label = b.mapped_factor ? ` (${b.mapped_factor})` : " (distractor)";
          const opt = el("option", undefined, `block ${b.block}${label}`);
          opt.value = String(b.block);
          return opt;
        }),
    );
    this.blockSelect.addEventListener("change", () => void this.refreshConcepts());
    await this.refreshConcepts();

    const run = el("button", "run-btn", "swap");
    run.addEventListener("click", () => void this.run());
    const controls = el("div", "whatif-controls");
    controls.append(this.sceneSelect, this.blockSelect, this.conceptSelect, run);
    this.root.append(controls, this.result);
  }

  private async refreshConcepts(): Promise<void> {
    const block = Number(this.blockSelect.value);
    if (Number.isNaN(block)) return;
    const concepts = await this.client.concepts(block);
    this.conceptSelect.replaceChildren(
      ...concepts
        .filter((c) => c.id !== 0)
        .map((c) => {
          const opt = el("option", undefined, `concept ${c.id}`);
          opt.value = String(c.id);
          return opt;
        }),
    );
  }

  private async run(): Promise<void> {
    const scene = Number(this.sceneSelect.value);
    const block = Number(this.blockSelect.value);
    const concept = Number(this.conceptSelect.value);
    const res = await this.client.intervene({ scene, block, concept });
    this.result.replaceChildren();
    if (res.no_visible_effect) {
      this.result.appendChild(
        el("div", "notice", "no visible effect: this block carries no factor"),
      );
    }
    const table = el("table", "diff-table");
    const head = el("tr");
    for (const h of ["factor", "before", "after"]) {
      head.appendChild(el("th", undefined, h));
    }
    table.appendChild(head);
    for (const row of factorDiffRows(res.before, res.after)) {
      const tr = el("tr", row.changed ? "changed" : undefined);
      tr.append(
        el("td", undefined, row.category),
        el("td", undefined, row.before),
        el("td", undefined, row.after),
      );
      table.appendChild(tr);
    }
    this.result.appendChild(table);
  }
}
