/**
 * Concept browser: block list with concept-count badges, per-concept
 * cards (population share, ground-truth histograms of matched samples,
 * exemplar count) and the similarity ranking with a merge affordance on
 * the nearest neighbor.
 */

import { ApiClient, BlockSummary, ConceptCard, SimilarityReport } from "../api.js";
import { el, factorHistogram, pct } from "../format.js";
import { SessionStore } from "../state.js";

export class ConceptBrowser {
  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    private store: SessionStore,
  ) {}

  async render(): Promise<void> {
    this.root.replaceChildren();
    const blocks = await this.client.blocks();
    const list = el("div", "block-list");
    const detail = el("div", "block-detail");
    detail.id = "block-detail";
    for (const block of blocks) {
      list.appendChild(this.blockRow(block, detail));
    }
    this.root.append(list, detail);
    const { selectedBlock, selectedConcept } = this.store.get();
    if (selectedBlock !== null) {
      await this.renderConcepts(selectedBlock, detail);
      if (selectedConcept !== null) {
        await this.renderCard(selectedBlock, selectedConcept, detail);
      }
    }
  }

  private blockRow(block: BlockSummary, detail: HTMLElement): HTMLElement {
    const row = el("button", "block-row");
    row.dataset.block = String(block.block);
    const label = block.mapped_factor ? ` (${block.mapped_factor})` : "";
    row.appendChild(el("span", "block-name", `block ${block.block}${label}`));
    const badge = el("span", "badge", String(block.live.length));
    badge.title = `${block.live.length} live concepts`;
    row.appendChild(badge);
    if (block.deleted_to_single) {
      row.appendChild(el("span", "flag", "collapsed"));
    }
    row.addEventListener("click", () => {
      this.store.select(block.block, null);
      void this.renderConcepts(block.block, detail);
    });
    return row;
  }

  private async renderConcepts(block: number, detail: HTMLElement): Promise<void> {
    const concepts = await this.client.concepts(block);
    detail.replaceChildren(el("h3", undefined, `block ${block} concepts`));
    const grid = el("div", "concept-list");
    for (const c of concepts) {
      const btn = el("button", "concept-chip");
      btn.dataset.concept = String(c.id);
      btn.textContent = c.id === 0 ? "other (0)" : `concept ${c.id}`;
      btn.appendChild(el("span", "share", pct(c.population_share)));
      if (c.masked) btn.appendChild(el("span", "flag", "zeroed"));
      btn.addEventListener("click", () => {
        this.store.select(block, c.id);
        void this.renderCard(block, c.id, detail);
      });
      grid.appendChild(btn);
    }
    detail.appendChild(grid);
    detail.appendChild(el("div", "card-slot"));
  }

  private async renderCard(
    block: number,
    concept: number,
    detail: HTMLElement,
  ): Promise<void> {
    const slot = detail.querySelector(".card-slot");
    if (!slot) return;
    const [card, similar] = await Promise.all([
      this.client.card(block, concept),
      concept === 0
        ? Promise.resolve(null)
        : this.client.similar(block, concept).catch(() => null),
    ]);
    slot.replaceChildren(this.cardNode(card, similar));
  }

  private cardNode(
    card: ConceptCard,
    similar: SimilarityReport | null,
  ): HTMLElement {
    const node = el("div", "concept-card");
    node.dataset.concept = String(card.concept_id);
    node.appendChild(
      el("h4", undefined, `block ${card.block} / concept ${card.concept_id}`),
    );
    const stats = el("div", "card-stats");
    stats.appendChild(
      el("span", "stat", `population share ${pct(card.population_share)}`),
    );
    stats.appendChild(el("span", "stat", `${card.exemplars.length} exemplars`));
    stats.appendChild(el("span", "stat", `${card.matched.length} matched samples`));
    node.appendChild(stats);

    const hist = factorHistogram(card.matched);
    const histBox = el("div", "histograms");
    for (const [category, counts] of hist) {
      const section = el("div", "hist");
      section.appendChild(el("h5", undefined, category));
      const total = [...counts.values()].reduce((a, b) => a + b, 0);
      for (const [value, count] of [...counts.entries()].sort((a, b) => b[1] - a[1])) {
        const row = el("div", "hist-row");
        row.appendChild(el("span", "hist-label", value));
        const bar = el("div", "hist-bar");
        bar.style.width = `${(100 * count) / total}%`;
        bar.title = `${count}/${total}`;
        row.appendChild(bar);
        row.appendChild(el("span", "hist-count", String(count)));
        section.appendChild(row);
      }
      histBox.appendChild(section);
    }
    node.appendChild(histBox);

    if (similar && similar.ranked.length) {
      const simBox = el("div", "similarity");
      simBox.appendChild(el("h5", undefined, "similar concepts"));
      similar.ranked.slice(0, 6).forEach((entry, i) => {
        const row = el("div", "sim-row");
        row.appendChild(
          el("span", undefined, `concept ${entry.id} — d=${entry.distance.toFixed(3)}`),
        );
        if (i === 0) {
          const merge = el("button", "merge-affordance", "merge?");
          merge.title = `draft: merge concept ${entry.id} into ${similar.anchor}`;
          merge.addEventListener("click", () => {
            this.store.draftAction({
              block: similar.block,
              action: "merge",
              m: entry.id,
              b: similar.anchor,
            });
          });
          row.appendChild(merge);
        }
        simBox.appendChild(row);
      });
      node.appendChild(simBox);
    }
    return node;
  }
}
