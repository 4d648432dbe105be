/**
 * Revision console: the pending draft with affected-entry previews, a
 * transactional submit, the conflict banner, and the log timeline.
 */

import { ApiClient, ConflictError } from "../api.js";
import { describeAction, el } from "../format.js";
import { SessionStore } from "../state.js";

export class RevisionConsole {
  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    private store: SessionStore,
    private actor: string = "inspector-ui",
    private onApplied: () => void = () => {},
  ) {}

  async render(): Promise<void> {
    const state = this.store.get();
    this.root.replaceChildren(el("h3", undefined, "revision console"));
    this.root.appendChild(
      el("div", "version-line", `corpus version ${state.corpusVersion}`),
    );

    if (state.conflict) {
      const banner = el(
        "div",
        "conflict-banner",
        "corpus changed since this draft was started — reload to continue",
      );
      const reload = el("button", "reload-btn", "reload");
      reload.addEventListener("click", () => void this.reload());
      banner.appendChild(reload);
      this.root.appendChild(banner);
    }

    const list = el("div", "draft-list");
    if (!state.draft.length) {
      list.appendChild(el("div", "empty", "no drafted actions"));
    }
    for (const [i, action] of state.draft.entries()) {
      const row = el("div", "draft-row");
      row.appendChild(el("span", "draft-text", describeAction(action)));
      const preview = el("span", "draft-preview", "");
      void this.previewCount(action).then((n) => {
        if (n !== null) preview.textContent = `${n} entries affected`;
      });
      row.appendChild(preview);
      const drop = el("button", "drop-btn", "x");
      drop.addEventListener("click", () => this.store.removeDraft(i));
      row.appendChild(drop);
      list.appendChild(row);
    }
    this.root.appendChild(list);

    const submit = el("button", "submit-btn", "apply draft");
    submit.disabled = !state.draft.length || state.conflict;
    submit.addEventListener("click", () => void this.submit());
    this.root.appendChild(submit);

    const error = el("div", "error-line");
    error.id = "revision-error";
    this.root.appendChild(error);

    await this.renderLog();
  }

  private async previewCount(action: {
    block: number;
    action: string;
    [k: string]: unknown;
  }): Promise<number | null> {
    if (!["merge", "delete_concept", "zero_concept"].includes(action.action)) {
      return null;
    }
    try {
      const concepts = await this.client.concepts(action.block);
      const target = concepts.find((c) => c.id === action["m"]);
      return target ? target.n_entries : null;
    } catch {
      return null;
    }
  }

  private async submit(): Promise<void> {
    const state = this.store.get();
    if (!state.draft.length) return;
    try {
      const res = await this.client.reviseDocument(
        this.store.submitVersion(),
        this.actor,
        state.draft,
      );
      this.store.applied(res.corpus_version);
      this.onApplied();
    } catch (err) {
      if (err instanceof ConflictError) {
        this.store.markConflict();
      } else {
        const line = this.root.querySelector("#revision-error");
        if (line) line.textContent = String((err as Error).message ?? err);
      }
    }
  }

  private async reload(): Promise<void> {
    const meta = await this.client.meta();
    this.store.reloadResolved(meta.corpus_version);
  }

  private async renderLog(): Promise<void> {
    const entries = await this.client.log();
    const box = el("div", "log-timeline");
    box.appendChild(el("h4", undefined, `revision log (${entries.length})`));
    for (const entry of [...entries].reverse()) {
      box.appendChild(
        el(
          "div",
          "log-row",
          `v${entry.version_before} -> v${entry.version_after} [${entry.actor}] ` +
            describeAction(entry.action),
        ),
      );
    }
    this.root.appendChild(box);
  }
}
