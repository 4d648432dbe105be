/** Entry point: wires the four panels to one session store. */

import { ApiClient } from "./api.js";
import { SessionStore } from "./state.js";
import { ConceptBrowser } from "./views/blocks.js";
import { RevisionConsole } from "./views/revision.js";
import { SudokuDashboard } from "./views/dashboard.js";
import { WhatIfPanel } from "./views/whatif.js";

export async function bootstrap(
  root: HTMLElement,
  client: ApiClient = new ApiClient(""),
): Promise<{
  store: SessionStore;
  browser: ConceptBrowser;
  console: RevisionConsole;
  whatif: WhatIfPanel;
  dashboard: SudokuDashboard;
}> {
  const meta = await client.meta();
  const store = new SessionStore(meta.corpus_version);

  root.replaceChildren();
  const header = document.createElement("header");
  header.innerHTML = `<h1>concept inspector</h1><span id="corpus-version"></span>`;
  const main = document.createElement("main");
  const browserEl = panel(main, "browser");
  const revisionEl = panel(main, "revision");
  const whatifEl = panel(main, "whatif");
  const dashboardEl = panel(main, "dashboard");
  root.append(header, main);

  const browser = new ConceptBrowser(browserEl, client, store);
  const console_ = new RevisionConsole(revisionEl, client, store, "inspector-ui", () => {
    void browser.render();
  });
  const whatif = new WhatIfPanel(whatifEl, client);
  const dashboard = new SudokuDashboard(dashboardEl, client, store, meta.n_blocks === 16 ? "full" : "easy");

  store.subscribe((state) => {
    const badge = root.querySelector("#corpus-version");
    if (badge) badge.textContent = `corpus v${state.corpusVersion}`;
    void console_.render();
  });

  await Promise.all([
    browser.render(),
    console_.render(),
    whatif.render(),
    dashboard.render(),
  ]);
  const badge = root.querySelector("#corpus-version");
  if (badge) badge.textContent = `corpus v${meta.corpus_version}`;
  return { store, browser, console: console_, whatif, dashboard };
}

function panel(parent: HTMLElement, id: string): HTMLElement {
  const node = document.createElement("section");
  node.id = id;
  parent.appendChild(node);
  return node;
}

declare global {
  interface Window {
    hardbindBootstrapped?: boolean;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root && !window.hardbindBootstrapped) {
    window.hardbindBootstrapped = true;
    void bootstrap(root);
  }
}
