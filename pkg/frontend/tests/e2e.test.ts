// @vitest-environment jsdom
//
// End-to-end: spawn the real backend over a freshly fitted duplicate-
// concept workspace, mount the UI in jsdom, and click through the
// merge flow — duplicate purple pair found via the concept browser,
// merge drafted from the similarity affordance, draft submitted through
// the revision console — then verify over the live API that inference
// only ever emits the merged id, and that the dashboard renders a
// solve-rate delta after the revision.
//
// Requires python3 with the hardbind package importable; skipped
// otherwise (and under HARDBIND_SKIP_E2E=1).

import { spawn, spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { bootstrap } from "../src/main.js";

const PORT = 8741;
const BASE = `http://127.0.0.1:${PORT}`;

function pythonAvailable(): boolean {
  if (process.env.HARDBIND_SKIP_E2E === "1") return false;
  const probe = spawnSync("python3", ["-c", "import hardbind"], { timeout: 30_000 });
  return probe.status === 0;
}

const enabled = pythonAvailable();
const suite = enabled ? describe : describe.skip;

let server: ReturnType<typeof spawn> | null = null;

function cli(args: string[], cwd: string): void {
  const res = spawnSync("python3", ["-m", "hardbind.cli", ...args], {
    cwd,
    timeout: 300_000,
  });
  if (res.status !== 0) {
    throw new Error(`hardbind ${args[0]} failed: ${res.stderr?.toString()}`);
  }
}

async function waitForServer(client: ApiClient): Promise<void> {
  for (let i = 0; i < 200; i++) {
    try {
      await client.meta();
      return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
  }
  throw new Error("backend did not come up");
}

async function waitFor(
  predicate: () => boolean,
  what: string,
  tries = 400,
): Promise<void> {
  for (let i = 0; i < tries; i++) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
  throw new Error(`timed out waiting for ${what}`);
}

const nodeFetch = (input: string, init?: RequestInit) => fetch(input, init);

suite("browser round trip against a live backend", () => {
  let client: ApiClient;

  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), "hardbind-e2e-"));
    // duplicate-concept world: two clean clusters per value
    cli(
      [
        "gen-data", "--schema", "clevr-easy", "--count", "200", "--out", "enc.bsenc",
        "--block-dim", "12", "--n-slots", "2", "--seed", "6", "--dup", "2",
        "--sigma", "0.0",
      ],
      dir,
    );
    cli(
      [
        "fit", "--encodings", "enc.bsenc", "--out", "corpus.txt", "--grid", "5,10",
        "--exemplars", "2",
      ],
      dir,
    );
    writeFileSync(
      join(dir, "ws.json"),
      JSON.stringify({
        format: "workspace/1",
        encoder_config: "enc.bsenc.encoder.json",
        encodings: "enc.bsenc",
        corpus: "corpus.txt",
        revision_log: "log.jsonl",
      }),
    );
    server = spawn(
      "python3",
      ["-m", "hardbind.cli", "serve", "--workspace", "ws.json", "--port", String(PORT)],
      { cwd: dir, stdio: "ignore" },
    );
    client = new ApiClient(BASE, nodeFetch);
    await waitForServer(client);
  }, 300_000);

  afterAll(() => {
    server?.kill();
  });

  it("merges the duplicate purple pair through the console and the merged id disappears from inference", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const app = document.getElementById("app")!;
    const ui = await bootstrap(app, client);

    // identify the color block in the rendered block list
    const colorRow = [...app.querySelectorAll(".block-row")].find((r) =>
      r.textContent?.includes("color"),
    ) as HTMLElement;
    expect(colorRow).toBeTruthy();
    const colorBlock = Number(colorRow.dataset.block);
    colorRow.click();
    await waitFor(
      () => app.querySelectorAll(".concept-chip").length > 0,
      "concept chips",
    );

    // find the duplicate purple pair by reading each concept's card
    let purpleConcept: number | null = null;
    let mergePartner: number | null = null;
    for (const chip of [...app.querySelectorAll(".concept-chip")]) {
      const id = Number((chip as HTMLElement).dataset.concept);
      if (id === 0) continue;
      (chip as HTMLElement).click();
      await waitFor(
        () =>
          app.querySelector(`.concept-card[data-concept="${id}"]`) !== null,
        `card of concept ${id}`,
      );
      const colorSection = [...app.querySelectorAll(".hist")].find(
        (s) => s.querySelector("h5")?.textContent === "color",
      );
      const labels = [...(colorSection?.querySelectorAll(".hist-label") ?? [])].map(
        (n) => n.textContent,
      );
      if (labels.length && labels.every((l) => l === "purple")) {
        purpleConcept = id;
        // the nearest similar concept is the duplicate; its merge
        // affordance drafts merge(nearest -> this)
        const simRow = app.querySelector(".sim-row");
        const match = simRow?.textContent?.match(/concept (\d+)/);
        mergePartner = match ? Number(match[1]) : null;
        break;
      }
    }
    expect(purpleConcept).not.toBeNull();
    expect(mergePartner).not.toBeNull();

    // the partner card must also be purple: the duplicate pair
    const partnerCard = await client.card(colorBlock, mergePartner!);
    const partnerColors = new Set(
      partnerCard.matched.map((m) => m.factors?.["color"]),
    );
    expect([...partnerColors]).toEqual(["purple"]);

    (app.querySelector(".merge-affordance") as HTMLElement).click();
    await waitFor(
      () => app.querySelector(".draft-row") !== null,
      "draft row in the console",
    );
    expect(app.querySelector(".draft-text")?.textContent).toContain(
      `merge concept ${mergePartner} into ${purpleConcept}`,
    );

    const versionBefore = ui.store.get().corpusVersion;
    (app.querySelector(".submit-btn") as HTMLElement).click();
    await waitFor(
      () => ui.store.get().corpusVersion === versionBefore + 1,
      "applied revision",
    );

    // live inference across the whole workspace: merged id never appears
    const meta = await client.meta();
    expect(meta.corpus_version).toBe(versionBefore + 1);
    const scenes = await client.scenes(0, 200);
    for (const scene of scenes.scenes) {
      const inferred = await client.infer(scene.scene);
      expect(inferred.corpus_version).toBe(versionBefore + 1);
      for (const slot of inferred.slots) {
        expect(slot.concepts[colorBlock]).not.toBe(mergePartner);
      }
    }

    // the log timeline shows the revision
    const log = await client.log();
    expect(log).toHaveLength(1);
    expect(log[0]?.action).toMatchObject({
      action: "merge",
      m: mergePartner,
      b: purpleConcept,
    });
  }, 240_000);

  it("dashboard renders a solve-rate delta across the revision", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const app = document.getElementById("app")!;
    await bootstrap(app, client);
    const dashboard = app.querySelector("#dashboard")!;

    (dashboard.querySelector(".eval-btn") as HTMLElement).click();
    await waitFor(
      () => dashboard.querySelectorAll(".bar-fill").length > 0,
      "first evaluation bars",
      2400,
    );
    expect(dashboard.querySelector(".delta")).toBeNull();

    (dashboard.querySelector(".eval-btn") as HTMLElement).click();
    await waitFor(
      () => dashboard.querySelector(".delta") !== null,
      "delta annotation",
      2400,
    );
    const delta = dashboard.querySelector(".delta")!;
    expect(delta.textContent).toMatch(/vs last/);
  }, 240_000);
});
