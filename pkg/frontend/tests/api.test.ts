import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, ConflictError } from "../src/api.js";

function fakeFetch(
  handler: (url: string, init?: RequestInit) => { status: number; body: unknown },
) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const { status, body } = handler(url, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("prefixes paths with the API root", async () => {
    const { impl, calls } = fakeFetch(() => ({
      status: 200,
      body: { corpus_version: 7 },
    }));
    const client = new ApiClient("http://x:1", impl);
    await client.meta();
    expect(calls[0]?.url).toBe("http://x:1/api/v1/meta");
  });

  it("sends the drafted version with revision documents", async () => {
    const { impl, calls } = fakeFetch(() => ({
      status: 200,
      body: { corpus_version: 4, applied: 2 },
    }));
    const client = new ApiClient("", impl);
    await client.reviseDocument(3, "ui", [
      { block: 1, action: "merge", m: 9, b: 4 },
    ]);
    const sent = JSON.parse(String(calls[0]?.init?.body));
    expect(sent.version).toBe(3);
    expect(sent.document.schema).toBe("feedback/1");
    expect(sent.document.actions).toHaveLength(1);
  });

  it("raises ConflictError on 409", async () => {
    const { impl } = fakeFetch(() => ({
      status: 409,
      body: { detail: "stale version 1, corpus is at 2" },
    }));
    const client = new ApiClient("", impl);
    await expect(
      client.revise(1, "ui", { block: 0, action: "merge", m: 1, b: 2 }),
    ).rejects.toBeInstanceOf(ConflictError);
  });

  it("raises ApiError with the server detail otherwise", async () => {
    const { impl } = fakeFetch(() => ({
      status: 422,
      body: { detail: "concept 9 is not live in this block" },
    }));
    const client = new ApiClient("", impl);
    const err = await client
      .concepts(0)
      .then(() => null)
      .catch((e: ApiError) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err?.status).toBe(422);
    expect(err?.message).toContain("not live");
  });

  it("polls jobs until they settle", async () => {
    let polls = 0;
    const { impl } = fakeFetch((url) => {
      if (url.endsWith("/jobs/j1")) {
        polls += 1;
        return polls < 3
          ? { status: 200, body: { status: "running" } }
          : {
              status: 200,
              body: { status: "done", result: { format: "sudoku-report/1", rows: [] } },
            };
      }
      return { status: 404, body: {} };
    });
    const client = new ApiClient("", impl);
    const done = await client.pollJob("j1", 1);
    expect(done.status).toBe("done");
    expect(polls).toBe(3);
  });
});
