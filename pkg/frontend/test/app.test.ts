import { readFileSync } from "node:fs";
import { join } from "node:path";
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatApp } from "../src/app.js";
import type { RoundResponse } from "../src/types.js";

interface TranscriptEntry {
  text: string;
  response: RoundResponse;
}

const transcript: TranscriptEntry[] = JSON.parse(
  readFileSync(join(__dirname, "..", "fixtures", "transcript.json"), "utf-8"),
);

type Route = (init?: RequestInit) => { status: number; body: unknown };

/** Minimal fixture server: routes POSTs to canned JSON responses. */
function fixtureFetch(routes: Record<string, Route>): typeof fetch {
  return (async (url: RequestInfo | URL, init?: RequestInit) => {
    const path = String(url).replace(/^https?:\/\/[^/]+/, "");
    const route = routes[path];
    if (!route) {
      return new Response(JSON.stringify({ detail: "not found" }), { status: 404 });
    }
    const { status, body } = route(init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
}

function transcriptServer(failures = 0) {
  let roundCalls = 0;
  let failuresLeft = failures;
  const routes: Record<string, Route> = {
    "/sessions": () => ({ status: 200, body: { session_id: "fx" } }),
    "/sessions/fx/rounds": (init) => {
      if (failuresLeft > 0) {
        failuresLeft -= 1;
        return { status: 500, body: { detail: "synthetic failure" } };
      }
      const sent = JSON.parse(String(init?.body ?? "{}")) as { text: string };
      const entry = transcript[roundCalls];
      expect(sent.text).toBe(entry.text);
      roundCalls += 1;
      return { status: 200, body: entry.response };
    },
  };
  return { routes, getCalls: () => roundCalls };
}

describe("chat console", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<div id='app'></div>";
    root = document.getElementById("app")!;
  });

  it("replays the four-round scripted transcript into four panels in order", async () => {
    const server = transcriptServer();
    const app = new ChatApp(root, new ApiClient("http://svc", fixtureFetch(server.routes)));
    await app.start();
    for (const entry of transcript) {
      const response = await app.send(entry.text);
      expect(response).not.toBeNull();
    }
    const rounds = root.querySelectorAll(".round");
    expect(rounds.length).toBe(4);
    const kinds = [...rounds].map(
      (r) => r.querySelector(".panel")?.className.replace("panel panel-", ""),
    );
    expect(kinds).toEqual(["cluster_map", "heatmap", "parallel_coords", "line"]);
    const indices = [...rounds].map((r) => (r as HTMLElement).dataset.index);
    expect(indices).toEqual(["0", "1", "2", "3"]);
    expect(server.getCalls()).toBe(4);
  });

  it("disables send for empty input", async () => {
    const server = transcriptServer();
    const app = new ChatApp(root, new ApiClient("http://svc", fixtureFetch(server.routes)));
    await app.start();
    expect(app.sendButton.disabled).toBe(true);
    app.input.value = "   ";
    app.input.dispatchEvent(new Event("input"));
    expect(app.sendButton.disabled).toBe(true);
    app.input.value = "cluster the sensors into 3 groups seed 4";
    app.input.dispatchEvent(new Event("input"));
    expect(app.sendButton.disabled).toBe(false);
    const ignored = await app.send("");
    expect(ignored).toBeNull();
    expect(server.getCalls()).toBe(0);
  });

  it("shows an error banner on a 500 and preserves session state; retry succeeds", async () => {
    const server = transcriptServer(1);
    const app = new ChatApp(root, new ApiClient("http://svc", fixtureFetch(server.routes)));
    await app.start();

    const first = await app.send(transcript[0].text);
    expect(first).toBeNull();
    expect(app.errorBanner.classList.contains("hidden")).toBe(false);
    expect(app.errorBanner.textContent).toContain("synthetic failure");
    expect(root.querySelectorAll(".round").length).toBe(0);

    const retry = app.errorBanner.querySelector("button.retry") as HTMLButtonElement;
    expect(retry).not.toBeNull();
    retry.click();
    await new Promise((resolve) => setTimeout(resolve, 0));

    expect(app.errorBanner.classList.contains("hidden")).toBe(true);
    expect(root.querySelectorAll(".round").length).toBe(1);
    expect(server.getCalls()).toBe(1);
  });

  it("renders clarification rounds as text", async () => {
    const routes: Record<string, Route> = {
      "/sessions": () => ({ status: 200, body: { session_id: "fx" } }),
      "/sessions/fx/rounds": () => ({
        status: 200,
        body: {
          round_index: 0,
          plan: null,
          payloads: [],
          clarification: "Please describe an analysis task.",
        },
      }),
    };
    const app = new ChatApp(root, new ApiClient("http://svc", fixtureFetch(routes)));
    await app.start();
    await app.send("hmm?");
    expect(root.querySelector(".clarification")?.textContent).toContain(
      "Please describe",
    );
  });
});
