/**
 * Console round-trip against the recorded /api/v1 wire exchange: submit the
 * two-thread strategy, commit the top-ranked choice, run the two-phase
 * simulation, and verify the feed shows both completions plus at least one
 * recommendation in the inbox.
 *
 * The fetch stub replays responses captured from the real service for the
 * console fixture scenario, so every payload shape here is authentic.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { ConsoleApp } from "../src/app";
import type { StrategyDoc } from "../src/types";
import flow from "./fixtures/console_flow.json";

interface Exchange {
  method: string;
  path: string;
  request: unknown;
  status: number;
  response: unknown;
}

function normalize(path: string): string {
  return path.replace(/[?&]timeout=[0-9.]+/, "");
}

class FetchStub {
  private queues = new Map<string, Exchange[]>();
  calls: string[] = [];

  constructor(exchanges: Exchange[]) {
    for (const exchange of exchanges) {
      const key = `${exchange.method} ${normalize(exchange.path)}`;
      const queue = this.queues.get(key) ?? [];
      queue.push(exchange);
      this.queues.set(key, queue);
    }
  }

  fetch = async (url: string | URL | Request, init?: RequestInit): Promise<Response> => {
    const raw = String(url).replace(/^\/api\/v1/, "");
    const method = init?.method ?? "GET";
    const key = `${method} ${normalize(raw)}`;
    this.calls.push(key);
    const queue = this.queues.get(key);
    if (!queue || !queue.length) {
      return new Response(JSON.stringify({ error: "engine", detail: `unstubbed ${key}` }), {
        status: 500,
        headers: { "content-type": "application/json" },
      });
    }
    // Consume in order; the last response sticks for repeated polls.
    const exchange = queue.length > 1 ? queue.shift()! : queue[0];
    return new Response(JSON.stringify(exchange.response), {
      status: exchange.status,
      headers: { "content-type": "application/json" },
    });
  };
}

const exchanges = flow as unknown as Exchange[];
const strategyDoc = (
  exchanges.find((e) => e.method === "POST" && e.path === "/strategy")!.request as {
    strategy: StrategyDoc;
  }
).strategy;
const topChoiceId = (
  exchanges.find((e) => e.method === "POST" && e.path === "/decision")!.request as { id: string }
).id;

describe("console round-trip", () => {
  let app: ConsoleApp;
  let root: HTMLElement;

  beforeEach(async () => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app")!;
    const stub = new FetchStub(exchanges);
    app = new ConsoleApp(root, new ApiClient("/api/v1", stub.fetch));
    await app.init();
  });

  it("renders the map from the world payload", () => {
    expect(root.querySelectorAll(".map .region").length).toBe(1);
    expect(root.querySelectorAll(".map .agent").length).toBe(2);
  });

  it("completes the full operator flow", async () => {
    expect(strategyDoc.threads.length).toBe(2);
    await app.submitStrategy(strategyDoc);
    // choices panel rendered with the ranked list
    const items = root.querySelectorAll(".choice");
    expect(items.length).toBeGreaterThanOrEqual(1);
    expect(items[0].getAttribute("data-decision-id")).toBe(topChoiceId);

    await app.commit(topChoiceId);
    expect(root.querySelectorAll(".timeline-bar").length).toBeGreaterThanOrEqual(1);
    expect(root.querySelector(".timeline-adaption")).not.toBeNull();

    const plan = await app.delegateToSearch();
    expect(plan?.proven_optimal).toBe(true);
    expect(root.querySelector(".badge-optimal")).not.toBeNull();

    await app.refreshRecommendations();
    const cards = root.querySelectorAll(".recommendation");
    expect(cards.length).toBeGreaterThanOrEqual(1);

    await app.runSimulation();
    const done = root.querySelectorAll(".feed-host .event-task_done");
    expect(done.length).toBe(2);
    const replans = root.querySelectorAll(".feed-host .event-replan_triggered");
    expect(replans.length).toBeGreaterThanOrEqual(1);

    // displayed artifacts carry the server's version
    expect(app.version).toBeGreaterThanOrEqual(3);
    expect(root.querySelector(".status")!.textContent).toContain(`version ${app.version}`);
  });

  it("shows a conflict toast and refreshes on version conflicts", async () => {
    const conflictStub: typeof fetch = async (url, init) => {
      const raw = String(url);
      if (raw.includes("/strategy")) {
        return new Response(
          JSON.stringify({ error: "version_conflict", expected: 0, actual: 5 }),
          { status: 409, headers: { "content-type": "application/json" } },
        );
      }
      return new FetchStub(exchanges).fetch(url, init);
    };
    const conflicted = new ConsoleApp(root, new ApiClient("/api/v1", conflictStub));
    await conflicted.init();
    await conflicted.submitStrategy(strategyDoc);
    expect(root.querySelector(".toast")!.textContent).toContain("changed the plan");
  });

  it("marks the connection lost when polling fails, then recovers", async () => {
    const flaky: typeof fetch = async () => {
      throw new Error("network down");
    };
    const offline = new ConsoleApp(root, new ApiClient("/api/v1", flaky));
    await offline.pollEventsOnce();
    expect(root.querySelector(".disconnected")).not.toBeNull();
  });

  it("idle poll leaves the feed unchanged", async () => {
    const before = root.querySelectorAll(".feed-host li").length;
    const stub = new FetchStub([
      {
        method: "GET",
        path: "/events?since=0",
        request: null,
        status: 200,
        response: { version: 0, next: 0, events: [] },
      },
    ]);
    const quiet = new ConsoleApp(root, new ApiClient("/api/v1", stub.fetch));
    const count = await quiet.pollEventsOnce();
    expect(count).toBe(0);
    expect(root.querySelectorAll(".feed-host li").length).toBe(before);
  });
});
