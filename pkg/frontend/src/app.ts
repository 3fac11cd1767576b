/** Console wiring: one rendering pass per fetched payload, no local simulation.
 *
 * The console mutates nothing except through the service endpoints; every
 * displayed artifact carries the world version it was computed from, and a
 * stale banner appears whenever the server has moved past the last snapshot
 * this page rendered.
 */

import { ApiClient, ApiError } from "./api";
import { renderChoices } from "./choices";
import { renderEventItem, renderRecommendation } from "./feed";
import { renderMap } from "./map";
import { buildStrategyEditor } from "./strategy";
import { renderTimeline } from "./timeline";
import type {
  ChoiceSetPayload,
  EventDoc,
  PlanDoc,
  RecommendationDoc,
  ScheduleDoc,
  StrategyDoc,
  WorldPayload,
} from "./types";

export class ConsoleApp {
  version = 0;
  world: WorldPayload | null = null;
  choices: ChoiceSetPayload | null = null;
  schedule: ScheduleDoc | null = null;
  plan: PlanDoc | null = null;
  recommendations: RecommendationDoc[] = [];
  events: EventDoc[] = [];
  cursor = 0;
  connected = true;
  private mutationPending = false;

  private mapHost: HTMLElement;
  private detailHost: HTMLElement;
  private choicesHost: HTMLElement;
  private timelineHost: HTMLElement;
  private feedHost: HTMLElement;
  private inboxHost: HTMLElement;
  private statusHost: HTMLElement;
  private toastHost: HTMLElement;
  readonly editor;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {
    root.innerHTML = `
      <header class="topbar">
        <h1>field operations console</h1>
        <div class="status"></div>
        <div class="toast-host"></div>
      </header>
      <main>
        <div class="left">
          <section class="panel map-panel">
            <h2>Map</h2>
            <div class="map-host"></div>
            <pre class="detail" data-empty="click a map element for details"></pre>
          </section>
          <section class="panel timeline-panel">
            <h2>Schedule</h2>
            <div class="timeline-host"><p class="placeholder">no committed schedule</p></div>
          </section>
        </div>
        <div class="right">
          <div class="editor-host"></div>
          <section class="panel choices-panel">
            <h2>Choices</h2>
            <div class="choices-host"><p class="placeholder">submit a strategy first</p></div>
          </section>
          <section class="panel run-panel">
            <h2>Execution</h2>
            <div class="row">
              <button type="button" class="run-sim">run to quiescence</button>
              <button type="button" class="refresh-recs">fetch recommendations</button>
            </div>
          </section>
          <section class="panel inbox-panel">
            <h2>Recommendations</h2>
            <div class="inbox-host"><p class="placeholder">none yet</p></div>
          </section>
          <section class="panel feed-panel">
            <h2>Live ops feed</h2>
            <ul class="feed-host"></ul>
          </section>
        </div>
      </main>
    `;
    this.mapHost = root.querySelector(".map-host")!;
    this.detailHost = root.querySelector(".detail")!;
    this.choicesHost = root.querySelector(".choices-host")!;
    this.timelineHost = root.querySelector(".timeline-host")!;
    this.feedHost = root.querySelector(".feed-host")!;
    this.inboxHost = root.querySelector(".inbox-host")!;
    this.statusHost = root.querySelector(".status")!;
    this.toastHost = root.querySelector(".toast-host")!;

    this.editor = buildStrategyEditor((strategy) => void this.submitStrategy(strategy));
    root.querySelector(".editor-host")!.appendChild(this.editor.element);
    root.querySelector(".run-sim")!.addEventListener("click", () => void this.runSimulation());
    root
      .querySelector(".refresh-recs")!
      .addEventListener("click", () => void this.refreshRecommendations());
  }

  // ----- rendering -------------------------------------------------------

  private renderStatus(): void {
    const bits = [`version ${this.version}`];
    this.statusHost.innerHTML = "";
    const span = document.createElement("span");
    span.textContent = bits.join(" · ");
    this.statusHost.appendChild(span);
    if (!this.connected) {
      const badge = document.createElement("span");
      badge.className = "disconnected";
      badge.textContent = "disconnected — retrying";
      this.statusHost.appendChild(badge);
    }
  }

  private renderWorld(): void {
    if (!this.world) return;
    this.mapHost.innerHTML = "";
    this.mapHost.appendChild(
      renderMap(this.world.world, this.world.summaries, (text) => {
        this.detailHost.textContent = text;
      }),
    );
    const stale = this.world.version < this.version;
    let banner = this.root.querySelector(".stale-banner");
    if (stale && !banner) {
      banner = document.createElement("div");
      banner.className = "stale-banner";
      banner.textContent = "snapshot is stale — newer world version on the server";
      this.root.querySelector(".map-panel")!.prepend(banner);
    } else if (!stale && banner) {
      banner.remove();
    }
  }

  private renderChoicesPanel(): void {
    this.choicesHost.innerHTML = "";
    if (!this.choices) {
      this.choicesHost.innerHTML = '<p class="placeholder">submit a strategy first</p>';
      return;
    }
    this.choicesHost.appendChild(
      renderChoices(
        this.choices,
        this.plan,
        (id) => void this.commit(id),
        () => void this.delegateToSearch(),
      ),
    );
  }

  private renderTimelinePanel(): void {
    this.timelineHost.innerHTML = "";
    if (!this.schedule || !this.schedule.entries.length) {
      this.timelineHost.innerHTML = '<p class="placeholder">no committed schedule</p>';
      return;
    }
    this.timelineHost.appendChild(renderTimeline(this.schedule));
  }

  private renderInbox(): void {
    this.inboxHost.innerHTML = "";
    if (!this.recommendations.length) {
      this.inboxHost.innerHTML = '<p class="placeholder">none yet</p>';
      return;
    }
    for (const rec of this.recommendations) {
      this.inboxHost.appendChild(
        renderRecommendation(
          rec,
          (id) => void this.acceptRecommendation(id),
          (id) => this.dismissRecommendation(id),
        ),
      );
    }
  }

  private renderFeed(newEvents: EventDoc[]): void {
    for (const event of newEvents) {
      this.feedHost.appendChild(renderEventItem(event));
    }
  }

  toast(message: string): void {
    const el = document.createElement("div");
    el.className = "toast";
    el.textContent = message;
    this.toastHost.appendChild(el);
  }

  private async guarded<T>(action: () => Promise<T>): Promise<T | null> {
    // At most one in-flight mutation; conflicts surface as a refresh prompt.
    if (this.mutationPending) return null;
    this.mutationPending = true;
    try {
      return await action();
    } catch (err) {
      if (err instanceof ApiError && err.isVersionConflict) {
        this.toast("someone else changed the plan — refreshing");
        await this.refreshWorld();
        return null;
      }
      throw err;
    } finally {
      this.mutationPending = false;
    }
  }

  // ----- flows ------------------------------------------------------------

  async init(): Promise<void> {
    await this.refreshWorld();
    if (this.world) {
      this.editor.setOptions(
        this.world.world.task_types.map((t) => t.id),
        this.world.world.regions.map((r) => r.id),
      );
      this.editor.setThreads([
        {
          id: "T1",
          priority: 1,
          goal_task_types: [],
          goal_regions: [],
          min_agents: 0,
          max_agents: this.world.world.agents.length,
        },
      ]);
    }
  }

  async refreshWorld(): Promise<void> {
    this.world = await this.api.getWorld();
    this.version = this.world.version;
    this.renderWorld();
    this.renderStatus();
  }

  async submitStrategy(strategy: StrategyDoc): Promise<void> {
    const result = await this.guarded(() => this.api.postStrategy(strategy, this.version));
    if (!result) return;
    this.version = result.version;
    this.schedule = null;
    this.plan = null;
    this.renderStatus();
    await this.loadChoices();
  }

  async loadChoices(): Promise<void> {
    try {
      this.choices = await this.api.getChoices();
    } catch (err) {
      if (err instanceof ApiError && err.body.error === "infeasible") {
        this.toast(`strategy infeasible: threads ${(err.body.threads ?? []).join(", ")}`);
        this.choices = null;
        this.renderChoicesPanel();
        return;
      }
      throw err;
    }
    this.renderChoicesPanel();
  }

  async commit(decisionId: string): Promise<void> {
    const result = await this.guarded(() => this.api.postDecision(decisionId, this.version));
    if (!result) return;
    this.version = result.version;
    this.schedule = result.schedule;
    this.renderStatus();
    this.renderTimelinePanel();
    await this.refreshWorld();
  }

  async delegateToSearch(budget = 0): Promise<PlanDoc | null> {
    const submitted = await this.api.postSearch(budget);
    for (let attempt = 0; attempt < 600; attempt += 1) {
      const polled = await this.api.getSearch(submitted.job);
      if (polled.status === "done" && polled.plan) {
        this.plan = polled.plan;
        this.renderChoicesPanel();
        return this.plan;
      }
      if (polled.status === "error") {
        this.toast(`search failed: ${polled.detail ?? "unknown error"}`);
        return null;
      }
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
    this.toast("search still running; poll again later");
    return null;
  }

  async refreshRecommendations(): Promise<void> {
    try {
      const payload = await this.api.getRecommendations();
      this.recommendations = payload.recommendations;
    } catch (err) {
      if (err instanceof ApiError) {
        this.toast(`recommendations unavailable: ${err.body.detail ?? err.body.error}`);
        return;
      }
      throw err;
    }
    this.renderInbox();
  }

  async acceptRecommendation(id: string): Promise<void> {
    const result = await this.guarded(() => this.api.postRefine([id], this.version));
    if (!result) return;
    this.version = result.version;
    this.recommendations = this.recommendations.filter((r) => r.id !== id);
    this.renderInbox();
    this.renderStatus();
    this.editor.setThreads(
      result.strategy.threads.map((t) => ({
        id: t.id,
        priority: t.priority,
        goal_task_types: t.goal_task_types,
        goal_regions: t.goal_regions,
        min_agents: t.min_agents,
        max_agents: t.max_agents,
      })),
    );
    await this.loadChoices();
  }

  dismissRecommendation(id: string): void {
    this.recommendations = this.recommendations.filter((r) => r.id !== id);
    this.renderInbox();
  }

  async runSimulation(): Promise<void> {
    const result = await this.guarded(() => this.api.simRun({ tick: 1.0 }, this.version));
    if (!result) return;
    this.version = result.version;
    this.renderStatus();
    await this.pollEventsOnce();
    await this.refreshWorld();
    try {
      const payload = await this.api.getSchedule();
      this.schedule = payload.schedule;
      this.renderTimelinePanel();
    } catch {
      // no schedule after the run; leave the panel as-is
    }
  }

  async pollEventsOnce(timeoutSeconds = 0): Promise<number> {
    try {
      const payload = await this.api.getEvents(this.cursor, timeoutSeconds);
      this.connected = true;
      this.cursor = payload.next;
      this.events.push(...payload.events);
      this.renderFeed(payload.events);
      if (payload.version !== this.version) {
        this.version = payload.version;
        await this.refreshWorld();
      }
      this.renderStatus();
      return payload.events.length;
    } catch {
      this.connected = false;
      this.renderStatus();
      return 0;
    }
  }

  startPolling(intervalMs = 1000): () => void {
    let stopped = false;
    const tick = async () => {
      if (stopped) return;
      await this.pollEventsOnce(20);
      setTimeout(tick, this.connected ? 0 : intervalMs);
    };
    void tick();
    return () => {
      stopped = true;
    };
  }
}

export function mount(root: HTMLElement, base = "/api/v1"): ConsoleApp {
  const app = new ConsoleApp(root, new ApiClient(base));
  void app.init();
  return app;
}
