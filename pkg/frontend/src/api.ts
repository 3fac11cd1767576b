/** Typed client for the /api/v1 endpoints; the console's only mutation path. */

import type {
  ApiErrorBody,
  ChoiceSetPayload,
  EventDoc,
  EventsPayload,
  PlanDoc,
  RecommendationDoc,
  ScheduleDoc,
  StrategyDoc,
  WorldPayload,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.detail ?? body.error);
  }

  get isVersionConflict(): boolean {
    return this.body.error === "version_conflict";
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private base = "/api/v1",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: "GET" | "POST", path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const response = await this.fetchImpl(`${this.base}${path}`, init);
    const parsed = await response.json();
    if (!response.ok) throw new ApiError(response.status, parsed as ApiErrorBody);
    return parsed as T;
  }

  getWorld(): Promise<WorldPayload> {
    return this.request("GET", "/world");
  }

  postStrategy(strategy: StrategyDoc, expectedVersion: number): Promise<{ version: number }> {
    return this.request("POST", "/strategy", { strategy, expected_version: expectedVersion });
  }

  getChoices(cap = 20): Promise<ChoiceSetPayload> {
    return this.request("GET", `/choices?cap=${cap}`);
  }

  postDecision(id: string, expectedVersion: number): Promise<{ version: number; schedule: ScheduleDoc }> {
    return this.request("POST", "/decision", { id, expected_version: expectedVersion });
  }

  getSchedule(): Promise<{ version: number; schedule: ScheduleDoc }> {
    return this.request("GET", "/schedule");
  }

  postSearch(budget = 0): Promise<{ job: string; version: number }> {
    return this.request("POST", "/search", { budget });
  }

  getSearch(job: string): Promise<{ status: string; plan?: PlanDoc; detail?: string }> {
    return this.request("GET", `/search/${job}`);
  }

  getRecommendations(): Promise<{ version: number; recommendations: RecommendationDoc[] }> {
    return this.request("GET", "/recommendations");
  }

  postRefine(accepted: string[], expectedVersion: number): Promise<{ version: number; strategy: StrategyDoc }> {
    return this.request("POST", "/refine", { accepted, expected_version: expectedVersion });
  }

  simRun(
    config: { tick?: number; stop_at?: number | null; seed?: number },
    expectedVersion: number,
  ): Promise<{ version: number; replans: number; events: number; time: number }> {
    return this.request("POST", "/sim/run", { config, expected_version: expectedVersion });
  }

  simStep(dt: number, expectedVersion: number): Promise<{ version: number; time: number; events: EventDoc[] }> {
    return this.request("POST", "/sim/step", { dt, expected_version: expectedVersion });
  }

  getEvents(since: number, timeoutSeconds = 0): Promise<EventsPayload> {
    return this.request("GET", `/events?since=${since}&timeout=${timeoutSeconds}`);
  }
}
