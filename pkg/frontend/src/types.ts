/** Wire payload types mirroring the /api/v1 documents. */

export type LonLat = [number, number];

export interface AgentDoc {
  id: string;
  kind: string;
  location: LonLat;
  speed: number;
  capabilities: string[];
  status: "available" | "assigned" | "working" | "disabled";
  assigned_thread: string | null;
}

export interface RegionDoc {
  id: string;
  name: string;
  boundary: LonLat[];
}

export interface TaskTypeDoc {
  id: string;
  unit_workload: number;
}

export interface RevealRuleDoc {
  successor_type: string;
  expected_count: number;
}

export interface MacroTaskDoc {
  id: string;
  task_type: string;
  region: string;
  quantity: number;
  state: "hidden" | "revealed" | "in_progress" | "done";
  reveal_rules: RevealRuleDoc[];
  certainty: number;
  completed: number;
}

export interface RefugeDoc {
  id: string;
  location: LonLat;
  capacity: number;
  occupied: number;
}

export interface CasualtyClusterDoc {
  id: string;
  location: LonLat;
  count: number;
  severity: number;
}

export interface WorldDoc {
  time: number;
  agents: AgentDoc[];
  regions: RegionDoc[];
  task_types: TaskTypeDoc[];
  macro_tasks: MacroTaskDoc[];
  refuges: RefugeDoc[];
  casualty_clusters: CasualtyClusterDoc[];
}

export interface StateCounts {
  revealed: number;
  in_progress: number;
  done: number;
}

export interface RegionSummaryDoc {
  region: string;
  per_type_counts: Record<string, StateCounts>;
  total_remaining_workload: number;
}

export interface WorldPayload {
  version: number;
  world_digest: string;
  world: WorldDoc;
  summaries: RegionSummaryDoc[];
}

export interface ThreadDoc {
  id: string;
  priority: number;
  goal_task_types: string[];
  goal_regions: string[];
  min_agents: number;
  max_agents: number;
}

export interface StrategyDoc {
  id: string;
  objective: string;
  threads: ThreadDoc[];
}

export interface DecisionDoc {
  id: string;
  strategy: string;
  assignment: Record<string, string>;
  score: number | "inf" | null;
}

export interface ChoiceSetPayload {
  version: number;
  world_digest: string;
  choices: { decisions: DecisionDoc[]; truncated: boolean };
}

export interface EntryDoc {
  task: string;
  task_type: string;
  agents: string[];
  region: string;
  start: number;
  finish: number;
  estimated_done: number;
  estimated_reveals: [string, number][];
}

export interface ScheduleDoc {
  decision: DecisionDoc;
  entries: EntryDoc[];
  adaption_time: number | "inf";
  makespan: number;
  created_at: number;
  world_digest: string;
  origins: Record<string, LonLat>;
}

export interface PlanDoc {
  decision: DecisionDoc;
  schedule: ScheduleDoc;
  makespan: number | "inf";
  nodes_expanded: number;
  proven_optimal: boolean;
}

export interface EventDoc {
  seq?: number;
  at: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface RecommendationDoc {
  id: string;
  kind: string;
  subject: string[];
  rationale: string;
  predicted_gain: number;
  details: Record<string, unknown>;
}

export interface EventsPayload {
  version: number;
  next: number;
  events: EventDoc[];
}

export interface ApiErrorBody {
  error: string;
  detail?: string;
  violations?: { path: string; message: string }[];
  threads?: string[];
  expected?: number;
  actual?: number;
}
