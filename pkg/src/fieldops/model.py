"""Domain model: the value types every other module consumes.

All types are immutable once constructed. Construction is tolerant (it
coerces collections but does not reject bad values); `validate_world`
reports every invariant breach instead of raising, so malformed input can
be diagnosed in one pass.

Time is real-valued seconds since a per-scenario epoch; comparisons use an
absolute epsilon of 1e-6 s. Micro-task counts and person counts are
integers; workloads and durations are reals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, NamedTuple

TIME_EPS = 1e-6

# Serialized sentinel for an unbounded adaption time.
INF = math.inf


class AgentStatus(str, Enum):
    AVAILABLE = "available"
    ASSIGNED = "assigned"
    WORKING = "working"
    DISABLED = "disabled"


class TaskState(str, Enum):
    HIDDEN = "hidden"
    REVEALED = "revealed"
    IN_PROGRESS = "in_progress"
    DONE = "done"


class EventKind(str, Enum):
    TASK_STARTED = "task_started"
    TASK_PROGRESS = "task_progress"
    TASK_DONE = "task_done"
    TASKS_REVEALED = "tasks_revealed"
    AGENT_RELEASED = "agent_released"
    AGENT_DISABLED = "agent_disabled"
    REPLAN_TRIGGERED = "replan_triggered"
    ALLOCATION_MADE = "allocation_made"


class GeoPoint(NamedTuple):
    """WGS84 coordinate, degrees. Serialized as a [lon, lat] pair."""

    lon: float
    lat: float


@dataclass(frozen=True, slots=True)
class Region:
    """A macro geographic zone bounded by a simple closed polygon.

    The boundary lists vertices in order without repeating the first.
    """

    id: str
    name: str
    boundary: tuple[GeoPoint, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "boundary", tuple(GeoPoint(*p) for p in self.boundary)
        )


@dataclass(frozen=True, slots=True)
class TaskType:
    id: str
    unit_workload: float  # agent-seconds per micro task


@dataclass(frozen=True, slots=True)
class Agent:
    """A field unit or robot: position, speed, and what it can do."""

    id: str
    kind: str
    location: GeoPoint
    speed: float  # meters/second
    capabilities: frozenset[str]
    status: AgentStatus = AgentStatus.AVAILABLE
    assigned_thread: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "location", GeoPoint(*self.location))
        object.__setattr__(self, "capabilities", frozenset(self.capabilities))
        object.__setattr__(self, "status", AgentStatus(self.status))


@dataclass(frozen=True, slots=True)
class RevealRule:
    """Successor tasks expected to appear here once the parent completes."""

    successor_type: str
    expected_count: int


@dataclass(frozen=True, slots=True)
class MacroTask:
    """A region-level bundle of micro tasks of one type.

    `quantity` counts micro tasks still to do; `completed` accumulates
    finished ones, so quantity + completed is the total ever known.
    `certainty` is carried as data and displayed, never used in schedule
    arithmetic.
    """

    id: str
    task_type: str
    region: str
    quantity: int
    state: TaskState = TaskState.REVEALED
    reveal_rules: tuple[RevealRule, ...] = ()
    certainty: float = 1.0
    completed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "state", TaskState(self.state))
        object.__setattr__(
            self,
            "reveal_rules",
            tuple(
                r if isinstance(r, RevealRule) else RevealRule(*r)
                for r in self.reveal_rules
            ),
        )

    @property
    def remaining(self) -> int:
        return self.quantity


@dataclass(frozen=True, slots=True)
class Refuge:
    id: str
    location: GeoPoint
    capacity: int
    occupied: int = 0

    def __post_init__(self):
        object.__setattr__(self, "location", GeoPoint(*self.location))

    @property
    def free(self) -> int:
        return self.capacity - self.occupied


@dataclass(frozen=True, slots=True)
class CasualtyCluster:
    id: str
    location: GeoPoint
    count: int
    severity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "location", GeoPoint(*self.location))


@dataclass(frozen=True, slots=True)
class Thread:
    """A prioritized sub-goal: task types x regions with agent-count bounds.

    priority 1 is highest; an empty goal_regions set means all regions.
    """

    id: str
    priority: int
    goal_task_types: frozenset[str]
    max_agents: int
    min_agents: int = 0
    goal_regions: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "goal_task_types", frozenset(self.goal_task_types))
        object.__setattr__(self, "goal_regions", frozenset(self.goal_regions))

    def covers_region(self, region_id: str) -> bool:
        return not self.goal_regions or region_id in self.goal_regions


@dataclass(frozen=True, slots=True)
class Strategy:
    """A human objective decomposed into prioritized threads.

    Threads are normalized to ascending id order so equal strategies
    compare and serialize identically regardless of construction order.
    """

    id: str
    objective: str
    threads: tuple[Thread, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "threads", tuple(sorted(self.threads, key=lambda t: t.id))
        )

    def thread(self, thread_id: str) -> Thread:
        for t in self.threads:
            if t.id == thread_id:
                return t
        raise KeyError(thread_id)


@dataclass(frozen=True, slots=True)
class StrategicDecision:
    """An assignment of agents to threads; lower score = better makespan."""

    id: str
    strategy: str
    assignment: dict[str, str]
    score: float = math.nan

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    def signature(self) -> str:
        """Canonical text form of the assignment, used for tie-breaking."""
        return "|".join(f"{a}:{t}" for a, t in sorted(self.assignment.items()))


@dataclass(frozen=True, slots=True)
class MacroDecision:
    """One schedule entry: the seven-field macro decision plus the task id
    binding it to the world for execution."""

    task: str
    task_type: str
    agents: frozenset[str]
    region: str
    start: float
    finish: float
    estimated_done: int
    estimated_reveals: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "agents", frozenset(self.agents))
        object.__setattr__(
            self,
            "estimated_reveals",
            tuple((str(t), int(n)) for t, n in self.estimated_reveals),
        )


@dataclass(frozen=True, slots=True)
class Schedule:
    """A feasible plan plus the earliest moment it must be revisited.

    Embeds the full strategic decision so downstream consumers (adaptation,
    critique, export) are self-contained, and the digest of the world it was
    built from so staleness is detectable. `origins` records each assigned
    agent's position at build time: in-transit positions are then exact
    functions of time, independent of stepping granularity.
    """

    decision: StrategicDecision
    entries: tuple[MacroDecision, ...]
    adaption_time: float
    makespan: float
    created_at: float
    world_digest: str
    origins: dict[str, GeoPoint] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(
            self, "origins", {k: GeoPoint(*v) for k, v in self.origins.items()}
        )

    def entries_for_agent(self, agent_id: str) -> list[MacroDecision]:
        return sorted(
            (e for e in self.entries if agent_id in e.agents),
            key=lambda e: (e.start, e.task),
        )


@dataclass(frozen=True, slots=True)
class WorldState:
    """Complete snapshot of the scenario at one instant.

    Collections are keyed by id; equality is order-insensitive.
    """

    time: float
    agents: dict[str, Agent] = field(default_factory=dict)
    regions: dict[str, Region] = field(default_factory=dict)
    task_types: dict[str, TaskType] = field(default_factory=dict)
    macro_tasks: dict[str, MacroTask] = field(default_factory=dict)
    refuges: dict[str, Refuge] = field(default_factory=dict)
    casualty_clusters: dict[str, CasualtyCluster] = field(default_factory=dict)

    def __post_init__(self):
        for name in (
            "agents",
            "regions",
            "task_types",
            "macro_tasks",
            "refuges",
            "casualty_clusters",
        ):
            items = getattr(self, name)
            if not isinstance(items, dict):
                items = {x.id: x for x in items}
            object.__setattr__(self, name, dict(items))

    def replace_agent(self, agent: Agent) -> "WorldState":
        agents = dict(self.agents)
        agents[agent.id] = agent
        return replace(self, agents=agents)

    def replace_agents(self, updated: Iterable[Agent]) -> "WorldState":
        agents = dict(self.agents)
        for a in updated:
            agents[a.id] = a
        return replace(self, agents=agents)

    def replace_task(self, task: MacroTask) -> "WorldState":
        tasks = dict(self.macro_tasks)
        tasks[task.id] = task
        return replace(self, macro_tasks=tasks)

    def replace_tasks(self, updated: Iterable[MacroTask]) -> "WorldState":
        tasks = dict(self.macro_tasks)
        for t in updated:
            tasks[t.id] = t
        return replace(self, macro_tasks=tasks)

    def at_time(self, time: float) -> "WorldState":
        return replace(self, time=time)


@dataclass(frozen=True, slots=True)
class Event:
    """A timestamped world change; payload fields are kind-specific."""

    at: float
    kind: EventKind
    payload: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        object.__setattr__(self, "payload", dict(self.payload))


@dataclass(frozen=True, slots=True)
class Violation:
    path: str
    message: str


# ---------------------------------------------------------------------------
# Validation

_LON_RANGE = (-180.0, 180.0)
_LAT_RANGE = (-90.0, 90.0)


def _check_point(p: GeoPoint, path: str, out: list[Violation]) -> None:
    if not (math.isfinite(p.lon) and _LON_RANGE[0] <= p.lon <= _LON_RANGE[1]):
        out.append(Violation(f"{path}/lon", f"longitude out of range: {p.lon!r}"))
    if not (math.isfinite(p.lat) and _LAT_RANGE[0] <= p.lat <= _LAT_RANGE[1]):
        out.append(Violation(f"{path}/lat", f"latitude out of range: {p.lat!r}"))


def _orient(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> float:
    return (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)


def _on_segment(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> bool:
    if abs(_orient(a, b, p)) > 1e-12:
        return False
    return (
        min(a.lon, b.lon) - 1e-12 <= p.lon <= max(a.lon, b.lon) + 1e-12
        and min(a.lat, b.lat) - 1e-12 <= p.lat <= max(a.lat, b.lat) + 1e-12
    )


def _segments_intersect(p1: GeoPoint, p2: GeoPoint, q1: GeoPoint, q2: GeoPoint) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    return (
        _on_segment(q1, q2, p1)
        or _on_segment(q1, q2, p2)
        or _on_segment(p1, p2, q1)
        or _on_segment(p1, p2, q2)
    )


def polygon_is_simple(boundary: tuple[GeoPoint, ...]) -> bool:
    """True iff no two non-adjacent edges intersect and no vertex repeats."""
    n = len(boundary)
    if n < 3 or len({(p.lon, p.lat) for p in boundary}) != n:
        return False
    edges = [(boundary[i], boundary[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def validate_world(world: WorldState) -> list[Violation]:
    """Check every model invariant and cross-reference; never raises.

    Returns one violation per breach, each naming the offending element
    path (e.g. ``agents/a1/speed``).
    """
    out: list[Violation] = []
    if not (math.isfinite(world.time) and world.time >= 0):
        out.append(Violation("time", f"time must be finite and >= 0, got {world.time!r}"))

    for rid, region in world.regions.items():
        path = f"regions/{rid}"
        if len(region.boundary) < 3:
            out.append(Violation(f"{path}/boundary", "polygon needs >= 3 vertices"))
        else:
            for i, p in enumerate(region.boundary):
                _check_point(p, f"{path}/boundary/{i}", out)
            if not polygon_is_simple(region.boundary):
                out.append(Violation(f"{path}/boundary", "polygon is not simple"))

    for tid, tt in world.task_types.items():
        if not (math.isfinite(tt.unit_workload) and tt.unit_workload > 0):
            out.append(
                Violation(
                    f"task_types/{tid}/unit_workload",
                    f"unit_workload must be > 0, got {tt.unit_workload!r}",
                )
            )

    for aid, agent in world.agents.items():
        path = f"agents/{aid}"
        _check_point(agent.location, f"{path}/location", out)
        if not (math.isfinite(agent.speed) and agent.speed > 0):
            out.append(Violation(f"{path}/speed", f"speed must be > 0, got {agent.speed!r}"))
        if not agent.capabilities:
            out.append(Violation(f"{path}/capabilities", "capabilities must be non-empty"))
        for cap in agent.capabilities:
            if cap not in world.task_types:
                out.append(
                    Violation(f"{path}/capabilities", f"unknown task type {cap!r}")
                )
        has_thread = agent.assigned_thread is not None
        should_have = agent.status in (AgentStatus.ASSIGNED, AgentStatus.WORKING)
        if has_thread != should_have:
            out.append(
                Violation(
                    f"{path}/assigned_thread",
                    f"assigned_thread must be set iff status is assigned/working "
                    f"(status={agent.status.value}, thread={agent.assigned_thread!r})",
                )
            )

    for tid, task in world.macro_tasks.items():
        path = f"macro_tasks/{tid}"
        if task.quantity < 0:
            out.append(Violation(f"{path}/quantity", "quantity must be >= 0"))
        if task.completed < 0:
            out.append(Violation(f"{path}/completed", "completed must be >= 0"))
        if not (0.0 <= task.certainty <= 1.0):
            out.append(Violation(f"{path}/certainty", "certainty must be in [0, 1]"))
        if task.state is TaskState.DONE and task.quantity != 0:
            out.append(
                Violation(f"{path}/state", "done task must have zero remaining quantity")
            )
        if task.task_type not in world.task_types:
            out.append(Violation(f"{path}/task_type", f"unknown task type {task.task_type!r}"))
        if task.region not in world.regions:
            out.append(Violation(f"{path}/region", f"unknown region {task.region!r}"))
        for i, rule in enumerate(task.reveal_rules):
            if rule.expected_count < 0:
                out.append(
                    Violation(f"{path}/reveal_rules/{i}", "expected_count must be >= 0")
                )
            if rule.successor_type not in world.task_types:
                out.append(
                    Violation(
                        f"{path}/reveal_rules/{i}",
                        f"unknown successor type {rule.successor_type!r}",
                    )
                )

    for rid, refuge in world.refuges.items():
        path = f"refuges/{rid}"
        _check_point(refuge.location, f"{path}/location", out)
        if not (0 <= refuge.occupied <= refuge.capacity):
            out.append(
                Violation(
                    f"{path}/occupied",
                    f"occupied must be within [0, capacity], got "
                    f"{refuge.occupied}/{refuge.capacity}",
                )
            )

    for cid, cluster in world.casualty_clusters.items():
        path = f"casualty_clusters/{cid}"
        _check_point(cluster.location, f"{path}/location", out)
        if cluster.count < 0:
            out.append(Violation(f"{path}/count", "count must be >= 0"))
        if cluster.severity < 1:
            out.append(Violation(f"{path}/severity", "severity must be >= 1"))

    return out


def validate_strategy(world: WorldState, strategy: Strategy) -> list[Violation]:
    """Strategy invariants plus cross-references into the world."""
    out: list[Violation] = []
    if not strategy.threads:
        out.append(Violation(f"strategies/{strategy.id}/threads", "must be non-empty"))
    seen: set[str] = set()
    for t in strategy.threads:
        path = f"strategies/{strategy.id}/threads/{t.id}"
        if t.id in seen:
            out.append(Violation(path, "duplicate thread id"))
        seen.add(t.id)
        if t.priority < 1:
            out.append(Violation(f"{path}/priority", "priority must be >= 1"))
        if not t.goal_task_types:
            out.append(Violation(f"{path}/goal_task_types", "must be non-empty"))
        for tt in t.goal_task_types:
            if tt not in world.task_types:
                out.append(Violation(f"{path}/goal_task_types", f"unknown task type {tt!r}"))
        for r in t.goal_regions:
            if r not in world.regions:
                out.append(Violation(f"{path}/goal_regions", f"unknown region {r!r}"))
        if t.min_agents < 0:
            out.append(Violation(f"{path}/min_agents", "min_agents must be >= 0"))
        if t.min_agents > t.max_agents:
            out.append(
                Violation(f"{path}/max_agents", "max_agents must be >= min_agents")
            )
    return out


def check_disjoint_intervals(schedule: Schedule) -> list[Violation]:
    """Standalone predicate: per agent, [start, finish) intervals disjoint."""
    out: list[Violation] = []
    by_agent: dict[str, list[MacroDecision]] = {}
    for e in schedule.entries:
        for a in e.agents:
            by_agent.setdefault(a, []).append(e)
    for aid, entries in sorted(by_agent.items()):
        entries.sort(key=lambda e: (e.start, e.finish))
        for prev, nxt in zip(entries, entries[1:]):
            if nxt.start < prev.finish - TIME_EPS:
                out.append(
                    Violation(
                        f"entries/{aid}",
                        f"overlapping intervals: {prev.task} [{prev.start}, "
                        f"{prev.finish}) and {nxt.task} [{nxt.start}, {nxt.finish})",
                    )
                )
    return out
