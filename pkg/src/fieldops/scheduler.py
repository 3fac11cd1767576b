"""Centralized scheduling: strategic decision -> feasible plan + adaption time.

Threads claim tasks strictly in priority order (ties by thread id), so no
lower-priority group is ever scheduled while a higher-priority thread still
has unassigned work its own agents could do. Within a thread, a greedy rule
repeatedly commits the free agent group to the task it can complete
earliest; when a group has more agents than the task has micro tasks it
splits by agent-id order and the remainder works in parallel.

k co-assigned agents complete workload linearly k times faster. Estimated
reveals are never pre-scheduled; they only set the adaption time.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace as dc_replace
from typing import Iterable, Mapping

from . import geo
from .errors import ContractError, ReplanRequired
from .model import (
    Agent,
    AgentStatus,
    GeoPoint,
    MacroDecision,
    MacroTask,
    Schedule,
    StrategicDecision,
    Strategy,
    TaskState,
    Thread,
    TIME_EPS,
    Violation,
    WorldState,
    check_disjoint_intervals,
)
from .serialize import world_digest


@dataclass
class Release:
    """An agent the plan no longer needs, free for re-enumeration at `at`."""

    agent: str
    thread: str
    at: float


@dataclass
class ScheduleContext:
    """Per-(world, strategy) caches shared across many schedule builds."""

    world: WorldState
    strategy: Strategy
    centroids: dict[str, GeoPoint] = field(default_factory=dict)
    _agent_region_s: dict[tuple[str, str], float] = field(default_factory=dict)
    _region_region_m: dict[tuple[str, str], float] = field(default_factory=dict)
    _digest: str | None = None

    @property
    def digest(self) -> str:
        if self._digest is None:
            self._digest = world_digest(self.world)
        return self._digest

    def centroid(self, region_id: str) -> GeoPoint:
        c = self.centroids.get(region_id)
        if c is None:
            c = geo.region_centroid(self.world.regions[region_id]).point
            self.centroids[region_id] = c
        return c

    def travel_from_start(self, agent: Agent, region_id: str) -> float:
        key = (agent.id, region_id)
        t = self._agent_region_s.get(key)
        if t is None:
            t = geo.haversine_distance(agent.location, self.centroid(region_id)) / agent.speed
            self._agent_region_s[key] = t
        return t

    def travel_between(self, agent: Agent, from_region: str, to_region: str) -> float:
        key = (from_region, to_region)
        d = self._region_region_m.get(key)
        if d is None:
            d = geo.haversine_distance(self.centroid(from_region), self.centroid(to_region))
            self._region_region_m[key] = d
            self._region_region_m[(to_region, from_region)] = d
        return d / agent.speed


@dataclass
class _AgentState:
    """Where an agent becomes free next: time plus either a region or a point."""

    free_at: float
    region: str | None  # set when the agent rests at a region centroid
    point: GeoPoint | None  # set when it rests at an arbitrary location


def thread_can_do(thread: Thread, task: MacroTask) -> bool:
    return task.task_type in thread.goal_task_types and thread.covers_region(task.region)


def coverable_task_ids(world: WorldState, strategy: Strategy) -> set[str]:
    """Pending tasks some (thread, capable agent) pairing could execute."""
    agents = [
        a for a in world.agents.values() if a.status is not AgentStatus.DISABLED
    ]
    out: set[str] = set()
    for task in world.macro_tasks.values():
        if task.state is not TaskState.REVEALED or task.remaining <= 0:
            continue
        for t in strategy.threads:
            if not thread_can_do(t, task):
                continue
            if any(
                task.task_type in a.capabilities and a.capabilities & t.goal_task_types
                for a in agents
            ):
                out.add(task.id)
                break
    return out


def plan_score(world: WorldState, strategy: Strategy, schedule: Schedule) -> float:
    """Ranking value for a schedule: its makespan, or +inf when it strands
    work the strategy and team could have covered.

    A lower makespan earned by ignoring coverable tasks would steer the
    closed loop into abandoning work, so such plans rank behind every
    complete one.
    """
    covered = {e.task for e in schedule.entries}
    for tid in coverable_task_ids(world, strategy):
        if tid not in covered:
            return math.inf
    for task in world.macro_tasks.values():
        if (
            task.state is TaskState.IN_PROGRESS
            and task.remaining > 0
            and task.id not in covered
        ):
            return math.inf
    return schedule.makespan


def estimate_completion(
    world: WorldState,
    task: MacroTask,
    agents: Iterable[Agent],
    t0: Mapping[str, float],
    origins: Mapping[str, GeoPoint],
) -> tuple[float, float, int, tuple[tuple[str, int], ...]]:
    """Start/finish/estimated counts for a group executing one macro task.

    start is the latest arrival over the group; finish adds the remaining
    workload shared linearly across the group.
    """
    group = sorted(agents, key=lambda a: a.id)
    if not group:
        raise ContractError("estimate_completion requires a non-empty agent group")
    for a in group:
        if task.task_type not in a.capabilities:
            raise ContractError(f"agent {a.id} is not capable of {task.task_type}")
    centroid = geo.region_centroid(world.regions[task.region]).point
    start = max(
        t0[a.id] + geo.travel_time(a, origins[a.id], centroid) for a in group
    )
    unit = world.task_types[task.task_type].unit_workload
    finish = start + task.remaining * unit / len(group)
    reveals = tuple(
        (r.successor_type, r.expected_count)
        for r in task.reveal_rules
        if r.expected_count > 0
    )
    return start, finish, task.remaining, reveals


def _greedy_thread_entries(
    ctx: ScheduleContext,
    thread: Thread,
    members: list[Agent],
    states: dict[str, _AgentState],
    tasks: list[MacroTask],
    busy_groups: list[tuple[float, list[str]]] = (),
) -> list[MacroDecision]:
    """Schedule `tasks` onto `members`, consuming from `states`.

    Event-driven greedy: the currently-free group takes the task it can
    finish earliest; committed agents (including `busy_groups` carried over
    from preserved in-progress entries) rejoin the pool when their entry
    ends.
    """
    world = ctx.world
    entries: list[MacroDecision] = []
    pending = {t.id: t for t in tasks}
    committed_now = {aid for _, group in busy_groups for aid in group}
    free: set[str] = {a.id for a in members} - committed_now
    busy: list[tuple[float, int, list[str]]] = []  # (finish, seq, agent ids)
    seq = 0
    for finish, group in sorted(busy_groups):
        heapq.heappush(busy, (finish, seq, list(group)))
        seq += 1
    by_id = {a.id: a for a in members}

    def arrival(aid: str, region_id: str) -> float:
        st = states[aid]
        agent = by_id[aid]
        if st.region is not None:
            return st.free_at + ctx.travel_between(agent, st.region, region_id)
        return st.free_at + geo.haversine_distance(st.point, ctx.centroid(region_id)) / agent.speed

    while pending:
        best = None  # (finish, region, task id, start, group)
        for tid in sorted(pending):
            task = pending[tid]
            capable = sorted(
                a for a in free if task.task_type in by_id[a].capabilities
            )
            if not capable:
                continue
            group = capable[: max(1, min(len(capable), task.remaining))]
            start = max(arrival(a, task.region) for a in group)
            unit = world.task_types[task.task_type].unit_workload
            finish = start + task.remaining * unit / len(group)
            key = (finish, task.region, task.id)
            if best is None or key < best[0]:
                best = (key, task, start, group)
        if best is None:
            if not busy:
                break  # remaining tasks need capabilities this thread lacks
            finish, _, group = heapq.heappop(busy)
            free.update(group)
            continue
        (finish, _, _), task, start, group = best
        reveals = tuple(
            (r.successor_type, r.expected_count)
            for r in task.reveal_rules
            if r.expected_count > 0
        )
        entries.append(
            MacroDecision(
                task=task.id,
                task_type=task.task_type,
                agents=frozenset(group),
                region=task.region,
                start=start,
                finish=finish,
                estimated_done=task.remaining,
                estimated_reveals=reveals,
            )
        )
        del pending[task.id]
        for aid in group:
            states[aid] = _AgentState(free_at=finish, region=task.region, point=None)
            free.discard(aid)
        heapq.heappush(busy, (finish, seq, list(group)))
        seq += 1
    return entries


def _build_entries(
    ctx: ScheduleContext,
    decision: StrategicDecision,
    preserved: list[MacroDecision],
    initial_states: dict[str, _AgentState] | None = None,
) -> list[MacroDecision]:
    world = ctx.world
    strategy = ctx.strategy

    states: dict[str, _AgentState] = {}
    for aid in decision.assignment:
        agent = world.agents[aid]
        states[aid] = _AgentState(free_at=world.time, region=None, point=agent.location)
    if initial_states:
        states.update(initial_states)
    for e in preserved:
        for aid in e.agents:
            states[aid] = _AgentState(free_at=e.finish, region=e.region, point=None)

    covered = {e.task for e in preserved}
    pool = [
        t
        for t in world.macro_tasks.values()
        if t.state is TaskState.REVEALED and t.remaining > 0 and t.id not in covered
    ]
    claimed: set[str] = set()
    entries: list[MacroDecision] = list(preserved)

    members_by_thread: dict[str, list[Agent]] = {}
    for aid, tid in decision.assignment.items():
        members_by_thread.setdefault(tid, []).append(world.agents[aid])

    for thread in sorted(strategy.threads, key=lambda t: (t.priority, t.id)):
        members = sorted(members_by_thread.get(thread.id, []), key=lambda a: a.id)
        if not members:
            continue
        eligible = [
            t
            for t in pool
            if t.id not in claimed
            and thread_can_do(thread, t)
            and any(t.task_type in a.capabilities for a in members)
        ]
        if not eligible:
            continue
        eligible.sort(key=lambda t: t.id)
        claimed.update(t.id for t in eligible)
        member_ids = {a.id for a in members}
        busy_groups = [
            (e.finish, sorted(a for a in e.agents if a in member_ids))
            for e in preserved
            if e.agents & member_ids
        ]
        entries.extend(
            _greedy_thread_entries(ctx, thread, members, states, eligible, busy_groups)
        )
    return entries


def _compute_releases(
    world: WorldState,
    strategy: Strategy,
    decision: StrategicDecision,
    entries: list[MacroDecision],
) -> list[Release]:
    covered = {e.task for e in entries}
    future_reveals = [
        e for e in entries if e.estimated_reveals and e.finish > world.time + TIME_EPS
    ]
    releases: list[Release] = []
    threads = {t.id: t for t in strategy.threads}
    by_thread: dict[str, list[str]] = {}
    for aid, tid in decision.assignment.items():
        agent = world.agents.get(aid)
        if agent is None or agent.status not in (AgentStatus.ASSIGNED, AgentStatus.WORKING):
            continue
        by_thread.setdefault(tid, []).append(aid)
    for tid, agent_ids in sorted(by_thread.items()):
        thread = threads.get(tid)
        if thread is None:
            continue
        uncovered_work = any(
            t.state in (TaskState.REVEALED, TaskState.IN_PROGRESS)
            and t.remaining > 0
            and thread_can_do(thread, t)
            and t.id not in covered
            for t in world.macro_tasks.values()
        )
        if uncovered_work:
            continue
        pending_reveal = any(
            rt in thread.goal_task_types and thread.covers_region(e.region)
            for e in future_reveals
            for rt, n in e.estimated_reveals
        )
        if pending_reveal:
            continue
        for aid in sorted(agent_ids):
            finishes = [e.finish for e in entries if aid in e.agents]
            releases.append(Release(agent=aid, thread=tid, at=max(finishes, default=world.time)))
    releases.sort(key=lambda r: (r.at, r.agent))
    return releases


def _adaption_time(
    world: WorldState,
    strategy: Strategy,
    decision: StrategicDecision,
    entries: list[MacroDecision],
    makespan: float,
) -> float:
    candidates: list[float] = []
    for e in entries:
        if e.estimated_reveals and e.finish > world.time + TIME_EPS:
            candidates.append(e.finish)
    for r in _compute_releases(world, strategy, decision, entries):
        if world.time + TIME_EPS < r.at < makespan - TIME_EPS:
            candidates.append(r.at)
    if not candidates:
        return math.inf
    return max(world.time, min(candidates))


def _assemble(
    ctx: ScheduleContext,
    decision: StrategicDecision,
    entries: list[MacroDecision],
) -> Schedule:
    world = ctx.world
    makespan = max((e.finish for e in entries), default=0.0)
    adaption = _adaption_time(world, ctx.strategy, decision, entries, makespan)
    return Schedule(
        decision=decision,
        entries=tuple(entries),
        adaption_time=adaption,
        makespan=makespan,
        created_at=world.time,
        world_digest=ctx.digest,
        origins={
            aid: world.agents[aid].location
            for aid in sorted(decision.assignment)
            if aid in world.agents
        },
    )


def _require_applied(world: WorldState, decision: StrategicDecision) -> None:
    for aid, tid in decision.assignment.items():
        agent = world.agents.get(aid)
        if agent is None:
            raise ContractError(f"decision references unknown agent {aid!r}")
        if agent.status not in (AgentStatus.ASSIGNED, AgentStatus.WORKING):
            raise ContractError(f"decision not applied: agent {aid} is {agent.status.value}")
        if agent.assigned_thread != tid:
            raise ContractError(
                f"decision not applied: agent {aid} is on thread "
                f"{agent.assigned_thread!r}, expected {tid!r}"
            )


def build_schedule(
    world: WorldState,
    strategy: Strategy,
    decision: StrategicDecision,
    *,
    ctx: ScheduleContext | None = None,
) -> Schedule:
    """Plan all currently revealed tasks under an applied decision.

    With no revealed tasks the schedule is empty with makespan 0 and an
    unbounded adaption time.
    """
    _require_applied(world, decision)
    return build_schedule_unchecked(world, strategy, decision, ctx=ctx)


def build_schedule_unchecked(
    world: WorldState,
    strategy: Strategy,
    decision: StrategicDecision,
    *,
    ctx: ScheduleContext | None = None,
) -> Schedule:
    """build_schedule without the applied-decision gate, for search leaves."""
    if ctx is None or ctx.world is not world:
        ctx = ScheduleContext(world=world, strategy=strategy)
    entries = _build_entries(ctx, decision, preserved=[])
    return _assemble(ctx, decision, entries)


def adaption_time(schedule: Schedule, world: WorldState, strategy: Strategy) -> float:
    """Earliest moment the plan must be revisited; +inf when nothing pends."""
    t = _adaption_time(
        world, strategy, schedule.decision, list(schedule.entries), schedule.makespan
    )
    return max(t, world.time) if math.isfinite(t) else t


def compute_releases(
    world: WorldState, strategy: Strategy, schedule: Schedule
) -> list[Release]:
    """Agents whose thread the plan has fully served, at their last finish.

    A thread releases nobody while eligible work remains outside the plan
    or while any pending entry may still reveal goal-matching tasks.
    """
    return _compute_releases(world, strategy, schedule.decision, list(schedule.entries))


def adapt_schedule(
    world: WorldState,
    strategy: Strategy,
    old: Schedule,
    *,
    ctx: ScheduleContext | None = None,
) -> Schedule:
    """Re-plan against the current world, keeping in-progress entries intact.

    Raises ReplanRequired when the decision no longer satisfies some
    thread's agent-count bounds (after disables or releases).
    """
    decision = old.decision
    active = {
        aid: tid
        for aid, tid in decision.assignment.items()
        if aid in world.agents
        and world.agents[aid].status in (AgentStatus.ASSIGNED, AgentStatus.WORKING)
    }
    counts: dict[str, int] = {}
    for tid in active.values():
        counts[tid] = counts.get(tid, 0) + 1
    infeasible = [
        t.id
        for t in strategy.threads
        if t.id in {x for x in decision.assignment.values()}
        and counts.get(t.id, 0) < t.min_agents
    ]
    if infeasible:
        raise ReplanRequired(infeasible)

    restricted = StrategicDecision(
        id=decision.id, strategy=decision.strategy, assignment=active, score=decision.score
    )
    if ctx is None or ctx.world is not world:
        ctx = ScheduleContext(world=world, strategy=strategy)

    preserved: list[MacroDecision] = []
    for e in old.entries:
        task = world.macro_tasks.get(e.task)
        if task is None or task.state is not TaskState.IN_PROGRESS:
            continue
        if not (e.start <= world.time + TIME_EPS < e.finish):
            continue
        alive = frozenset(a for a in e.agents if a in active)
        if alive == e.agents:
            preserved.append(e)
            continue
        # The committed group lost agents: materialize floored partial
        # progress and hand the task back to the pool.
        elapsed = max(0.0, world.time - e.start)
        unit = world.task_types[task.task_type].unit_workload
        done = min(task.remaining, int(elapsed * len(e.agents) / unit))
        reverted = dc_replace(
            task,
            quantity=task.quantity - done,
            completed=task.completed + done,
            state=TaskState.REVEALED,
        )
        world = world.replace_task(reverted)
        ctx = ScheduleContext(world=world, strategy=strategy)

    entries = _build_entries(ctx, restricted, preserved=preserved)
    return _assemble(ctx, restricted, entries)


# ---------------------------------------------------------------------------
# Independent feasibility checker (kept free of builder internals)


def check_schedule(
    world: WorldState, strategy: Strategy, schedule: Schedule
) -> list[Violation]:
    """Verify a schedule against the raw contract, entry by entry.

    Checks per-agent interval disjointness, capability and thread
    membership, task eligibility, priority compliance, and the makespan
    equation. Empty list means feasible.
    """
    out = list(check_disjoint_intervals(schedule))
    decision = schedule.decision
    threads = {t.id: t for t in strategy.threads}

    for i, e in enumerate(schedule.entries):
        path = f"entries/{i}"
        if not e.agents:
            out.append(Violation(path, "entry has no agents"))
            continue
        if e.finish < e.start - TIME_EPS:
            out.append(Violation(path, f"finish {e.finish} before start {e.start}"))
        if e.estimated_done < 0:
            out.append(Violation(path, "estimated_done must be >= 0"))
        task = world.macro_tasks.get(e.task)
        if task is None:
            out.append(Violation(path, f"unknown task {e.task!r}"))
        if e.region not in world.regions:
            out.append(Violation(path, f"unknown region {e.region!r}"))
        entry_threads = set()
        for aid in e.agents:
            agent = world.agents.get(aid)
            if agent is None:
                out.append(Violation(path, f"unknown agent {aid!r}"))
                continue
            if e.task_type not in agent.capabilities:
                out.append(Violation(path, f"agent {aid} not capable of {e.task_type}"))
            tid = decision.assignment.get(aid)
            if tid is None:
                out.append(Violation(path, f"agent {aid} is not in the decision"))
            else:
                entry_threads.add(tid)
        if len(entry_threads) > 1:
            out.append(Violation(path, f"agents span threads {sorted(entry_threads)}"))
        elif entry_threads:
            thread = threads.get(next(iter(entry_threads)))
            if thread is None:
                out.append(Violation(path, "unknown thread in decision"))
            else:
                if e.task_type not in thread.goal_task_types:
                    out.append(
                        Violation(path, f"{e.task_type} outside thread {thread.id} goals")
                    )
                if not thread.covers_region(e.region):
                    out.append(
                        Violation(path, f"region {e.region} outside thread {thread.id} goals")
                    )

    expected = max((e.finish for e in schedule.entries), default=0.0)
    if abs(schedule.makespan - expected) > TIME_EPS:
        out.append(
            Violation("makespan", f"expected {expected}, recorded {schedule.makespan}")
        )
    if schedule.adaption_time < schedule.created_at - TIME_EPS:
        out.append(Violation("adaption_time", "before schedule creation time"))

    # Priority compliance: while a strictly higher-priority thread still has
    # an unscheduled revealed task its agents could do, no lower-priority
    # entry may exist.
    scheduled_tasks = {e.task for e in schedule.entries}
    members: dict[str, list[Agent]] = {}
    for aid, tid in decision.assignment.items():
        if aid in world.agents:
            members.setdefault(tid, []).append(world.agents[aid])
    for i, e in enumerate(schedule.entries):
        tids = {decision.assignment.get(a) for a in e.agents} - {None}
        if len(tids) != 1:
            continue
        entry_thread = threads.get(next(iter(tids)))
        if entry_thread is None:
            continue
        for other in strategy.threads:
            if other.priority >= entry_thread.priority:
                continue
            other_members = members.get(other.id, [])
            for task in world.macro_tasks.values():
                if task.state is not TaskState.REVEALED or task.remaining <= 0:
                    continue
                if task.id in scheduled_tasks:
                    continue
                if not thread_can_do(other, task):
                    continue
                if any(task.task_type in a.capabilities for a in other_members):
                    out.append(
                        Violation(
                            f"entries/{i}",
                            f"lower-priority thread {entry_thread.id} scheduled while "
                            f"{other.id} could still do unassigned task {task.id}",
                        )
                    )
    return out
