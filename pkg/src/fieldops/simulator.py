"""Closed-loop execution of schedules against the world model.

Every state change flows through `apply_event`, so replaying a trace's
event log over its initial world reproduces the final world bit for bit.
Between events agents move continuously along great-circle paths; event
times are computed exactly from the schedule, so outcomes are invariant to
the stepping granularity (tick size only changes how often observers see
intermediate positions).

Reveals fire deterministically with their expected counts; the seed field
exists so a stochastic reveal mode can be added without format changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

from . import geo, scheduler, strategy as strategy_mod
from .errors import ContractError, LivelockError, ReplanRequired, ValidationError
from .model import (
    Agent,
    AgentStatus,
    Event,
    EventKind,
    GeoPoint,
    MacroDecision,
    MacroTask,
    Schedule,
    StrategicDecision,
    Strategy,
    TaskState,
    TIME_EPS,
    Violation,
    WorldState,
)
from .scheduler import ScheduleContext
from .serialize import task_from_doc, task_to_doc, world_digest


@dataclass(frozen=True, slots=True)
class SimConfig:
    tick: float = 1.0
    stop_at: float | None = None  # None runs to quiescence
    seed: int = 0

    def __post_init__(self):
        if self.tick <= 0:
            raise ContractError(f"tick must be > 0, got {self.tick}")

    def to_doc(self) -> dict:
        return {
            "tick": float(self.tick),
            "stop_at": None if self.stop_at is None else float(self.stop_at),
            "seed": int(self.seed),
        }


@dataclass(frozen=True, slots=True)
class Trace:
    """Complete account of one closed-loop run."""

    events: tuple[Event, ...]
    final_world: WorldState
    replans: int
    initial_world: WorldState
    decision: StrategicDecision | None = None
    schedule: Schedule | None = None


def quiescent(world: WorldState) -> bool:
    """No revealed or in-progress work remains."""
    return not any(
        t.state in (TaskState.REVEALED, TaskState.IN_PROGRESS) and t.remaining > 0
        for t in world.macro_tasks.values()
    )


# ---------------------------------------------------------------------------
# Event application (single mutation path, shared with log replay)


def apply_event(world: WorldState, event: Event) -> WorldState:
    """Apply one event; the only way simulation mutates the world."""
    t = max(world.time, event.at)
    world = world.at_time(t)
    payload = event.payload
    kind = event.kind

    if kind is EventKind.TASK_STARTED:
        task = world.macro_tasks[str(payload["task"])]
        world = world.replace_task(dc_replace(task, state=TaskState.IN_PROGRESS))
        centroid = geo.region_centroid(world.regions[str(payload["region"])]).point
        world = world.replace_agents(
            dc_replace(world.agents[aid], status=AgentStatus.WORKING, location=centroid)
            for aid in payload["agents"]
        )
    elif kind is EventKind.TASK_DONE:
        task = world.macro_tasks[str(payload["task"])]
        delta = int(payload["completed"])
        remaining = task.quantity - delta
        world = world.replace_task(
            dc_replace(
                task,
                quantity=remaining,
                completed=task.completed + delta,
                state=TaskState.DONE if remaining == 0 else TaskState.REVEALED,
            )
        )
        centroid = geo.region_centroid(world.regions[str(payload["region"])]).point
        world = world.replace_agents(
            dc_replace(world.agents[aid], status=AgentStatus.ASSIGNED, location=centroid)
            for aid in payload["agents"]
            if world.agents[aid].status is AgentStatus.WORKING
        )
    elif kind is EventKind.TASKS_REVEALED:
        new_tasks = [task_from_doc(doc, "event/tasks") for doc in payload.get("tasks", [])]
        for nt in new_tasks:
            if nt.id in world.macro_tasks:
                raise ValidationError(
                    [Violation(f"event/tasks/{nt.id}", "task id already exists")]
                )
        world = world.replace_tasks(new_tasks)
        for tid in payload.get("task_ids", []):
            task = world.macro_tasks.get(str(tid))
            if task is None:
                raise ValidationError(
                    [Violation(f"event/task_ids/{tid}", "unknown task")]
                )
            world = world.replace_task(dc_replace(task, state=TaskState.REVEALED))
    elif kind is EventKind.TASK_PROGRESS:
        task = world.macro_tasks[str(payload["task"])]
        delta = int(payload.get("completed", 0))
        world = world.replace_task(
            dc_replace(
                task, quantity=task.quantity - delta, completed=task.completed + delta
            )
        )
        positions = payload.get("positions", {})
        world = world.replace_agents(
            dc_replace(world.agents[aid], location=GeoPoint(float(p[0]), float(p[1])))
            for aid, p in sorted(positions.items())
        )
    elif kind is EventKind.AGENT_RELEASED:
        agent = world.agents[str(payload["agent"])]
        fields: dict = {"status": AgentStatus.AVAILABLE, "assigned_thread": None}
        if "location" in payload:
            loc = payload["location"]
            fields["location"] = GeoPoint(float(loc[0]), float(loc[1]))
        world = world.replace_agent(dc_replace(agent, **fields))
    elif kind is EventKind.AGENT_DISABLED:
        agent = world.agents.get(str(payload["agent"]))
        if agent is None:
            raise ValidationError(
                [Violation(f"event/agent/{payload.get('agent')}", "unknown agent")]
            )
        fields = {"status": AgentStatus.DISABLED, "assigned_thread": None}
        if "location" in payload:
            loc = payload["location"]
            fields["location"] = GeoPoint(float(loc[0]), float(loc[1]))
        world = world.replace_agent(dc_replace(agent, **fields))
    elif kind is EventKind.REPLAN_TRIGGERED:
        released_locations = payload.get("released_locations", {})
        for aid in payload.get("released", []):
            agent = world.agents[str(aid)]
            fields = {"status": AgentStatus.AVAILABLE, "assigned_thread": None}
            if str(aid) in released_locations:
                loc = released_locations[str(aid)]
                fields["location"] = GeoPoint(float(loc[0]), float(loc[1]))
            world = world.replace_agent(dc_replace(agent, **fields))
        assignment = payload.get("assignment")
        if assignment:
            updated = []
            for aid, tid in sorted(assignment.items()):
                agent = world.agents[str(aid)]
                if agent.status is AgentStatus.WORKING:
                    updated.append(dc_replace(agent, assigned_thread=str(tid)))
                else:
                    updated.append(
                        dc_replace(
                            agent, status=AgentStatus.ASSIGNED, assigned_thread=str(tid)
                        )
                    )
            world = world.replace_agents(updated)
    elif kind is EventKind.ALLOCATION_MADE:
        for flow in payload.get("flows", []):
            cluster = world.casualty_clusters.get(str(flow["cluster"]))
            refuge = world.refuges.get(str(flow["refuge"]))
            persons = int(flow["persons"])
            if cluster is None or refuge is None:
                raise ValidationError(
                    [Violation("event/flows", "unknown cluster or refuge")]
                )
            clusters = dict(world.casualty_clusters)
            clusters[cluster.id] = dc_replace(cluster, count=cluster.count - persons)
            refuges = dict(world.refuges)
            refuges[refuge.id] = dc_replace(refuge, occupied=refuge.occupied + persons)
            world = dc_replace(world, casualty_clusters=clusters, refuges=refuges)
    else:
        raise ContractError(f"unhandled event kind {kind}")
    return world


def inject_event(world: WorldState, event: Event) -> WorldState:
    """Apply an exogenous agent_disabled or tasks_revealed event."""
    if event.kind not in (EventKind.AGENT_DISABLED, EventKind.TASKS_REVEALED):
        raise ContractError(
            f"only agent_disabled/tasks_revealed may be injected, got {event.kind.value}"
        )
    return apply_event(world, event)


# ---------------------------------------------------------------------------
# Continuous movement between events


def _position_at(
    world: WorldState, schedule: Schedule, agent: Agent, t: float
) -> GeoPoint | None:
    """Analytic position along the agent's committed trajectory at time t.

    Positions are computed from canonical anchors (entry centroids and the
    build-time origin), never from previously interpolated points, so they
    do not depend on how finely time was stepped.
    """
    entries = [
        e
        for e in schedule.entries
        if agent.id in e.agents and e.task in world.macro_tasks
    ]
    if not entries:
        return None
    entries.sort(key=lambda e: (e.start, e.task))

    anchor_point = schedule.origins.get(agent.id, agent.location)
    depart = schedule.created_at
    for e in entries:
        centroid = geo.region_centroid(world.regions[e.region]).point
        if t < e.start - 1e-12:
            # traveling toward (or waiting at) this entry's region
            dist = geo.haversine_distance(anchor_point, centroid)
            if dist <= 1e-9:
                return centroid
            arrive = depart + dist / agent.speed
            if t >= arrive:
                return centroid
            return geo.interpolate(
                anchor_point, centroid, (t - depart) * agent.speed / dist
            )
        if t < e.finish - 1e-12:
            return centroid  # working here
        anchor_point = centroid
        depart = e.finish
    return anchor_point  # past the last committed entry


def _move_agents(world: WorldState, schedule: Schedule, t0: float, t1: float) -> WorldState:
    if t1 <= t0 + 1e-12:
        return world
    involved = sorted({aid for e in schedule.entries for aid in e.agents})
    updated: list[Agent] = []
    for aid in involved:
        agent = world.agents.get(aid)
        if agent is None or agent.status is AgentStatus.DISABLED:
            continue
        position = _position_at(world, schedule, agent, t1)
        if position is not None and position != agent.location:
            updated.append(dc_replace(agent, location=position))
    return world.replace_agents(updated) if updated else world


# ---------------------------------------------------------------------------
# Stepping


def _reveal_tasks_for(task: MacroTask) -> list[MacroTask]:
    created = []
    for rule in task.reveal_rules:
        if rule.expected_count <= 0:
            continue
        created.append(
            MacroTask(
                id=f"{task.id}+{rule.successor_type}",
                task_type=rule.successor_type,
                region=task.region,
                quantity=rule.expected_count,
                state=TaskState.REVEALED,
            )
        )
    return created


def step(
    world: WorldState,
    schedule: Schedule,
    strategy: Strategy,
    dt: float,
) -> tuple[WorldState, list[Event]]:
    """Advance the world by dt against a fixed schedule.

    Entry starts/finishes, reveals, and releases inside (t, t+dt] are
    processed in time order at their exact times; a bare replan_triggered
    event is emitted when the step crosses the schedule's adaption time.
    """
    if dt <= 0:
        raise ContractError(f"dt must be > 0, got {dt}")
    t0 = world.time
    t1 = t0 + dt
    events: list[Event] = []

    # Boundaries exactly at t0 are included: a schedule built at t0 can have
    # zero-travel entries starting right now, and the REVEALED/DONE state
    # guards make re-processing a boundary from the previous step harmless.
    moments: set[float] = set()
    for e in schedule.entries:
        if t0 <= e.start <= t1:
            moments.add(e.start)
        if t0 <= e.finish <= t1:
            moments.add(e.finish)
    crossing = t0 < schedule.adaption_time <= t1 - TIME_EPS
    if crossing:
        moments.add(schedule.adaption_time)

    now = t0
    for moment in sorted(moments):
        world = _move_agents(world, schedule, now, moment)
        now = moment
        world, batch = _apply_batch(world, schedule, strategy, moment)
        events.extend(batch)
        if crossing and abs(moment - schedule.adaption_time) <= TIME_EPS:
            ev = Event(at=moment, kind=EventKind.REPLAN_TRIGGERED, payload={})
            world = apply_event(world, ev)
            events.append(ev)
    world = _move_agents(world, schedule, now, t1)
    world = world.at_time(t1)
    return world, events


def _apply_batch(
    world: WorldState, schedule: Schedule, strategy: Strategy, at: float
) -> tuple[WorldState, list[Event]]:
    """All schedule-driven events due exactly at `at`, in causal order."""
    events: list[Event] = []

    # Completions first.
    for e in sorted(schedule.entries, key=lambda e: e.task):
        if abs(e.finish - at) > TIME_EPS:
            continue
        task = world.macro_tasks.get(e.task)
        if task is None or task.state is TaskState.DONE or not (
            task.state is TaskState.IN_PROGRESS or task.state is TaskState.REVEALED
        ):
            continue
        done = Event(
            at=at,
            kind=EventKind.TASK_DONE,
            payload={
                "task": e.task,
                "region": e.region,
                "task_type": e.task_type,
                "agents": sorted(e.agents),
                "completed": task.remaining,
            },
        )
        world = apply_event(world, done)
        events.append(done)
        created = _reveal_tasks_for(task)
        if created:
            reveal = Event(
                at=at,
                kind=EventKind.TASKS_REVEALED,
                payload={
                    "parent": task.id,
                    "tasks": [task_to_doc(t) for t in created],
                },
            )
            world = apply_event(world, reveal)
            events.append(reveal)

    # Releases made actionable by those completions. The event carries the
    # agent's position so a replay of the log lands it at the same spot.
    for release in scheduler.compute_releases(world, strategy, schedule):
        agent = world.agents.get(release.agent)
        if agent is None or agent.status is not AgentStatus.ASSIGNED:
            continue
        if release.at > at + TIME_EPS:
            continue
        ev = Event(
            at=at,
            kind=EventKind.AGENT_RELEASED,
            payload={
                "agent": release.agent,
                "thread": release.thread,
                "location": [agent.location.lon, agent.location.lat],
            },
        )
        world = apply_event(world, ev)
        events.append(ev)

    # Starts last: a same-instant start follows the completion freeing it.
    for e in sorted(schedule.entries, key=lambda e: (e.task,)):
        if abs(e.start - at) > TIME_EPS:
            continue
        task = world.macro_tasks.get(e.task)
        if task is None or task.state is not TaskState.REVEALED or task.remaining <= 0:
            continue
        ev = Event(
            at=at,
            kind=EventKind.TASK_STARTED,
            payload={
                "task": e.task,
                "region": e.region,
                "task_type": e.task_type,
                "agents": sorted(e.agents),
                "start": e.start,
                "finish": e.finish,
            },
        )
        world = apply_event(world, ev)
        events.append(ev)
    return world, events


# ---------------------------------------------------------------------------
# Closed-loop run


def _interruption_events(
    world: WorldState, schedule: Schedule, at: float
) -> list[Event]:
    """task_progress snapshots capturing partial work and positions at stop."""
    events: list[Event] = []
    for e in sorted(schedule.entries, key=lambda e: (e.start, e.task)):
        task = world.macro_tasks.get(e.task)
        if task is None or task.state is TaskState.DONE:
            continue
        if e.finish <= at + TIME_EPS:
            continue
        involved = any(
            world.agents[aid].status in (AgentStatus.WORKING, AgentStatus.ASSIGNED)
            for aid in e.agents
            if aid in world.agents
        )
        if not involved:
            continue
        started = e.start <= at + TIME_EPS
        completed = 0
        if started and task.state is TaskState.IN_PROGRESS:
            unit = world.task_types[task.task_type].unit_workload
            completed = min(
                task.remaining, int((at - e.start) * len(e.agents) / unit)
            )
        positions = {
            aid: [world.agents[aid].location.lon, world.agents[aid].location.lat]
            for aid in sorted(e.agents)
            if aid in world.agents
        }
        events.append(
            Event(
                at=at,
                kind=EventKind.TASK_PROGRESS,
                payload={
                    "task": e.task,
                    "region": e.region,
                    "completed": completed,
                    "positions": positions,
                },
            )
        )
    return events


def _score_candidates(
    world: WorldState,
    strategy: Strategy,
    base_decision: StrategicDecision,
    committed: dict[str, str],
    preserved: list[MacroDecision],
) -> dict[str, str] | None:
    """Best merged assignment for re-planning, by greedy predicted makespan."""
    ctx = ScheduleContext(world=world, strategy=strategy)
    best: tuple[float, int, dict[str, str]] | None = None
    for idx, assignment in enumerate(
        strategy_mod.iter_feasible_assignments(
            world, strategy, committed=committed, allow_idle_reserve=True
        )
    ):
        merged = {**committed, **assignment}
        candidate = StrategicDecision(
            id="", strategy=strategy.id, assignment=merged
        )
        entries = scheduler._build_entries(ctx, candidate, preserved=list(preserved))
        span = max((e.finish for e in entries), default=0.0)
        covered = {e.task for e in entries}
        if any(
            tid not in covered
            for tid in scheduler.coverable_task_ids(world, strategy)
        ):
            span = math.inf
        key = (span, idx)
        if best is None or key < (best[0], best[1]):
            best = (span, idx, merged)
    return None if best is None else best[2]


def run(
    world: WorldState,
    strategy: Strategy,
    config: SimConfig,
    *,
    decision: StrategicDecision | None = None,
    choice_cap: int = 20,
) -> Trace:
    """Plan, execute, and re-plan until quiescence or stop_at.

    The initial decision is the best enumerated choice unless one is
    passed in (already applied to the world). Raises LivelockError when
    the world digest repeats with no time progress.
    """
    replans = 0
    events: list[Event] = []

    if decision is None and not quiescent(world):
        choices = strategy_mod.enumerate_choices(world, strategy, choice_cap)
        decision = choices.decisions[0]
        world = strategy_mod.apply_choice(world, decision)

    initial_world = world
    if decision is None:
        return Trace(
            events=(),
            final_world=world,
            replans=0,
            initial_world=initial_world,
        )

    schedule = scheduler.build_schedule(world, strategy, decision)
    last_state: tuple[float, str] | None = None

    while True:
        pending = [
            b
            for e in schedule.entries
            if world.macro_tasks.get(e.task) is not None
            and world.macro_tasks[e.task].state is not TaskState.DONE
            for b in (e.start, e.finish)
            if b > world.time + TIME_EPS
        ]
        next_boundary = min(pending) if pending else math.inf
        target = min(next_boundary, schedule.adaption_time)

        if math.isinf(target):
            if quiescent(world):
                break
            raise LivelockError(
                "revealed work remains that the current strategy cannot execute"
            )

        if config.stop_at is not None and target > config.stop_at + TIME_EPS:
            if world.time < config.stop_at - TIME_EPS:
                world, evs = step(world, schedule, strategy, config.stop_at - world.time)
                events.extend(evs)
            snapshots = _interruption_events(world, schedule, world.time)
            for ev in snapshots:
                world = apply_event(world, ev)
            events.extend(snapshots)
            break

        # Step in tick-bounded increments, landing exactly on the target.
        while world.time < target - TIME_EPS:
            dt = min(config.tick, target - world.time)
            world, evs = step(world, schedule, strategy, dt)
            events.extend(evs)

        all_entries_settled = not any(
            world.macro_tasks.get(e.task) is not None
            and world.macro_tasks[e.task].state is not TaskState.DONE
            for e in schedule.entries
        )
        if quiescent(world) and all_entries_settled:
            break

        if math.isfinite(schedule.adaption_time) and world.time >= schedule.adaption_time - TIME_EPS:
            replans += 1
            state = (world.time, world_digest(world))
            if state == last_state:
                raise LivelockError(f"replanning at t={world.time} made no progress")
            last_state = state
            world, schedule, decision, replan_events = _replan(
                world, strategy, schedule, decision, choice_cap
            )
            events.extend(replan_events)

    final_schedule = schedule
    return Trace(
        events=tuple(events),
        final_world=world,
        replans=replans,
        initial_world=initial_world,
        decision=decision,
        schedule=final_schedule,
    )


def _replan(
    world: WorldState,
    strategy: Strategy,
    schedule: Schedule,
    decision: StrategicDecision,
    choice_cap: int,
) -> tuple[WorldState, Schedule, StrategicDecision, list[Event]]:
    """Adapt at an adaption point; re-enumerate when agents are freed."""
    events: list[Event] = []

    candidate: Schedule | None
    try:
        candidate = scheduler.adapt_schedule(world, strategy, schedule)
    except ReplanRequired:
        candidate = None

    released_now: list[tuple[str, str]] = []
    if candidate is not None:
        for r in scheduler.compute_releases(world, strategy, candidate):
            agent = world.agents.get(r.agent)
            if (
                agent is not None
                and agent.status is AgentStatus.ASSIGNED
                and r.at <= world.time + TIME_EPS
            ):
                released_now.append((r.agent, r.thread))

    available = sorted(
        a.id for a in world.agents.values() if a.status is AgentStatus.AVAILABLE
    )

    if candidate is not None and not released_now and not available:
        ev = Event(at=world.time, kind=EventKind.REPLAN_TRIGGERED, payload={})
        world = apply_event(world, ev)
        events.append(ev)
        return world, candidate, candidate.decision, events

    # Re-enumeration path: pool freed agents, keep working commitments.
    repooled = {aid for aid, _ in released_now} | set(available)
    if candidate is None:
        # Decision infeasible: every idle assignment goes back to the pool.
        repooled |= {
            aid
            for aid in decision.assignment
            if aid in world.agents
            and world.agents[aid].status is AgentStatus.ASSIGNED
        }
    committed: dict[str, str] = {}
    for aid, tid in decision.assignment.items():
        agent = world.agents.get(aid)
        if agent is None or aid in repooled:
            continue
        if agent.status in (AgentStatus.WORKING, AgentStatus.ASSIGNED):
            committed[aid] = tid

    preserved = [
        e
        for e in schedule.entries
        if e.start <= world.time + TIME_EPS
        and e.finish > world.time + TIME_EPS
        and world.macro_tasks.get(e.task) is not None
        and world.macro_tasks[e.task].state is TaskState.IN_PROGRESS
        and all(aid in committed for aid in e.agents)
    ]

    scratch = world.replace_agents(
        dc_replace(
            world.agents[aid], status=AgentStatus.AVAILABLE, assigned_thread=None
        )
        for aid in sorted(repooled)
        if aid in world.agents
        and world.agents[aid].status is not AgentStatus.DISABLED
    )
    merged = _score_candidates(
        scratch, strategy, decision, committed, preserved
    )
    if merged is None:
        raise ReplanRequired(
            strategy_mod._diagnose_infeasibility(scratch, strategy, committed)
        )

    new_decision = StrategicDecision(
        id=f"re|{'|'.join(f'{a}:{t}' for a, t in sorted(merged.items()))}",
        strategy=strategy.id,
        assignment=merged,
        score=math.nan,
    )
    freed = sorted(
        aid
        for aid in repooled
        if aid in world.agents
        and world.agents[aid].status is AgentStatus.ASSIGNED
    )
    ev = Event(
        at=world.time,
        kind=EventKind.REPLAN_TRIGGERED,
        payload={
            "released": freed,
            "released_locations": {
                aid: [world.agents[aid].location.lon, world.agents[aid].location.lat]
                for aid in freed
            },
            "assignment": dict(sorted(merged.items())),
            "decision": new_decision.id,
        },
    )
    world = apply_event(world, ev)
    events.append(ev)

    carry = Schedule(
        decision=new_decision,
        entries=schedule.entries,
        adaption_time=schedule.adaption_time,
        makespan=schedule.makespan,
        created_at=schedule.created_at,
        world_digest=schedule.world_digest,
    )
    new_schedule = scheduler.adapt_schedule(world, strategy, carry)
    return world, new_schedule, new_decision, events
