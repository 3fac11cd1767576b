"""Strategic planning: enumerate and rank agent-to-thread assignments.

Every available agent must be assigned to a thread whose goals intersect
its capabilities; agents may stay in reserve only when every thread is at
its max. Choices are scored by the makespan the scheduler predicts for
them and returned best first, truncated to a cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

from . import scheduler
from .errors import InfeasibleStrategyError, StaleDecisionError, ValidationError
from .model import (
    Agent,
    AgentStatus,
    StrategicDecision,
    Strategy,
    Thread,
    WorldState,
    validate_strategy,
)
from .scheduler import Release, ScheduleContext, compute_releases  # re-exported

__all__ = [
    "ChoiceSet",
    "Release",
    "enumerate_choices",
    "iter_feasible_assignments",
    "apply_choice",
    "compute_releases",
]


@dataclass(frozen=True, slots=True)
class ChoiceSet:
    """Feasible decisions ordered by ascending predicted makespan."""

    decisions: tuple[StrategicDecision, ...]
    truncated: bool

    def to_doc(self) -> dict:
        from .serialize import decision_to_doc

        return {
            "decisions": [decision_to_doc(d) for d in self.decisions],
            "truncated": self.truncated,
        }


def _capable(agent: Agent, thread: Thread) -> bool:
    return bool(agent.capabilities & thread.goal_task_types)


def iter_feasible_assignments(
    world: WorldState,
    strategy: Strategy,
    *,
    committed: Mapping[str, str] | None = None,
    allow_idle_reserve: bool = False,
    include_assigned: bool = False,
) -> Iterator[dict[str, str]]:
    """Yield every feasible assignment of available agents, in canonical order.

    Canonical order: agents iterated by ascending id, each trying threads in
    ascending id order with the reserve option last. `committed` counts
    agents already bound to threads (mid-run re-planning) toward the
    cardinality bounds. With `allow_idle_reserve` an agent no thread can
    take may stay unassigned even when threads are below max. With
    `include_assigned` idle-assigned agents become decision variables too
    (the search baseline evaluates re-assignments of committed agents).
    """
    committed = dict(committed or {})
    statuses = {AgentStatus.AVAILABLE}
    if include_assigned:
        statuses.add(AgentStatus.ASSIGNED)
    threads = sorted(strategy.threads, key=lambda t: t.id)
    agents = sorted(
        (
            a
            for a in world.agents.values()
            if a.status in statuses and a.id not in committed
        ),
        key=lambda a: a.id,
    )
    counts = {t.id: 0 for t in threads}
    for tid in committed.values():
        if tid in counts:
            counts[tid] += 1

    def feasible_leaf(assignment: dict[str, str], reserved: int) -> bool:
        for t in threads:
            if counts[t.id] < t.min_agents:
                return False
        if reserved and not allow_idle_reserve:
            if any(counts[t.id] < t.max_agents for t in threads):
                return False
        return True

    out: dict[str, str] = {}

    def rec(i: int, reserved: int) -> Iterator[dict[str, str]]:
        if i == len(agents):
            if feasible_leaf(out, reserved):
                yield dict(out)
            return
        agent = agents[i]
        for t in threads:
            if counts[t.id] >= t.max_agents or not _capable(agent, t):
                continue
            counts[t.id] += 1
            out[agent.id] = t.id
            yield from rec(i + 1, reserved)
            del out[agent.id]
            counts[t.id] -= 1
        # Reserve branch last; the leaf check rejects it unless every thread
        # is saturated (strict mode) or idling is explicitly allowed.
        yield from rec(i + 1, reserved + 1)

    yield from rec(0, 0)


def _diagnose_infeasibility(
    world: WorldState, strategy: Strategy, committed: Mapping[str, str]
) -> list[str]:
    available = [
        a
        for a in world.agents.values()
        if a.status is AgentStatus.AVAILABLE and a.id not in committed
    ]
    bad = []
    for t in strategy.threads:
        already = sum(1 for tid in committed.values() if tid == t.id)
        capable = sum(1 for a in available if _capable(a, t))
        if already + capable < t.min_agents:
            bad.append(t.id)
    return bad or [t.id for t in strategy.threads]


def enumerate_choices(
    world: WorldState,
    strategy: Strategy,
    cap: int | None = 20,
    *,
    committed: Mapping[str, str] | None = None,
) -> ChoiceSet:
    """All feasible decisions, scored by predicted makespan, best first.

    Ties are broken by decision id, which encodes canonical enumeration
    order. Raises InfeasibleStrategyError naming the blocking threads when
    the feasible set is empty.
    """
    problems = validate_strategy(world, strategy)
    if problems:
        raise ValidationError(problems)
    if cap is not None and cap < 1:
        raise ValueError(f"cap must be positive, got {cap}")

    committed = dict(committed or {})
    ctx = ScheduleContext(world=world, strategy=strategy)
    scored: list[StrategicDecision] = []
    for idx, assignment in enumerate(
        iter_feasible_assignments(world, strategy, committed=committed)
    ):
        merged = {**committed, **assignment}
        candidate = StrategicDecision(
            id=f"c{idx:06d}", strategy=strategy.id, assignment=merged
        )
        schedule = scheduler.build_schedule_unchecked(
            world, strategy, candidate, ctx=ctx
        )
        scored.append(
            StrategicDecision(
                id=candidate.id,
                strategy=strategy.id,
                assignment=merged,
                score=scheduler.plan_score(world, strategy, schedule),
            )
        )
    if not scored:
        raise InfeasibleStrategyError(_diagnose_infeasibility(world, strategy, committed))

    scored.sort(key=lambda d: (d.score, d.id))
    truncated = cap is not None and len(scored) > cap
    if truncated:
        scored = scored[:cap]
    return ChoiceSet(decisions=tuple(scored), truncated=truncated)


def apply_choice(world: WorldState, decision: StrategicDecision) -> WorldState:
    """New world where every assigned agent carries its thread.

    Rejects decisions referencing unknown or no-longer-available agents.
    """
    updated = []
    for aid, tid in sorted(decision.assignment.items()):
        agent = world.agents.get(aid)
        if agent is None:
            raise StaleDecisionError(f"decision references unknown agent {aid!r}")
        if agent.status in (AgentStatus.ASSIGNED, AgentStatus.WORKING):
            if agent.assigned_thread == tid:
                continue  # already applied, e.g. mid-run re-assignment no-op
            raise StaleDecisionError(
                f"agent {aid} is already assigned to {agent.assigned_thread!r}"
            )
        if agent.status is not AgentStatus.AVAILABLE:
            raise StaleDecisionError(
                f"agent {aid} is {agent.status.value}, not available"
            )
        updated.append(
            Agent(
                id=agent.id,
                kind=agent.kind,
                location=agent.location,
                speed=agent.speed,
                capabilities=agent.capabilities,
                status=AgentStatus.ASSIGNED,
                assigned_thread=tid,
            )
        )
    return world.replace_agents(updated)


def revert_choice(world: WorldState, decision: StrategicDecision) -> WorldState:
    """Undo apply_choice: assigned (not working) agents back to available."""
    updated = []
    for aid in sorted(decision.assignment):
        agent = world.agents.get(aid)
        if agent is None or agent.status is not AgentStatus.ASSIGNED:
            continue
        updated.append(
            Agent(
                id=agent.id,
                kind=agent.kind,
                location=agent.location,
                speed=agent.speed,
                capabilities=agent.capabilities,
                status=AgentStatus.AVAILABLE,
                assigned_thread=None,
            )
        )
    return world.replace_agents(updated)
