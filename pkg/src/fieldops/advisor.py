"""Strategy critique: compare the committed plan against the optimal one
and emit actionable, mechanically applicable recommendations.

Four deterministic rules fire at most once each: rebalance toward the
optimal assignment, flag threads nobody can serve, raise the priority of a
starved thread, and flag task types with thin capability coverage. The
rules are fixed; no learning is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace
from enum import Enum
from typing import Iterable

from . import scheduler
from .errors import ConflictError, StalenessError
from .model import (
    AgentStatus,
    Schedule,
    Strategy,
    TaskState,
    Thread,
    WorldState,
)
from .search import OptimalPlan
from .serialize import world_digest

DEFAULT_PRIORITY_GAP = 0.10


class RecommendationKind(str, Enum):
    REBALANCE_AGENTS = "rebalance_agents"
    RAISE_PRIORITY = "raise_priority"
    MERGE_THREADS = "merge_threads"
    ADD_CAPABILITY_COVERAGE = "add_capability_coverage"
    INFEASIBLE_THREAD = "infeasible_thread"


_KIND_ORDER = {
    RecommendationKind.REBALANCE_AGENTS: 0,
    RecommendationKind.INFEASIBLE_THREAD: 1,
    RecommendationKind.RAISE_PRIORITY: 2,
    RecommendationKind.ADD_CAPABILITY_COVERAGE: 3,
    RecommendationKind.MERGE_THREADS: 4,
}


@dataclass(frozen=True, slots=True)
class Recommendation:
    id: str
    kind: RecommendationKind
    subject: tuple[str, ...]
    rationale: str
    predicted_gain: float
    details: dict[str, object] = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "subject": list(self.subject),
            "rationale": self.rationale,
            "predicted_gain": float(self.predicted_gain),
            "details": dict(self.details),
        }


def critique(
    world: WorldState,
    strategy: Strategy,
    current: Schedule,
    optimal: OptimalPlan,
    *,
    priority_gap: float = DEFAULT_PRIORITY_GAP,
) -> list[Recommendation]:
    """Deterministic rule pass over the committed schedule vs the optimum.

    Both inputs must have been computed from the same world snapshot;
    mismatching embedded digests raise StalenessError.
    """
    snapshot = world_digest(world)
    for name, digest in (
        ("current schedule", current.world_digest),
        ("optimal plan", optimal.schedule.world_digest),
    ):
        if digest != snapshot:
            raise StalenessError(
                f"{name} was computed against {digest}, world is {snapshot}"
            )

    recs: list[Recommendation] = []

    # R1: the optimum assigns at least one agent differently.
    diff = sorted(
        aid
        for aid in set(current.decision.assignment) | set(optimal.decision.assignment)
        if current.decision.assignment.get(aid) != optimal.decision.assignment.get(aid)
    )
    if diff:
        gain = max(0.0, current.makespan - optimal.makespan)
        recs.append(
            Recommendation(
                id="rec-rebalance",
                kind=RecommendationKind.REBALANCE_AGENTS,
                subject=tuple(diff),
                rationale=(
                    f"reassigning {', '.join(diff)} as in the optimal plan cuts "
                    f"makespan from {current.makespan:g} to {optimal.makespan:g}"
                ),
                predicted_gain=gain,
                details={"assignment": dict(sorted(optimal.decision.assignment.items()))},
            )
        )

    # R2: threads with zero capable agents in the whole team.
    active_agents = [
        a for a in world.agents.values() if a.status is not AgentStatus.DISABLED
    ]
    uncoverable = sorted(
        t.id
        for t in strategy.threads
        if not any(a.capabilities & t.goal_task_types for a in active_agents)
    )
    if uncoverable:
        recs.append(
            Recommendation(
                id="rec-infeasible",
                kind=RecommendationKind.INFEASIBLE_THREAD,
                subject=tuple(uncoverable),
                rationale=(
                    f"no agent in the team can serve thread(s) "
                    f"{', '.join(uncoverable)}"
                ),
                predicted_gain=0.0,
                details={},
            )
        )

    # R3: a strictly higher-priority thread finishes much later than a
    # lower-priority one; raising the early finisher rebalances claiming.
    finish_by_thread: dict[str, float] = {}
    for entry in current.entries:
        for aid in entry.agents:
            tid = current.decision.assignment.get(aid)
            if tid is not None:
                finish_by_thread[tid] = max(finish_by_thread.get(tid, 0.0), entry.finish)
    threads = {t.id: t for t in strategy.threads}
    worst: tuple[float, str, str] | None = None  # (gap, hi, lo)
    for hi_id, hi_finish in sorted(finish_by_thread.items()):
        for lo_id, lo_finish in sorted(finish_by_thread.items()):
            hi, lo = threads.get(hi_id), threads.get(lo_id)
            if hi is None or lo is None or hi.priority >= lo.priority:
                continue
            gap = hi_finish - lo_finish
            if gap > priority_gap * current.makespan and (
                worst is None or gap > worst[0]
            ):
                worst = (gap, hi_id, lo_id)
    if worst is not None:
        _, hi_id, lo_id = worst
        new_priority = max(1, threads[lo_id].priority - 1)
        gain = _rebuild_gain(world, strategy, current, lo_id, new_priority)
        recs.append(
            Recommendation(
                id="rec-priority",
                kind=RecommendationKind.RAISE_PRIORITY,
                subject=(lo_id, hi_id),
                rationale=(
                    f"thread {hi_id} (higher priority) finishes "
                    f"{worst[0]:g}s after {lo_id}; raising {lo_id} to priority "
                    f"{new_priority} rebalances task claiming"
                ),
                predicted_gain=gain,
                details={"thread": lo_id, "priority": new_priority},
            )
        )

    # R4: revealed task types covered by fewer than two capable agents.
    revealed_types = sorted(
        {
            t.task_type
            for t in world.macro_tasks.values()
            if t.state in (TaskState.REVEALED, TaskState.IN_PROGRESS)
        }
    )
    thin = [
        tt
        for tt in revealed_types
        if sum(1 for a in active_agents if tt in a.capabilities) < 2
    ]
    if thin:
        recs.append(
            Recommendation(
                id="rec-coverage",
                kind=RecommendationKind.ADD_CAPABILITY_COVERAGE,
                subject=tuple(thin),
                rationale=(
                    f"task type(s) {', '.join(thin)} have fewer than two capable "
                    f"agents; a single loss stalls that work"
                ),
                predicted_gain=0.0,
                details={},
            )
        )

    recs.sort(key=lambda r: (-r.predicted_gain, _KIND_ORDER[r.kind]))
    return recs


def _rebuild_gain(
    world: WorldState,
    strategy: Strategy,
    current: Schedule,
    thread_id: str,
    new_priority: int,
) -> float:
    """Predicted makespan reduction from re-prioritizing one thread."""
    adjusted = Strategy(
        id=strategy.id,
        objective=strategy.objective,
        threads=tuple(
            dc_replace(t, priority=new_priority) if t.id == thread_id else t
            for t in strategy.threads
        ),
    )
    rebuilt = scheduler.build_schedule_unchecked(world, adjusted, current.decision)
    return max(0.0, current.makespan - rebuilt.makespan)


def refine(strategy: Strategy, accepted: Iterable[Recommendation]) -> Strategy:
    """Apply accepted recommendations mechanically.

    Raises ConflictError when two accepted recommendations set the same
    strategy field to different values.
    """
    edits: dict[str, tuple[str, object]] = {}  # path -> (rec id, value)

    def put(rec: Recommendation, path: str, value: object) -> None:
        if path in edits and edits[path][1] != value:
            raise ConflictError(edits[path][0], rec.id, path)
        edits.setdefault(path, (rec.id, value))

    threads = {t.id: t for t in strategy.threads}
    removed: set[str] = set()

    for rec in accepted:
        if rec.kind is RecommendationKind.REBALANCE_AGENTS:
            assignment = rec.details.get("assignment", {})
            counts: dict[str, int] = {t: 0 for t in threads}
            for tid in assignment.values():
                if tid in counts:
                    counts[tid] += 1
            for tid, target in counts.items():
                t = threads[tid]
                put(rec, f"threads/{tid}/min_agents", min(t.min_agents, target))
                put(rec, f"threads/{tid}/max_agents", max(t.max_agents, target))
        elif rec.kind is RecommendationKind.RAISE_PRIORITY:
            tid = str(rec.details.get("thread") or rec.subject[0])
            if tid not in threads:
                continue
            target = rec.details.get("priority")
            value = int(target) if target is not None else max(1, threads[tid].priority - 1)
            put(rec, f"threads/{tid}/priority", max(1, value))
        elif rec.kind is RecommendationKind.INFEASIBLE_THREAD:
            for tid in rec.subject:
                if tid in threads:
                    put(rec, f"threads/{tid}/min_agents", 0)
        elif rec.kind is RecommendationKind.MERGE_THREADS:
            if len(rec.subject) != 2:
                continue
            keep_id, drop_id = rec.subject
            if keep_id not in threads or drop_id not in threads:
                continue
            keep, drop = threads[keep_id], threads[drop_id]
            put(rec, f"threads/{drop_id}", None)
            removed.add(drop_id)
            put(
                rec,
                f"threads/{keep_id}/goal_task_types",
                frozenset(keep.goal_task_types | drop.goal_task_types),
            )
            merged_regions = (
                frozenset()
                if not keep.goal_regions or not drop.goal_regions
                else frozenset(keep.goal_regions | drop.goal_regions)
            )
            put(rec, f"threads/{keep_id}/goal_regions", merged_regions)
            put(rec, f"threads/{keep_id}/priority", min(keep.priority, drop.priority))
            put(rec, f"threads/{keep_id}/min_agents", keep.min_agents + drop.min_agents)
            put(rec, f"threads/{keep_id}/max_agents", keep.max_agents + drop.max_agents)
        # add_capability_coverage carries no strategy edit: coverage is an
        # agent-roster property, surfaced for the human to act on.

    new_threads: list[Thread] = []
    for t in strategy.threads:
        if t.id in removed:
            continue
        fields: dict[str, object] = {}
        for name in ("priority", "min_agents", "max_agents", "goal_task_types", "goal_regions"):
            hit = edits.get(f"threads/{t.id}/{name}")
            if hit is not None:
                fields[name] = hit[1]
        new_threads.append(dc_replace(t, **fields) if fields else t)
    return Strategy(id=strategy.id, objective=strategy.objective, threads=tuple(new_threads))
