"""State-space search for the optimal assignment of agents to threads.

Depth-first branch and bound: agents in id order are the decision
variables, threads the values (best-first child ordering by a cheap
predicted-completion heuristic), leaves evaluated by the scheduler.
A node is pruned when the admissible lower bound cannot beat the
incumbent. Exhaustion proves optimality; a node budget returns the
incumbent unproven.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import geo, scheduler, strategy as strategy_mod
from .errors import InfeasibleStrategyError, SizeGuardError
from .model import (
    AgentStatus,
    Schedule,
    StrategicDecision,
    Strategy,
    TaskState,
    WorldState,
)
from .scheduler import ScheduleContext
from .serialize import decision_to_doc, schedule_to_doc


@dataclass(frozen=True, slots=True)
class SearchNode:
    """A partial assignment: depth equals the number of agents fixed."""

    decision_prefix: dict[str, str]
    scheduled_makespan: float = 0.0
    depth: int = 0


@dataclass(frozen=True, slots=True)
class OptimalPlan:
    decision: StrategicDecision
    schedule: Schedule
    makespan: float
    nodes_expanded: int
    proven_optimal: bool

    def to_doc(self) -> dict:
        from .serialize import real_to_doc

        return {
            "decision": decision_to_doc(self.decision),
            "schedule": schedule_to_doc(self.schedule),
            "makespan": real_to_doc(self.makespan),
            "nodes_expanded": self.nodes_expanded,
            "proven_optimal": self.proven_optimal,
        }


def lower_bound(
    world: WorldState, partial: SearchNode, strategy: Strategy | None = None
) -> float:
    """Admissible lower bound on any completion of the partial assignment.

    max of: remaining coverable workload spread over every capable agent,
    the smallest single-agent travel time to any unscheduled task, and the
    makespan already committed by the prefix. Tasks no decision could
    execute are excluded so the bound never exceeds an achievable score.
    """
    agents = [
        a for a in world.agents.values() if a.status is not AgentStatus.DISABLED
    ]
    if strategy is not None:
        eligible_ids = scheduler.coverable_task_ids(world, strategy)
        tasks = [
            t
            for t in world.macro_tasks.values()
            if t.id in eligible_ids
        ]
    else:
        tasks = [
            t
            for t in world.macro_tasks.values()
            if t.state is TaskState.REVEALED
            and t.remaining > 0
            and any(t.task_type in a.capabilities for a in agents)
        ]
    best = partial.scheduled_makespan
    if tasks:
        workload = sum(
            t.remaining * world.task_types[t.task_type].unit_workload for t in tasks
        )
        type_pool = {t.task_type for t in tasks}
        rate = sum(1 for a in agents if a.capabilities & type_pool)
        if rate:
            best = max(best, world.time + workload / rate)
        travel_floor = math.inf
        for t in tasks:
            centroid = geo.region_centroid(world.regions[t.region]).point
            reach = min(
                geo.haversine_distance(a.location, centroid) / a.speed
                for a in agents
                if t.task_type in a.capabilities
            )
            travel_floor = min(travel_floor, reach)
        if math.isfinite(travel_floor):
            best = max(best, world.time + travel_floor)
    return best


class _Search:
    def __init__(self, world: WorldState, strat: Strategy, budget: int | None):
        self.world = world
        self.strategy = strat
        self.budget = budget
        self.ctx = ScheduleContext(world=world, strategy=strat)
        self.threads = sorted(strat.threads, key=lambda t: t.id)
        self.agents = sorted(
            (
                a
                for a in world.agents.values()
                if a.status in (AgentStatus.AVAILABLE, AgentStatus.ASSIGNED)
            ),
            key=lambda a: a.id,
        )
        self.counts = {t.id: 0 for t in self.threads}
        self.assignment: dict[str, str] = {}
        self.incumbent: tuple[float, str, StrategicDecision, Schedule] | None = None
        self.nodes_expanded = 0
        self.exhausted = True
        self.root_bound = lower_bound(world, SearchNode({}, 0.0, 0), strat)
        self.min_total = sum(t.min_agents for t in self.threads)
        # Cheap child-ordering heuristic: eligible workload per thread.
        self.thread_load = {
            t.id: sum(
                task.remaining * world.task_types[task.task_type].unit_workload
                for task in world.macro_tasks.values()
                if task.state is TaskState.REVEALED
                and scheduler.thread_can_do(t, task)
            )
            for t in self.threads
        }

    def _evaluate_leaf(self, reserved: int) -> None:
        for t in self.threads:
            if self.counts[t.id] < t.min_agents:
                return
        if reserved and any(self.counts[t.id] < t.max_agents for t in self.threads):
            return
        decision = StrategicDecision(
            id="", strategy=self.strategy.id, assignment=dict(self.assignment)
        )
        schedule = scheduler.build_schedule_unchecked(
            self.world, self.strategy, decision, ctx=self.ctx
        )
        score = scheduler.plan_score(self.world, self.strategy, schedule)
        sig = decision.signature()
        key = (score, sig)
        if self.incumbent is None or key < (self.incumbent[0], self.incumbent[1]):
            final = StrategicDecision(
                id=f"opt|{sig}",
                strategy=self.strategy.id,
                assignment=dict(self.assignment),
                score=score,
            )
            schedule = Schedule(
                decision=final,
                entries=schedule.entries,
                adaption_time=schedule.adaption_time,
                makespan=schedule.makespan,
                created_at=schedule.created_at,
                world_digest=schedule.world_digest,
            )
            self.incumbent = (score, sig, final, schedule)

    def _out_of_budget(self) -> bool:
        if self.budget is not None and self.nodes_expanded >= self.budget:
            self.exhausted = False
            return True
        return False

    def _children(self) -> list[str | None]:
        order = sorted(
            (t for t in self.threads),
            key=lambda t: (
                self.thread_load[t.id] / (self.counts[t.id] + 1),
                t.id,
            ),
        )
        out: list[str | None] = [t.id for t in order]
        out.append(None)  # reserve branch last
        return out

    def _dfs(self, i: int, reserved: int) -> None:
        if i == len(self.agents):
            self._evaluate_leaf(reserved)
            return
        if self.incumbent is not None:
            bound = max(self.root_bound, 0.0)
            if bound >= self.incumbent[0] - 1e-12:
                # Cannot strictly beat the incumbent anywhere below.
                return
        # Remaining agents must still be able to satisfy minimum bounds.
        deficit = sum(
            max(0, t.min_agents - self.counts[t.id]) for t in self.threads
        )
        if deficit > len(self.agents) - i:
            return
        if self._out_of_budget():
            return
        self.nodes_expanded += 1
        agent = self.agents[i]
        for choice in self._children():
            if self._out_of_budget():
                return
            if choice is None:
                self._dfs(i + 1, reserved + 1)
                continue
            thread = next(t for t in self.threads if t.id == choice)
            if self.counts[choice] >= thread.max_agents:
                continue
            if not (agent.capabilities & thread.goal_task_types):
                continue
            self.counts[choice] += 1
            self.assignment[agent.id] = choice
            self._dfs(i + 1, reserved)
            del self.assignment[agent.id]
            self.counts[choice] -= 1

    def run(self) -> OptimalPlan:
        # Seed the incumbent with a deterministic greedy dive so a budget of
        # any size still returns a feasible plan.
        seeded = False
        for assignment in strategy_mod.iter_feasible_assignments(
            self.world, self.strategy, include_assigned=True
        ):
            self.assignment = dict(assignment)
            for tid in self.counts:
                self.counts[tid] = 0
            for tid in assignment.values():
                self.counts[tid] += 1
            self._evaluate_leaf(
                reserved=len(self.agents) - len(assignment)
            )
            seeded = self.incumbent is not None
            if seeded:
                break
        if not seeded:
            raise InfeasibleStrategyError(
                strategy_mod._diagnose_infeasibility(self.world, self.strategy, {})
            )
        self.assignment = {}
        for tid in self.counts:
            self.counts[tid] = 0
        self._dfs(0, 0)
        makespan, _, decision, schedule = self.incumbent
        return OptimalPlan(
            decision=decision,
            schedule=schedule,
            makespan=makespan,
            nodes_expanded=self.nodes_expanded,
            proven_optimal=self.exhausted,
        )


def optimal_plan(
    world: WorldState, strat: Strategy, budget: int | None = None
) -> OptimalPlan:
    """Best strategic decision plus its schedule and minimal makespan.

    budget caps node expansions; None searches to exhaustion and proves
    optimality.
    """
    from .model import validate_strategy
    from .errors import ValidationError

    problems = validate_strategy(world, strat)
    if problems:
        raise ValidationError(problems)
    return _Search(world, strat, budget).run()


def brute_force_makespan(
    world: WorldState, strat: Strategy
) -> tuple[StrategicDecision, float]:
    """Exhaustive oracle over every feasible decision; guards small sizes.

    Ties resolve to the lexicographically smallest assignment signature.
    """
    available = [
        a
        for a in world.agents.values()
        if a.status in (AgentStatus.AVAILABLE, AgentStatus.ASSIGNED)
    ]
    if len(available) > 6 or len(strat.threads) > 4:
        raise SizeGuardError(
            f"brute force limited to 6 agents / 4 threads, got "
            f"{len(available)} / {len(strat.threads)}"
        )
    ctx = ScheduleContext(world=world, strategy=strat)
    best: tuple[float, str, StrategicDecision] | None = None
    for assignment in strategy_mod.iter_feasible_assignments(
        world, strat, include_assigned=True
    ):
        decision = StrategicDecision(
            id="", strategy=strat.id, assignment=assignment
        )
        schedule = scheduler.build_schedule_unchecked(world, strat, decision, ctx=ctx)
        score = scheduler.plan_score(world, strat, schedule)
        sig = decision.signature()
        key = (score, sig)
        if best is None or key < (best[0], best[1]):
            best = (
                score,
                sig,
                StrategicDecision(
                    id=f"bf|{sig}",
                    strategy=strat.id,
                    assignment=assignment,
                    score=score,
                ),
            )
    if best is None:
        raise InfeasibleStrategyError(
            strategy_mod._diagnose_infeasibility(world, strat, {})
        )
    return best[2], best[0]
