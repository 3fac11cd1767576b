import random

import pytest

from fieldops.errors import ContractError, LivelockError, ReplanRequired
from fieldops.model import (
    Agent,
    AgentStatus,
    Event,
    EventKind,
    GeoPoint,
    MacroTask,
    Strategy,
    TaskState,
    TaskType,
    Thread,
)
from fieldops.scheduler import adapt_schedule, build_schedule
from fieldops.serialize import world_digest
from fieldops.simulator import (
    SimConfig,
    apply_event,
    inject_event,
    quiescent,
    run,
    step,
)
from fieldops.store import replay, save_trace, trace_to_doc
from fieldops.strategy import apply_choice, enumerate_choices

from helpers import (
    CITY_LAT,
    CITY_LON,
    hand_traced_world,
    mk_world,
    random_sim_scenario,
    square_region,
)


def planned(world, strategy):
    choices = enumerate_choices(world, strategy, cap=None)
    decision = choices.decisions[0]
    world = apply_choice(world, decision)
    schedule = build_schedule(world, strategy, decision)
    return world, decision, schedule


class TestStep:
    def test_task_done_emitted_at_exact_time(self):
        world, strategy = hand_traced_world()
        world, decision, schedule = planned(world, strategy)
        world, events = step(world, schedule, strategy, dt=200.0)
        dones = [e for e in events if e.kind is EventKind.TASK_DONE]
        assert len(dones) == 1
        assert dones[0].at == pytest.approx(150.0, abs=1e-6)
        assert world.time == pytest.approx(200.0)
        assert world.macro_tasks["t1"].state is TaskState.DONE

    def test_empty_schedule_time_advances_no_events(self):
        world, strategy = hand_traced_world()
        world = world.replace_task(MacroTask("t1", "SEARCH", "r1", 0, state=TaskState.DONE))
        world, decision, schedule = planned(world, strategy)
        world2, events = step(world, schedule, strategy, dt=5.0)
        assert world2.time == world.time + 5.0
        assert events == []

    def test_reveal_rule_creates_task_in_same_region(self):
        world, strategy = hand_traced_world(with_reveal=True)
        world, decision, schedule = planned(world, strategy)
        world, events = step(world, schedule, strategy, dt=151.0)
        reveals = [e for e in events if e.kind is EventKind.TASKS_REVEALED]
        assert len(reveals) == 1
        created = world.macro_tasks["t1+RESCUE"]
        assert created.state is TaskState.REVEALED
        assert created.quantity == 2
        assert created.region == "r1"

    def test_task_started_flips_state_and_status(self):
        world, strategy = hand_traced_world()
        world, decision, schedule = planned(world, strategy)
        world, events = step(world, schedule, strategy, dt=100.0)
        starts = [e for e in events if e.kind is EventKind.TASK_STARTED]
        assert len(starts) == 1
        assert world.macro_tasks["t1"].state is TaskState.IN_PROGRESS
        assert world.agents["a1"].status is AgentStatus.WORKING

    def test_agent_moves_along_path(self):
        world, strategy = hand_traced_world()
        world, decision, schedule = planned(world, strategy)
        start_loc = world.agents["a1"].location
        world, _ = step(world, schedule, strategy, dt=50.0)
        mid = world.agents["a1"].location
        from fieldops.geo import haversine_distance

        moved = haversine_distance(start_loc, mid)
        assert moved == pytest.approx(50.0, abs=0.01)

    def test_rejects_nonpositive_dt(self):
        world, strategy = hand_traced_world()
        world, decision, schedule = planned(world, strategy)
        with pytest.raises(ContractError):
            step(world, schedule, strategy, dt=0.0)

    def test_bare_step_crossing_adaption_emits_notification(self):
        world, strategy = hand_traced_world(with_reveal=True)
        world, decision, schedule = planned(world, strategy)
        world, events = step(world, schedule, strategy, dt=200.0)
        replans = [e for e in events if e.kind is EventKind.REPLAN_TRIGGERED]
        assert len(replans) == 1
        assert replans[0].at == pytest.approx(schedule.adaption_time, abs=1e-6)
        assert replans[0].payload == {}

    def test_release_emitted_at_final_finish(self):
        world, strategy = hand_traced_world()
        world, decision, schedule = planned(world, strategy)
        world, events = step(world, schedule, strategy, dt=150.0)
        releases = [e for e in events if e.kind is EventKind.AGENT_RELEASED]
        assert len(releases) == 1
        assert releases[0].at == pytest.approx(150.0, abs=1e-6)
        assert world.agents["a1"].status is AgentStatus.AVAILABLE


class TestRunHandTraced:
    def test_plain_fixture_completes_without_replan(self):
        world, strategy = hand_traced_world()
        trace = run(world, strategy, SimConfig())
        dones = [e for e in trace.events if e.kind is EventKind.TASK_DONE]
        assert len(dones) == 1
        assert trace.replans == 0
        assert quiescent(trace.final_world)
        assert trace.final_world.time == pytest.approx(150.0, abs=1e-6)

    def test_reveal_chain_two_phases(self):
        world, strategy = hand_traced_world(with_reveal=True)
        trace = run(world, strategy, SimConfig())
        dones = [e for e in trace.events if e.kind is EventKind.TASK_DONE]
        assert len(dones) == 2
        assert trace.replans >= 1
        assert quiescent(trace.final_world)
        # second phase: 2 RESCUE micro tasks at 30 agent-s each, zero travel
        assert trace.final_world.time == pytest.approx(150.0 + 60.0, abs=1e-6)

    def test_no_tasks_trace_empty(self):
        world, strategy = hand_traced_world()
        world = world.replace_task(MacroTask("t1", "SEARCH", "r1", 0, state=TaskState.DONE))
        trace = run(world, strategy, SimConfig())
        assert trace.events == ()
        assert trace.replans == 0

    def test_byte_identical_traces(self):
        world, strategy = hand_traced_world(with_reveal=True)
        t1 = run(world, strategy, SimConfig(seed=3))
        t2 = run(world, strategy, SimConfig(seed=3))
        assert save_trace(t1) == save_trace(t2)

    def test_replay_reproduces_final_digest(self):
        world, strategy = hand_traced_world(with_reveal=True)
        trace = run(world, strategy, SimConfig())
        replayed = replay(trace.events, trace.initial_world)
        assert world_digest(replayed) == world_digest(trace.final_world)

    def test_stop_at_interrupts_with_progress_snapshot(self):
        world, strategy = hand_traced_world()
        trace = run(world, strategy, SimConfig(stop_at=120.0))
        assert trace.final_world.time == pytest.approx(120.0, abs=1e-6)
        progress = [e for e in trace.events if e.kind is EventKind.TASK_PROGRESS]
        assert len(progress) == 1
        replayed = replay(trace.events, trace.initial_world)
        assert world_digest(replayed) == world_digest(trace.final_world)

    def test_tick_does_not_change_events(self):
        world, strategy = hand_traced_world(with_reveal=True)
        t1 = run(world, strategy, SimConfig(tick=1.0))
        t2 = run(world, strategy, SimConfig(tick=0.25))
        k1 = [(e.kind.value, round(e.at, 6)) for e in t1.events]
        k2 = [(e.kind.value, round(e.at, 6)) for e in t2.events]
        assert k1 == k2


class TestReleaseRedeploy:
    def test_released_agent_joins_other_thread(self):
        # T1 finishes quickly; its agent is capable of T2's work, and T2
        # still has an unstarted task. Non-preemption keeps a2's in-progress
        # entry intact, but the release lets a1 take the second task.
        from fieldops.geo import region_centroid

        region = square_region("r1", CITY_LON, CITY_LAT)
        c = region_centroid(region).point
        world = mk_world(
            agents=[
                Agent("a1", "u", c, 1.0, frozenset({"DIG", "HAUL"})),
                Agent("a2", "u", c, 1.0, frozenset({"HAUL"})),
            ],
            regions=[region],
            task_types=[TaskType("DIG", 30.0), TaskType("HAUL", 200.0)],
            tasks=[
                MacroTask("dig", "DIG", "r1", 1),
                MacroTask("haul1", "HAUL", "r1", 2),
                MacroTask("haul2", "HAUL", "r1", 2),
            ],
        )
        strategy = Strategy(
            "s",
            "o",
            (
                Thread("T1", 1, frozenset({"DIG"}), min_agents=0, max_agents=1),
                Thread("T2", 2, frozenset({"HAUL"}), min_agents=1, max_agents=2),
            ),
        )
        trace = run(world, strategy, SimConfig())
        assert quiescent(trace.final_world)
        assert trace.replans >= 1
        replans = [e for e in trace.events if e.kind is EventKind.REPLAN_TRIGGERED]
        assert any(e.payload.get("assignment", {}).get("a1") == "T2" for e in replans)
        # a2 alone would haul 2 x (2 x 200) = 800 s; with a1 redeployed at 30
        # the second task runs in parallel and finishes at 430.
        assert trace.final_world.time == pytest.approx(430.0, abs=1e-6)


class TestInjectEvent:
    def test_disable_idle_agent_minimal_diff(self):
        world, strategy = hand_traced_world()
        ev = Event(at=0.0, kind=EventKind.AGENT_DISABLED, payload={"agent": "a1"})
        out = inject_event(world, ev)
        assert out.agents["a1"].status is AgentStatus.DISABLED
        assert out.macro_tasks == world.macro_tasks
        assert out.regions == world.regions

    def test_disable_sole_agent_then_adapt_signals(self):
        world, strategy = hand_traced_world()
        world, decision, schedule = planned(world, strategy)
        world = inject_event(
            world, Event(at=0.0, kind=EventKind.AGENT_DISABLED, payload={"agent": "a1"})
        )
        with pytest.raises(ReplanRequired):
            adapt_schedule(world, strategy, schedule)

    def test_inject_new_task_completed_by_later_run(self):
        world, strategy = hand_traced_world()
        from fieldops.serialize import task_to_doc

        extra = MacroTask("bonus", "RESCUE", "r1", 1)
        world = inject_event(
            world,
            Event(
                at=0.0,
                kind=EventKind.TASKS_REVEALED,
                payload={"tasks": [task_to_doc(extra)]},
            ),
        )
        trace = run(world, strategy, SimConfig())
        done_ids = {
            e.payload["task"] for e in trace.events if e.kind is EventKind.TASK_DONE
        }
        assert {"t1", "bonus"} <= done_ids

    def test_reject_other_kinds(self):
        world, _ = hand_traced_world()
        with pytest.raises(ContractError):
            inject_event(world, Event(at=0.0, kind=EventKind.TASK_DONE, payload={}))

    def test_reveal_existing_hidden_task(self):
        world, strategy = hand_traced_world()
        hidden = MacroTask("h1", "RESCUE", "r1", 2, state=TaskState.HIDDEN)
        world = world.replace_task(hidden)
        out = inject_event(
            world,
            Event(at=0.0, kind=EventKind.TASKS_REVEALED, payload={"task_ids": ["h1"]}),
        )
        assert out.macro_tasks["h1"].state is TaskState.REVEALED


class TestLivelock:
    def test_unservable_work_raises(self):
        world, strategy = hand_traced_world()
        # Strategy whose single thread cannot serve the revealed task type.
        strategy = Strategy(
            "s1", "o",
            (Thread("T1", 1, frozenset({"RESCUE"}), min_agents=1, max_agents=1),),
        )
        with pytest.raises(LivelockError):
            run(world, strategy, SimConfig())


class TestTraceInvariants:
    def _conservation(self, trace):
        initial = sum(
            t.quantity
            for t in trace.initial_world.macro_tasks.values()
            if t.state in (TaskState.REVEALED, TaskState.IN_PROGRESS)
        )
        revealed = sum(
            int(doc["quantity"])
            for e in trace.events
            if e.kind is EventKind.TASKS_REVEALED
            for doc in e.payload.get("tasks", [])
        )
        completed = sum(
            int(e.payload.get("completed", 0))
            for e in trace.events
            if e.kind in (EventKind.TASK_DONE, EventKind.TASK_PROGRESS)
        )
        remaining = sum(
            t.quantity
            for t in trace.final_world.macro_tasks.values()
            if t.state is not TaskState.HIDDEN
        )
        return initial + revealed, completed + remaining

    def test_conservation_on_random_scenarios(self):
        rng = random.Random(77)
        for i in range(20):
            world, strategy = random_sim_scenario(rng)
            trace = run(world, strategy, SimConfig())
            lhs, rhs = self._conservation(trace)
            assert lhs == rhs, f"scenario {i}"

    def test_time_monotone_and_replayable(self):
        rng = random.Random(78)
        for i in range(10):
            world, strategy = random_sim_scenario(rng)
            trace = run(world, strategy, SimConfig())
            times = [e.at for e in trace.events]
            assert times == sorted(times)
            replayed = replay(trace.events, trace.initial_world)
            assert world_digest(replayed) == world_digest(trace.final_world)

    def test_no_agent_on_two_entries_simultaneously(self):
        rng = random.Random(79)
        for _ in range(10):
            world, strategy = random_sim_scenario(rng)
            trace = run(world, strategy, SimConfig())
            open_tasks: dict[str, str] = {}
            for e in trace.events:
                if e.kind is EventKind.TASK_STARTED:
                    for aid in e.payload["agents"]:
                        assert aid not in open_tasks, (aid, e.payload, open_tasks)
                        open_tasks[aid] = e.payload["task"]
                elif e.kind is EventKind.TASK_DONE:
                    for aid in e.payload["agents"]:
                        open_tasks.pop(aid, None)


class TestMultiThreadRuns:
    def test_invariants_hold_with_releases_and_redeploys(self):
        from helpers import random_multithread_scenario

        rng = random.Random(31337)
        for i in range(25):
            world, strategy = random_multithread_scenario(rng)
            coarse = run(world, strategy, SimConfig(tick=1.0))
            fine = run(world, strategy, SimConfig(tick=0.25))
            assert quiescent(coarse.final_world), f"scenario {i}"
            replayed = replay(coarse.events, coarse.initial_world)
            assert world_digest(replayed) == world_digest(coarse.final_world), f"scenario {i}"
            keys = lambda t: [
                (e.kind.value, round(e.at, 6), e.payload.get("task") or e.payload.get("agent"))
                for e in t.events
            ]
            assert keys(coarse) == keys(fine), f"scenario {i}"
