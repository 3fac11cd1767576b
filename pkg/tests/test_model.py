import copy
import random

import pytest

from fieldops.model import (
    Agent,
    AgentStatus,
    GeoPoint,
    MacroDecision,
    MacroTask,
    Region,
    Schedule,
    StrategicDecision,
    TaskType,
    WorldState,
    check_disjoint_intervals,
    polygon_is_simple,
    validate_world,
)
from fieldops.serialize import world_digest

from helpers import mk_world, square_region


def two_agent_world() -> WorldState:
    return mk_world(
        agents=[
            Agent("a1", "squad", GeoPoint(135.75, 35.0), 1.5, frozenset({"SEARCH"})),
            Agent("a2", "robot", GeoPoint(135.76, 35.01), 2.0, frozenset({"RESCUE"})),
        ],
        regions=[square_region("r1", 135.75, 35.0)],
        task_types=[TaskType("SEARCH", 30.0), TaskType("RESCUE", 40.0)],
        tasks=[MacroTask("t1", "SEARCH", "r1", 2)],
    )


class TestValidateWorld:
    def test_well_formed_world_is_clean(self):
        assert validate_world(two_agent_world()) == []

    def test_zero_speed_flagged_at_path(self):
        w = two_agent_world()
        bad = Agent("a1", "squad", GeoPoint(135.75, 35.0), 0.0, frozenset({"SEARCH"}))
        w = w.replace_agent(bad)
        violations = validate_world(w)
        assert len(violations) == 1
        assert violations[0].path == "agents/a1/speed"

    def test_dangling_region_reference(self):
        w = two_agent_world()
        w = w.replace_task(MacroTask("t9", "SEARCH", "Z9", 1))
        violations = validate_world(w)
        assert [v for v in violations if v.path == "macro_tasks/t9/region"]

    def test_out_of_range_coordinates(self):
        w = two_agent_world()
        bad = Agent("a1", "squad", GeoPoint(200.0, 35.0), 1.0, frozenset({"SEARCH"}))
        violations = validate_world(w.replace_agent(bad))
        assert any(v.path == "agents/a1/location/lon" for v in violations)

    def test_empty_capabilities(self):
        w = two_agent_world()
        bad = Agent("a1", "squad", GeoPoint(135.75, 35.0), 1.0, frozenset())
        violations = validate_world(w.replace_agent(bad))
        assert any(v.path == "agents/a1/capabilities" for v in violations)

    def test_status_thread_consistency(self):
        w = two_agent_world()
        bad = Agent(
            "a1", "squad", GeoPoint(135.75, 35.0), 1.0, frozenset({"SEARCH"}),
            status=AgentStatus.ASSIGNED, assigned_thread=None,
        )
        violations = validate_world(w.replace_agent(bad))
        assert any(v.path == "agents/a1/assigned_thread" for v in violations)

    def test_done_task_with_remaining_quantity(self):
        w = two_agent_world()
        w = w.replace_task(MacroTask("t1", "SEARCH", "r1", 2, state="done"))
        violations = validate_world(w)
        assert any(v.path == "macro_tasks/t1/state" for v in violations)

    def test_certainty_bounds(self):
        w = two_agent_world()
        w = w.replace_task(MacroTask("t1", "SEARCH", "r1", 2, certainty=1.5))
        assert any(v.path == "macro_tasks/t1/certainty" for v in validate_world(w))

    def test_refuge_occupancy_bounds(self):
        from fieldops.model import Refuge

        w = mk_world(refuges=[Refuge("R1", GeoPoint(135, 35), capacity=3, occupied=4)])
        assert any(v.path == "refuges/R1/occupied" for v in validate_world(w))

    def test_self_intersecting_polygon(self):
        bowtie = Region(
            "r", "r",
            (GeoPoint(0, 0), GeoPoint(1, 1), GeoPoint(1, 0), GeoPoint(0, 1)),
        )
        w = mk_world(regions=[bowtie])
        assert any(v.path == "regions/r/boundary" for v in validate_world(w))

    def test_total_on_malformed_input(self):
        # validate_world reports, never raises, even with many breaches
        w = mk_world(
            time=-5.0,
            agents=[Agent("a", "u", GeoPoint(500, 500), -1.0, frozenset())],
            tasks=[MacroTask("t", "NOPE", "NOWHERE", -2, certainty=7.0)],
        )
        violations = validate_world(w)
        assert len(violations) >= 6


class TestPolygonSimple:
    def test_square_is_simple(self):
        r = square_region("r", 135.0, 35.0)
        assert polygon_is_simple(r.boundary)

    def test_bowtie_is_not(self):
        pts = (GeoPoint(0, 0), GeoPoint(1, 1), GeoPoint(1, 0), GeoPoint(0, 1))
        assert not polygon_is_simple(pts)

    def test_repeated_vertex_is_not(self):
        pts = (GeoPoint(0, 0), GeoPoint(1, 0), GeoPoint(1, 0), GeoPoint(0, 1))
        assert not polygon_is_simple(pts)


class TestWorldDigest:
    def test_deep_copy_equal(self):
        w = two_agent_world()
        assert world_digest(w) == world_digest(copy.deepcopy(w))

    def test_one_meter_move_changes_digest(self):
        from helpers import lon_delta_for_distance

        w = two_agent_world()
        a = w.agents["a1"]
        moved = Agent(
            a.id, a.kind,
            GeoPoint(a.location.lon + lon_delta_for_distance(35.0, 1.0), a.location.lat),
            a.speed, a.capabilities,
        )
        assert world_digest(w) != world_digest(w.replace_agent(moved))

    def test_insertion_order_irrelevant(self):
        w = two_agent_world()
        flipped = WorldState(
            time=w.time,
            agents={k: w.agents[k] for k in reversed(list(w.agents))},
            regions=w.regions,
            task_types={k: w.task_types[k] for k in reversed(list(w.task_types))},
            macro_tasks=w.macro_tasks,
            refuges=w.refuges,
            casualty_clusters=w.casualty_clusters,
        )
        assert w == flipped
        assert world_digest(w) == world_digest(flipped)

    def test_any_field_change_changes_digest(self):
        w = two_agent_world()
        rng = random.Random(5)
        variants = [
            w.at_time(1.0),
            w.replace_task(MacroTask("t1", "SEARCH", "r1", 3)),
            w.replace_agent(
                Agent("a1", "squad", GeoPoint(135.75, 35.0), 1.6, frozenset({"SEARCH"}))
            ),
        ]
        digests = {world_digest(w)} | {world_digest(v) for v in variants}
        assert len(digests) == 1 + len(variants)


class TestDisjointIntervals:
    def _schedule(self, entries):
        return Schedule(
            decision=StrategicDecision("d", "s", {"a1": "T1"}),
            entries=tuple(entries),
            adaption_time=float("inf"),
            makespan=max((e.finish for e in entries), default=0.0),
            created_at=0.0,
            world_digest="0" * 16,
        )

    def test_disjoint_ok(self):
        s = self._schedule(
            [
                MacroDecision("t1", "SEARCH", {"a1"}, "r1", 0.0, 10.0, 1),
                MacroDecision("t2", "SEARCH", {"a1"}, "r1", 10.0, 20.0, 1),
            ]
        )
        assert check_disjoint_intervals(s) == []

    def test_overlap_detected(self):
        s = self._schedule(
            [
                MacroDecision("t1", "SEARCH", {"a1"}, "r1", 0.0, 10.0, 1),
                MacroDecision("t2", "SEARCH", {"a1"}, "r1", 9.0, 20.0, 1),
            ]
        )
        assert len(check_disjoint_intervals(s)) == 1
