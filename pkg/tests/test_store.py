import json
import math
import random

import pytest

from fieldops.errors import OrderingError, ParseError, ValidationError, VersionError
from fieldops.model import Agent, Event, GeoPoint, MacroTask, Strategy, TaskType, Thread, WorldState
from fieldops.serialize import canonical_json, format_real, world_digest
from fieldops.store import (
    EventLog,
    ScenarioDocument,
    load_scenario,
    replay,
    save_snapshot,
)

from helpers import mk_world, random_document, square_region


class TestCanonicalJson:
    def test_sorted_keys_compact(self):
        assert canonical_json({"b": 1, "a": [1.5, True, None]}) == '{"a":[1.5,true,null],"b":1}'

    def test_nine_significant_digits(self):
        assert format_real(1 / 3) == "0.333333333"
        assert format_real(100.0) == "100"
        assert format_real(-0.0) == "0"

    def test_infinity_sentinel(self):
        assert canonical_json({"adaption_time": math.inf}) == '{"adaption_time":"inf"}'

    def test_reparse_idempotent(self):
        rng = random.Random(2)
        for _ in range(200):
            x = rng.uniform(-1e6, 1e6)
            once = format_real(x)
            again = format_real(float(json.loads(once)))
            assert once == again


class TestScenarioRoundTrip:
    def test_save_then_load_equal_digest(self):
        doc = random_document(random.Random(1))
        loaded = load_scenario(save_snapshot(doc))
        assert world_digest(loaded.world) == world_digest(doc.world)
        assert loaded == doc

    def test_serialize_twice_identical(self):
        doc = random_document(random.Random(2))
        assert save_snapshot(doc) == save_snapshot(doc)

    def test_construction_order_irrelevant_bytes(self):
        doc = random_document(random.Random(3))
        w = doc.world
        flipped_world = WorldState(
            time=w.time,
            agents={k: w.agents[k] for k in reversed(list(w.agents))},
            regions={k: w.regions[k] for k in reversed(list(w.regions))},
            task_types=w.task_types,
            macro_tasks={k: w.macro_tasks[k] for k in reversed(list(w.macro_tasks))},
            refuges=w.refuges,
            casualty_clusters=w.casualty_clusters,
        )
        flipped = ScenarioDocument(
            world=flipped_world,
            strategies=tuple(reversed(doc.strategies)),
            metadata=dict(reversed(list(doc.metadata.items()))),
        )
        assert save_snapshot(doc) == save_snapshot(flipped)

    def test_unknown_format_version(self):
        doc = json.loads(save_snapshot(random_document(random.Random(4))))
        doc["format_version"] = 99
        with pytest.raises(VersionError):
            load_scenario(json.dumps(doc))

    def test_validation_error_names_path(self):
        doc = json.loads(save_snapshot(random_document(random.Random(5))))
        doc["world"]["agents"][0]["speed"] = -1.0
        with pytest.raises(ValidationError) as err:
            load_scenario(json.dumps(doc))
        agent_id = doc["world"]["agents"][0]["id"]
        assert any(v.path == f"agents/{agent_id}/speed" for v in err.value.violations)

    def test_parse_error_carries_field_path(self):
        doc = json.loads(save_snapshot(random_document(random.Random(6))))
        del doc["world"]["agents"][0]["speed"]
        with pytest.raises(ParseError) as err:
            load_scenario(json.dumps(doc))
        assert "agents/0" in str(err.value)

    def test_malformed_json_reports_line(self):
        with pytest.raises(ParseError) as err:
            load_scenario(b'{"format_version": 1,\n  "world": }')
        assert "line 2" in str(err.value)

    def test_adaption_time_inf_renders_as_string(self):
        from fieldops.model import MacroDecision, Schedule, StrategicDecision
        from fieldops.serialize import schedule_to_doc

        s = Schedule(
            decision=StrategicDecision("d", "s", {}),
            entries=(),
            adaption_time=math.inf,
            makespan=0.0,
            created_at=0.0,
            world_digest="0" * 16,
        )
        assert '"adaption_time":"inf"' in canonical_json(schedule_to_doc(s))


class TestRoundTripCorpus:
    def test_hundred_random_documents(self):
        rng = random.Random(42)
        for _ in range(100):
            doc = random_document(rng)
            data = save_snapshot(doc)
            loaded = load_scenario(data)
            assert loaded == doc
            assert save_snapshot(loaded) == data


class TestEventLog:
    def test_empty_log_identity(self):
        w = mk_world(regions=[square_region("r", 135, 35)])
        assert replay([], w) == w

    def test_out_of_order_append_rejected(self):
        w = mk_world()
        log = EventLog(w)
        log.append(Event(at=9.0, kind="replan_triggered", payload={}))
        with pytest.raises(OrderingError):
            log.append(Event(at=5.0, kind="replan_triggered", payload={}))

    def test_out_of_order_replay_rejected(self):
        w = mk_world()
        events = [
            Event(at=9.0, kind="replan_triggered", payload={}),
            Event(at=5.0, kind="replan_triggered", payload={}),
        ]
        with pytest.raises(OrderingError):
            replay(events, w)

    def test_replay_applies_simulator_semantics(self):
        w = mk_world(
            agents=[Agent("a1", "u", GeoPoint(135, 35), 1.0, frozenset({"SEARCH"}))],
            task_types=[TaskType("SEARCH", 10.0)],
        )
        ev = Event(at=3.0, kind="agent_disabled", payload={"agent": "a1"})
        out = replay([ev], w)
        assert out.agents["a1"].status.value == "disabled"
        assert out.time == 3.0
