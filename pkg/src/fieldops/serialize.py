"""Canonical document conversion and hashing for the core model types.

The canonical text form is JSON with keys sorted lexicographically,
keyed collections rendered as lists ordered by id, reals printed with 9
significant digits, and infinity encoded as the string "inf". Equal values
serialize byte-identically regardless of construction order, which makes
the 64-bit digest a stable identity for snapshots.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any, Callable, Mapping

from .errors import ParseError
from .model import (
    Agent,
    AgentStatus,
    CasualtyCluster,
    Event,
    EventKind,
    GeoPoint,
    MacroDecision,
    MacroTask,
    Refuge,
    Region,
    RevealRule,
    Schedule,
    StrategicDecision,
    Strategy,
    TaskState,
    TaskType,
    Thread,
    Violation,
    WorldState,
)

# ---------------------------------------------------------------------------
# Canonical JSON text


def format_real(x: float) -> str:
    """Render a real with 9 significant digits; idempotent under reparse."""
    if x == math.inf:
        return '"inf"'
    if x != x or x == -math.inf:
        raise ValueError(f"cannot serialize non-finite real {x!r}")
    if x == 0.0:
        x = 0.0  # collapse -0.0
    text = f"{x:.9g}"
    return text


def canonical_json(value: Any) -> str:
    """Serialize a document tree to canonical JSON text."""
    parts: list[str] = []
    _emit(value, parts)
    return "".join(parts)


def canonical_bytes(value: Any) -> bytes:
    return canonical_json(value).encode("utf-8")


def _emit(value: Any, parts: list[str]) -> None:
    if value is None:
        parts.append("null")
    elif value is True:
        parts.append("true")
    elif value is False:
        parts.append("false")
    elif isinstance(value, str):
        parts.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, int):
        parts.append(str(value))
    elif isinstance(value, float):
        parts.append(format_real(value))
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(value):
            if i:
                parts.append(",")
            _emit(item, parts)
        parts.append("]")
    elif isinstance(value, Mapping):
        parts.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                parts.append(",")
            if not isinstance(key, str):
                raise ValueError(f"document keys must be strings, got {key!r}")
            parts.append(json.dumps(key, ensure_ascii=False))
            parts.append(":")
            _emit(value[key], parts)
        parts.append("}")
    else:
        raise ValueError(f"cannot serialize value of type {type(value).__name__}")


def digest_doc(doc: Any) -> str:
    """64-bit content digest of a document tree, as 16 hex characters."""
    return hashlib.blake2b(canonical_bytes(doc), digest_size=8).hexdigest()


def world_digest(world: WorldState) -> str:
    """Digest equal for field-equal worlds, order-insensitive over collections."""
    return digest_doc(world_to_doc(world))


# ---------------------------------------------------------------------------
# Field coercion helpers (parse side)


def _need(doc: Mapping, key: str, path: str) -> Any:
    if key not in doc:
        raise ParseError(f"{path}/{key}", "missing required field")
    return doc[key]


def _as_obj(value: Any, path: str, required: set[str], optional: set[str] = frozenset()) -> Mapping:
    if not isinstance(value, Mapping):
        raise ParseError(path, f"expected object, got {type(value).__name__}")
    unknown = sorted(k for k in value if k not in required and k not in optional)
    if unknown:
        raise ParseError(path, f"unexpected fields: {unknown}")
    missing = sorted(k for k in required if k not in value)
    if missing:
        raise ParseError(path, f"missing required fields: {missing}")
    return value


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise ParseError(path, f"expected non-empty string, got {value!r}")
    return value


def _as_real(value: Any, path: str, allow_inf: bool = False) -> float:
    if allow_inf and value == "inf":
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(path, f"expected number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise ParseError(path, f"expected finite number, got {value!r}")
    return x


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(path, f"expected integer, got {value!r}")
    return value


def _as_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ParseError(path, f"expected array, got {type(value).__name__}")
    return value


def _as_point(value: Any, path: str) -> GeoPoint:
    items = _as_list(value, path)
    if len(items) != 2:
        raise ParseError(path, "expected [lon, lat] pair")
    return GeoPoint(_as_real(items[0], f"{path}/0"), _as_real(items[1], f"{path}/1"))


def _as_enum(enum_cls, value: Any, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ParseError(path, f"invalid value {value!r}; expected one of: {allowed}")


# ---------------------------------------------------------------------------
# Core types <-> documents


def real_to_doc(x: float) -> float | str:
    """Document form of a real; infinity becomes the "inf" sentinel so the
    documents stay plain JSON for any encoder."""
    return "inf" if x == math.inf else float(x)


def point_to_doc(p: GeoPoint) -> list[float]:
    return [float(p[0]), float(p[1])]


def region_to_doc(r: Region) -> dict:
    return {
        "id": r.id,
        "name": r.name,
        "boundary": [point_to_doc(p) for p in r.boundary],
    }


def region_from_doc(doc: Any, path: str) -> Region:
    obj = _as_obj(doc, path, {"id", "name", "boundary"})
    boundary = [
        _as_point(p, f"{path}/boundary/{i}")
        for i, p in enumerate(_as_list(obj["boundary"], f"{path}/boundary"))
    ]
    return Region(id=_as_str(obj["id"], f"{path}/id"), name=str(obj["name"]), boundary=tuple(boundary))


def task_type_to_doc(t: TaskType) -> dict:
    return {"id": t.id, "unit_workload": float(t.unit_workload)}


def task_type_from_doc(doc: Any, path: str) -> TaskType:
    obj = _as_obj(doc, path, {"id", "unit_workload"})
    return TaskType(
        id=_as_str(obj["id"], f"{path}/id"),
        unit_workload=_as_real(obj["unit_workload"], f"{path}/unit_workload"),
    )


def agent_to_doc(a: Agent) -> dict:
    return {
        "id": a.id,
        "kind": a.kind,
        "location": point_to_doc(a.location),
        "speed": float(a.speed),
        "capabilities": sorted(a.capabilities),
        "status": a.status.value,
        "assigned_thread": a.assigned_thread,
    }


def agent_from_doc(doc: Any, path: str) -> Agent:
    obj = _as_obj(
        doc,
        path,
        {"id", "kind", "location", "speed", "capabilities"},
        {"status", "assigned_thread"},
    )
    return Agent(
        id=_as_str(obj["id"], f"{path}/id"),
        kind=str(obj["kind"]),
        location=_as_point(obj["location"], f"{path}/location"),
        speed=_as_real(obj["speed"], f"{path}/speed"),
        capabilities=frozenset(
            _as_str(c, f"{path}/capabilities/{i}")
            for i, c in enumerate(_as_list(obj["capabilities"], f"{path}/capabilities"))
        ),
        status=_as_enum(AgentStatus, obj.get("status", "available"), f"{path}/status"),
        assigned_thread=(
            None
            if obj.get("assigned_thread") is None
            else _as_str(obj["assigned_thread"], f"{path}/assigned_thread")
        ),
    )


def task_to_doc(t: MacroTask) -> dict:
    return {
        "id": t.id,
        "task_type": t.task_type,
        "region": t.region,
        "quantity": int(t.quantity),
        "state": t.state.value,
        "reveal_rules": [
            {"successor_type": r.successor_type, "expected_count": int(r.expected_count)}
            for r in t.reveal_rules
        ],
        "certainty": float(t.certainty),
        "completed": int(t.completed),
    }


def task_from_doc(doc: Any, path: str) -> MacroTask:
    obj = _as_obj(
        doc,
        path,
        {"id", "task_type", "region", "quantity"},
        {"state", "reveal_rules", "certainty", "completed"},
    )
    rules = []
    for i, r in enumerate(_as_list(obj.get("reveal_rules", []), f"{path}/reveal_rules")):
        robj = _as_obj(r, f"{path}/reveal_rules/{i}", {"successor_type", "expected_count"})
        rules.append(
            RevealRule(
                successor_type=_as_str(robj["successor_type"], f"{path}/reveal_rules/{i}/successor_type"),
                expected_count=_as_int(robj["expected_count"], f"{path}/reveal_rules/{i}/expected_count"),
            )
        )
    return MacroTask(
        id=_as_str(obj["id"], f"{path}/id"),
        task_type=_as_str(obj["task_type"], f"{path}/task_type"),
        region=_as_str(obj["region"], f"{path}/region"),
        quantity=_as_int(obj["quantity"], f"{path}/quantity"),
        state=_as_enum(TaskState, obj.get("state", "revealed"), f"{path}/state"),
        reveal_rules=tuple(rules),
        certainty=_as_real(obj.get("certainty", 1.0), f"{path}/certainty"),
        completed=_as_int(obj.get("completed", 0), f"{path}/completed"),
    )


def refuge_to_doc(r: Refuge) -> dict:
    return {
        "id": r.id,
        "location": point_to_doc(r.location),
        "capacity": int(r.capacity),
        "occupied": int(r.occupied),
    }


def refuge_from_doc(doc: Any, path: str) -> Refuge:
    obj = _as_obj(doc, path, {"id", "location", "capacity"}, {"occupied"})
    return Refuge(
        id=_as_str(obj["id"], f"{path}/id"),
        location=_as_point(obj["location"], f"{path}/location"),
        capacity=_as_int(obj["capacity"], f"{path}/capacity"),
        occupied=_as_int(obj.get("occupied", 0), f"{path}/occupied"),
    )


def cluster_to_doc(c: CasualtyCluster) -> dict:
    return {
        "id": c.id,
        "location": point_to_doc(c.location),
        "count": int(c.count),
        "severity": int(c.severity),
    }


def cluster_from_doc(doc: Any, path: str) -> CasualtyCluster:
    obj = _as_obj(doc, path, {"id", "location", "count"}, {"severity"})
    return CasualtyCluster(
        id=_as_str(obj["id"], f"{path}/id"),
        location=_as_point(obj["location"], f"{path}/location"),
        count=_as_int(obj["count"], f"{path}/count"),
        severity=_as_int(obj.get("severity", 1), f"{path}/severity"),
    )


def thread_to_doc(t: Thread) -> dict:
    return {
        "id": t.id,
        "priority": int(t.priority),
        "goal_task_types": sorted(t.goal_task_types),
        "goal_regions": sorted(t.goal_regions),
        "min_agents": int(t.min_agents),
        "max_agents": int(t.max_agents),
    }


def thread_from_doc(doc: Any, path: str) -> Thread:
    obj = _as_obj(
        doc,
        path,
        {"id", "priority", "goal_task_types", "max_agents"},
        {"goal_regions", "min_agents"},
    )
    return Thread(
        id=_as_str(obj["id"], f"{path}/id"),
        priority=_as_int(obj["priority"], f"{path}/priority"),
        goal_task_types=frozenset(
            _as_str(t, f"{path}/goal_task_types/{i}")
            for i, t in enumerate(_as_list(obj["goal_task_types"], f"{path}/goal_task_types"))
        ),
        goal_regions=frozenset(
            _as_str(r, f"{path}/goal_regions/{i}")
            for i, r in enumerate(_as_list(obj.get("goal_regions", []), f"{path}/goal_regions"))
        ),
        min_agents=_as_int(obj.get("min_agents", 0), f"{path}/min_agents"),
        max_agents=_as_int(obj["max_agents"], f"{path}/max_agents"),
    )


def strategy_to_doc(s: Strategy) -> dict:
    return {
        "id": s.id,
        "objective": s.objective,
        "threads": [thread_to_doc(t) for t in s.threads],
    }


def strategy_from_doc(doc: Any, path: str) -> Strategy:
    obj = _as_obj(doc, path, {"id", "objective", "threads"})
    threads = [
        thread_from_doc(t, f"{path}/threads/{i}")
        for i, t in enumerate(_as_list(obj["threads"], f"{path}/threads"))
    ]
    return Strategy(
        id=_as_str(obj["id"], f"{path}/id"),
        objective=str(obj["objective"]),
        threads=tuple(threads),
    )


def decision_to_doc(d: StrategicDecision) -> dict:
    return {
        "id": d.id,
        "strategy": d.strategy,
        "assignment": dict(sorted(d.assignment.items())),
        "score": None if d.score != d.score else real_to_doc(d.score),
    }


def decision_from_doc(doc: Any, path: str) -> StrategicDecision:
    obj = _as_obj(doc, path, {"id", "strategy", "assignment"}, {"score"})
    raw = obj["assignment"]
    if not isinstance(raw, Mapping):
        raise ParseError(f"{path}/assignment", "expected object")
    assignment = {
        _as_str(k, f"{path}/assignment"): _as_str(v, f"{path}/assignment/{k}")
        for k, v in raw.items()
    }
    score = obj.get("score")
    return StrategicDecision(
        id=_as_str(obj["id"], f"{path}/id"),
        strategy=_as_str(obj["strategy"], f"{path}/strategy"),
        assignment=assignment,
        score=math.nan
        if score is None
        else _as_real(score, f"{path}/score", allow_inf=True),
    )


def entry_to_doc(e: MacroDecision) -> dict:
    return {
        "task": e.task,
        "task_type": e.task_type,
        "agents": sorted(e.agents),
        "region": e.region,
        "start": float(e.start),
        "finish": float(e.finish),
        "estimated_done": int(e.estimated_done),
        "estimated_reveals": [[t, int(n)] for t, n in e.estimated_reveals],
    }


def entry_from_doc(doc: Any, path: str) -> MacroDecision:
    obj = _as_obj(
        doc,
        path,
        {"task", "task_type", "agents", "region", "start", "finish", "estimated_done"},
        {"estimated_reveals"},
    )
    reveals = []
    for i, pair in enumerate(_as_list(obj.get("estimated_reveals", []), f"{path}/estimated_reveals")):
        items = _as_list(pair, f"{path}/estimated_reveals/{i}")
        if len(items) != 2:
            raise ParseError(f"{path}/estimated_reveals/{i}", "expected [task_type, count] pair")
        reveals.append((_as_str(items[0], f"{path}/estimated_reveals/{i}/0"), _as_int(items[1], f"{path}/estimated_reveals/{i}/1")))
    return MacroDecision(
        task=_as_str(obj["task"], f"{path}/task"),
        task_type=_as_str(obj["task_type"], f"{path}/task_type"),
        agents=frozenset(
            _as_str(a, f"{path}/agents/{i}") for i, a in enumerate(_as_list(obj["agents"], f"{path}/agents"))
        ),
        region=_as_str(obj["region"], f"{path}/region"),
        start=_as_real(obj["start"], f"{path}/start"),
        finish=_as_real(obj["finish"], f"{path}/finish"),
        estimated_done=_as_int(obj["estimated_done"], f"{path}/estimated_done"),
        estimated_reveals=tuple(reveals),
    )


def schedule_to_doc(s: Schedule) -> dict:
    return {
        "decision": decision_to_doc(s.decision),
        "entries": [entry_to_doc(e) for e in s.entries],
        "adaption_time": real_to_doc(s.adaption_time),
        "makespan": float(s.makespan),
        "created_at": float(s.created_at),
        "world_digest": s.world_digest,
        "origins": {aid: point_to_doc(p) for aid, p in sorted(s.origins.items())},
    }


def schedule_from_doc(doc: Any, path: str) -> Schedule:
    obj = _as_obj(
        doc,
        path,
        {"decision", "entries", "adaption_time", "makespan", "created_at", "world_digest"},
        {"origins"},
    )
    origins_raw = obj.get("origins", {})
    if not isinstance(origins_raw, Mapping):
        raise ParseError(f"{path}/origins", "expected object")
    return Schedule(
        decision=decision_from_doc(obj["decision"], f"{path}/decision"),
        entries=tuple(
            entry_from_doc(e, f"{path}/entries/{i}")
            for i, e in enumerate(_as_list(obj["entries"], f"{path}/entries"))
        ),
        adaption_time=_as_real(obj["adaption_time"], f"{path}/adaption_time", allow_inf=True),
        makespan=_as_real(obj["makespan"], f"{path}/makespan"),
        created_at=_as_real(obj["created_at"], f"{path}/created_at"),
        world_digest=_as_str(obj["world_digest"], f"{path}/world_digest"),
        origins={
            _as_str(k, f"{path}/origins"): _as_point(v, f"{path}/origins/{k}")
            for k, v in origins_raw.items()
        },
    )


def world_to_doc(w: WorldState) -> dict:
    return {
        "time": float(w.time),
        "agents": [agent_to_doc(a) for _, a in sorted(w.agents.items())],
        "regions": [region_to_doc(r) for _, r in sorted(w.regions.items())],
        "task_types": [task_type_to_doc(t) for _, t in sorted(w.task_types.items())],
        "macro_tasks": [task_to_doc(t) for _, t in sorted(w.macro_tasks.items())],
        "refuges": [refuge_to_doc(r) for _, r in sorted(w.refuges.items())],
        "casualty_clusters": [cluster_to_doc(c) for _, c in sorted(w.casualty_clusters.items())],
    }


def world_from_doc(doc: Any, path: str = "world") -> WorldState:
    obj = _as_obj(
        doc,
        path,
        {"time", "agents", "regions", "task_types", "macro_tasks", "refuges", "casualty_clusters"},
    )

    def load(key: str, loader: Callable[[Any, str], Any]) -> dict:
        items = {}
        for i, item in enumerate(_as_list(obj[key], f"{path}/{key}")):
            parsed = loader(item, f"{path}/{key}/{i}")
            if parsed.id in items:
                raise ParseError(f"{path}/{key}/{i}", f"duplicate id {parsed.id!r}")
            items[parsed.id] = parsed
        return items

    return WorldState(
        time=_as_real(obj["time"], f"{path}/time"),
        agents=load("agents", agent_from_doc),
        regions=load("regions", region_from_doc),
        task_types=load("task_types", task_type_from_doc),
        macro_tasks=load("macro_tasks", task_from_doc),
        refuges=load("refuges", refuge_from_doc),
        casualty_clusters=load("casualty_clusters", cluster_from_doc),
    )


def event_to_doc(e: Event) -> dict:
    return {"at": float(e.at), "kind": e.kind.value, "payload": _payload_to_doc(e.payload)}


def _payload_to_doc(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _payload_to_doc(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_payload_to_doc(v) for v in value]
    if isinstance(value, GeoPoint):
        return point_to_doc(value)
    return value


def event_from_doc(doc: Any, path: str) -> Event:
    obj = _as_obj(doc, path, {"at", "kind", "payload"})
    if not isinstance(obj["payload"], Mapping):
        raise ParseError(f"{path}/payload", "expected object")
    return Event(
        at=_as_real(obj["at"], f"{path}/at"),
        kind=_as_enum(EventKind, obj["kind"], f"{path}/kind"),
        payload=dict(obj["payload"]),
    )


def violation_to_doc(v: Violation) -> dict:
    return {"path": v.path, "message": v.message}
