"""File persistence and event-log replay.

Scenario and trace files are UTF-8 JSON in the canonical form produced by
`serialize.canonical_json`: saving is a function of content only, so two
documents built in different insertion orders serialize byte-identically.
An event log plus the initial world reconstructs any later state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import OrderingError, ParseError, ValidationError, VersionError
from .model import Event, Strategy, TIME_EPS, WorldState, validate_strategy, validate_world
from .serialize import (
    canonical_bytes,
    event_from_doc,
    event_to_doc,
    strategy_from_doc,
    strategy_to_doc,
    world_digest,
    world_from_doc,
    world_to_doc,
    _as_int,
    _as_obj,
    _as_str,
)
from .simulator import Trace, apply_event

FORMAT_VERSION = 1


@dataclass(frozen=True, slots=True)
class ScenarioDocument:
    """Top-level scenario file: world, strategies, free-form metadata."""

    world: WorldState
    strategies: tuple[Strategy, ...] = ()
    metadata: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(
            self, "strategies", tuple(sorted(self.strategies, key=lambda s: s.id))
        )
        object.__setattr__(self, "metadata", dict(self.metadata))

    def strategy(self, strategy_id: str | None = None) -> Strategy:
        if not self.strategies:
            raise ValueError("scenario has no strategies")
        if strategy_id is None:
            return self.strategies[0]
        for s in self.strategies:
            if s.id == strategy_id:
                return s
        raise KeyError(strategy_id)


def scenario_to_doc(doc: ScenarioDocument) -> dict:
    return {
        "format_version": doc.format_version,
        "world": world_to_doc(doc.world),
        "strategies": [strategy_to_doc(s) for s in doc.strategies],
        "metadata": {str(k): str(v) for k, v in doc.metadata.items()},
    }


def save_snapshot(doc: ScenarioDocument) -> bytes:
    """Canonical bytes; equal documents serialize identically."""
    return canonical_bytes(scenario_to_doc(doc))


def _parse_json(data: bytes | str | Mapping) -> Any:
    if isinstance(data, Mapping):
        return data
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}", f"invalid JSON: {exc.msg}")


def load_scenario(data: bytes | str | Mapping) -> ScenarioDocument:
    """Parse, version-check, and validate a scenario document.

    Raises ParseError with a field path, VersionError for unsupported
    versions, and ValidationError carrying the violation list.
    """
    raw = _parse_json(data)
    obj = _as_obj(raw, "scenario", {"format_version", "world", "strategies", "metadata"})
    version = _as_int(obj["format_version"], "scenario/format_version")
    if version != FORMAT_VERSION:
        raise VersionError(
            f"unsupported format_version {version}; this build reads {FORMAT_VERSION}"
        )
    world = world_from_doc(obj["world"], "world")
    strategies = tuple(
        strategy_from_doc(s, f"strategies/{i}")
        for i, s in enumerate(obj["strategies"])
    )
    metadata = {
        _as_str(k, "metadata"): str(v) for k, v in dict(obj["metadata"]).items()
    }
    violations = validate_world(world)
    for s in strategies:
        violations.extend(validate_strategy(world, s))
    if violations:
        raise ValidationError(violations)
    return ScenarioDocument(
        world=world, strategies=strategies, metadata=metadata, format_version=version
    )


def load_scenario_file(path: str | Path) -> ScenarioDocument:
    return load_scenario(Path(path).read_bytes())


def save_scenario_file(doc: ScenarioDocument, path: str | Path) -> None:
    Path(path).write_bytes(save_snapshot(doc))


# ---------------------------------------------------------------------------
# Trace documents


def trace_to_doc(trace: Trace) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "initial_digest": world_digest(trace.initial_world),
        "events": [event_to_doc(e) for e in trace.events],
        "final_digest": world_digest(trace.final_world),
        "replans": int(trace.replans),
    }


def save_trace(trace: Trace) -> bytes:
    return canonical_bytes(trace_to_doc(trace))


def load_trace_doc(data: bytes | str | Mapping) -> dict:
    raw = _parse_json(data)
    obj = _as_obj(
        raw,
        "trace",
        {"format_version", "initial_digest", "events", "final_digest", "replans"},
    )
    version = _as_int(obj["format_version"], "trace/format_version")
    if version != FORMAT_VERSION:
        raise VersionError(
            f"unsupported format_version {version}; this build reads {FORMAT_VERSION}"
        )
    return {
        "format_version": version,
        "initial_digest": _as_str(obj["initial_digest"], "trace/initial_digest"),
        "events": [
            event_from_doc(e, f"trace/events/{i}") for i, e in enumerate(obj["events"])
        ],
        "final_digest": _as_str(obj["final_digest"], "trace/final_digest"),
        "replans": _as_int(obj["replans"], "trace/replans"),
    }


# ---------------------------------------------------------------------------
# Event log + replay


class EventLog:
    """Append-only, time-ordered event log with deterministic replay."""

    def __init__(self, initial: WorldState, events: Iterable[Event] = ()):
        self.initial = initial
        self.events: list[Event] = []
        for e in events:
            self.append(e)

    def append(self, event: Event) -> None:
        if self.events and event.at < self.events[-1].at - TIME_EPS:
            raise OrderingError(
                f"event at t={event.at} appended after t={self.events[-1].at}"
            )
        self.events.append(event)

    def replay(self) -> WorldState:
        return replay(self.events, self.initial)


def replay(events: Iterable[Event], initial: WorldState) -> WorldState:
    """Apply events exactly as the simulator would; digest-faithful."""
    world = initial
    last = None
    for e in events:
        if last is not None and e.at < last - TIME_EPS:
            raise OrderingError(f"event at t={e.at} after t={last}")
        last = max(e.at, last) if last is not None else e.at
        world = apply_event(world, e)
    return world


def verify_trace(trace_doc: Mapping | bytes | str, initial: WorldState) -> bool:
    """True iff replaying the log over `initial` reproduces both digests."""
    if isinstance(trace_doc, (bytes, str)):
        doc = load_trace_doc(trace_doc)
    else:
        doc = dict(trace_doc)
        if doc.get("events") and not isinstance(doc["events"][0], Event):
            doc = load_trace_doc(doc)
    if world_digest(initial) != doc["initial_digest"]:
        return False
    final = replay(doc["events"], initial)
    return world_digest(final) == doc["final_digest"]
