"""HTTP service: the wire surface for the operator console.

All mutations are funneled through one lock and a single monotonically
increasing version; mutating endpoints require the caller's expected
version and fail with a conflict on mismatch, so the human and the
automated adaption path share one linear history of world versions.
Long-running searches execute on background threads and are polled.
"""

from __future__ import annotations

import itertools
import threading
from typing import Any

from fastapi import Body, FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response

from . import advisor, allocation, geo, scheduler, search, simulator, store, strategy as strategy_mod
from .errors import (
    ContractError,
    FieldOpsError,
    InfeasibleStrategyError,
    LivelockError,
    ParseError,
    StaleDecisionError,
    StalenessError,
    ValidationError,
    VersionConflictError,
    VersionError,
)
from .model import Event, Strategy, WorldState, validate_strategy
from .serialize import (
    event_from_doc,
    event_to_doc,
    schedule_to_doc,
    strategy_from_doc,
    strategy_to_doc,
    world_digest,
    world_to_doc,
)

API_PREFIX = "/api/v1"
LONG_POLL_MAX_S = 30.0


class Session:
    """Linearized mutable state behind the API."""

    def __init__(self, scenario: store.ScenarioDocument | None = None):
        self.lock = threading.RLock()
        self.events_changed = threading.Condition(self.lock)
        self.version = 0
        self.world: WorldState = (
            scenario.world if scenario else WorldState(time=0.0)
        )
        self.scenario_strategies: tuple[Strategy, ...] = (
            scenario.strategies if scenario else ()
        )
        self.metadata: dict[str, str] = dict(scenario.metadata) if scenario else {}
        self.active_strategy: Strategy | None = None
        self.last_choices = None
        self.active_decision = None
        self.active_schedule = None
        self.last_optimal = None
        self.last_recommendations: list = []
        self.events: list[Event] = []
        self.search_jobs: dict[str, dict] = {}
        self._job_counter = itertools.count(1)

    def check_version(self, expected: Any) -> None:
        if expected is None:
            raise VersionConflictError(-1, self.version)
        expected = int(expected)
        if expected != self.version:
            raise VersionConflictError(expected, self.version)

    def bump(self) -> int:
        self.version += 1
        return self.version

    def append_events(self, events) -> None:
        self.events.extend(events)
        self.events_changed.notify_all()

    def invalidate_plans(self) -> None:
        self.last_choices = None
        self.active_decision = None
        self.active_schedule = None
        self.last_optimal = None
        self.last_recommendations = []


def _error_response(exc: Exception) -> JSONResponse:
    if isinstance(exc, VersionConflictError):
        return JSONResponse(
            {"error": "version_conflict", "expected": exc.expected, "actual": exc.actual},
            status_code=409,
        )
    if isinstance(exc, ValidationError):
        return JSONResponse(
            {
                "error": "validation",
                "violations": [{"path": v.path, "message": v.message} for v in exc.violations],
            },
            status_code=400,
        )
    if isinstance(exc, (ParseError, VersionError)):
        return JSONResponse({"error": "parse", "detail": str(exc)}, status_code=400)
    if isinstance(exc, InfeasibleStrategyError):
        return JSONResponse(
            {"error": "infeasible", "threads": list(exc.thread_ids)}, status_code=422
        )
    if isinstance(exc, StalenessError):
        return JSONResponse({"error": "stale", "detail": str(exc)}, status_code=409)
    if isinstance(exc, (StaleDecisionError, ContractError, LivelockError)):
        return JSONResponse({"error": "conflict", "detail": str(exc)}, status_code=409)
    if isinstance(exc, FieldOpsError):
        return JSONResponse({"error": "engine", "detail": str(exc)}, status_code=400)
    raise exc


def create_app(scenario: store.ScenarioDocument | None = None) -> FastAPI:
    app = FastAPI(title="fieldops", version="0.1.0")
    session = Session(scenario)
    app.state.session = session

    @app.exception_handler(FieldOpsError)
    async def _engine_error(request: Request, exc: FieldOpsError):
        return _error_response(exc)

    def _world_payload() -> dict:
        return {
            "version": session.version,
            "world_digest": world_digest(session.world),
            "world": world_to_doc(session.world),
            "summaries": [s.to_doc() for s in geo.aggregate_by_region(session.world)],
        }

    @app.get(f"{API_PREFIX}/world")
    def get_world():
        with session.lock:
            return _world_payload()

    @app.post(f"{API_PREFIX}/strategy")
    def post_strategy(body: dict = Body(...)):
        with session.lock:
            session.check_version(body.get("expected_version"))
            strat = strategy_from_doc(body.get("strategy"), "strategy")
            problems = validate_strategy(session.world, strat)
            if problems:
                raise ValidationError(problems)
            session.active_strategy = strat
            session.invalidate_plans()
            return {"version": session.bump()}

    def _require_strategy() -> Strategy:
        if session.active_strategy is None:
            raise ContractError("no active strategy; POST /strategy first")
        return session.active_strategy

    @app.get(f"{API_PREFIX}/choices")
    def get_choices(cap: int = Query(default=20, ge=1)):
        with session.lock:
            strat = _require_strategy()
            choices = strategy_mod.enumerate_choices(session.world, strat, cap)
            session.last_choices = choices
            return {
                "version": session.version,
                "world_digest": world_digest(session.world),
                "choices": choices.to_doc(),
            }

    @app.post(f"{API_PREFIX}/decision")
    def post_decision(body: dict = Body(...)):
        with session.lock:
            session.check_version(body.get("expected_version"))
            strat = _require_strategy()
            if session.last_choices is None:
                raise ContractError("no enumerated choices; GET /choices first")
            decision_id = str(body.get("id"))
            match = [d for d in session.last_choices.decisions if d.id == decision_id]
            if not match:
                raise StaleDecisionError(f"unknown decision id {decision_id!r}")
            decision = match[0]
            session.world = strategy_mod.apply_choice(session.world, decision)
            schedule = scheduler.build_schedule(session.world, strat, decision)
            problems = scheduler.check_schedule(session.world, strat, schedule)
            if problems:
                raise ValidationError(problems)
            session.active_decision = decision
            session.active_schedule = schedule
            return {
                "version": session.bump(),
                "schedule": schedule_to_doc(schedule),
            }

    @app.get(f"{API_PREFIX}/schedule")
    def get_schedule():
        with session.lock:
            if session.active_schedule is None:
                return JSONResponse(
                    {"error": "not_found", "detail": "no active schedule"}, status_code=404
                )
            return {
                "version": session.version,
                "schedule": schedule_to_doc(session.active_schedule),
            }

    @app.post(f"{API_PREFIX}/search")
    def post_search(body: dict = Body(default={})):
        with session.lock:
            strat = _require_strategy()
            budget = body.get("budget")
            budget = None if budget in (None, 0) else int(budget)
            world = session.world
            job_id = f"job{next(session._job_counter)}"
            job = {"status": "running", "plan": None, "error": None}
            session.search_jobs[job_id] = job

        def _run_search():
            try:
                plan = search.optimal_plan(world, strat, budget)
                with session.lock:
                    job["plan"] = plan
                    job["status"] = "done"
                    session.last_optimal = plan
            except Exception as exc:  # surface via polling
                with session.lock:
                    job["status"] = "error"
                    job["error"] = str(exc)

        threading.Thread(target=_run_search, daemon=True).start()
        return {"job": job_id, "version": session.version}

    @app.get(f"{API_PREFIX}/search/{{job_id}}")
    def get_search(job_id: str):
        with session.lock:
            job = session.search_jobs.get(job_id)
            if job is None:
                return JSONResponse(
                    {"error": "not_found", "detail": f"unknown job {job_id!r}"},
                    status_code=404,
                )
            out: dict[str, Any] = {"status": job["status"]}
            if job["status"] == "done":
                out["plan"] = job["plan"].to_doc()
            elif job["status"] == "error":
                out["detail"] = job["error"]
            return out

    @app.get(f"{API_PREFIX}/recommendations")
    def get_recommendations():
        with session.lock:
            strat = _require_strategy()
            if session.active_schedule is None:
                raise ContractError("no committed schedule; POST /decision first")
            if session.last_optimal is None:
                raise ContractError("no optimal plan; POST /search first")
            recs = advisor.critique(
                session.world, strat, session.active_schedule, session.last_optimal
            )
            session.last_recommendations = recs
            return {
                "version": session.version,
                "world_digest": world_digest(session.world),
                "recommendations": [r.to_doc() for r in recs],
            }

    @app.post(f"{API_PREFIX}/refine")
    def post_refine(body: dict = Body(...)):
        with session.lock:
            session.check_version(body.get("expected_version"))
            strat = _require_strategy()
            accepted_ids = set(map(str, body.get("accepted", [])))
            known = {r.id: r for r in session.last_recommendations}
            missing = sorted(accepted_ids - set(known))
            if missing:
                raise StaleDecisionError(f"unknown recommendation ids {missing}")
            refined = advisor.refine(strat, [known[i] for i in sorted(accepted_ids)])
            session.active_strategy = refined
            session.invalidate_plans()
            return {"version": session.bump(), "strategy": strategy_to_doc(refined)}

    @app.post(f"{API_PREFIX}/allocate")
    def post_allocate(body: dict = Body(...)):
        with session.lock:
            session.check_version(body.get("expected_version"))
            speed = float(body.get("transport_speed", 0.0))
            result = allocation.allocate_refuges(
                session.world, speed, session.active_strategy
            )
            problems = allocation.check_allocation(session.world, result)
            if problems:
                raise ValidationError(problems)
            event = Event(
                at=session.world.time,
                kind="allocation_made",
                payload=result.to_doc(),
            )
            session.world = simulator.apply_event(session.world, event)
            session.append_events([event])
            return {"version": session.bump(), "allocation": result.to_doc()}

    @app.post(f"{API_PREFIX}/sim/step")
    def post_sim_step(body: dict = Body(...)):
        with session.lock:
            session.check_version(body.get("expected_version"))
            strat = _require_strategy()
            if session.active_schedule is None:
                raise ContractError("no active schedule; POST /decision first")
            dt = float(body.get("dt", 0.0))
            session.world, events = simulator.step(
                session.world, session.active_schedule, strat, dt
            )
            session.append_events(events)
            return {
                "version": session.bump(),
                "time": session.world.time,
                "events": [event_to_doc(e) for e in events],
            }

    @app.post(f"{API_PREFIX}/sim/run")
    def post_sim_run(body: dict = Body(default={})):
        with session.lock:
            session.check_version(body.get("expected_version"))
            strat = _require_strategy()
            cfg = body.get("config", {})
            config = simulator.SimConfig(
                tick=float(cfg.get("tick", 1.0)),
                stop_at=None if cfg.get("stop_at") is None else float(cfg["stop_at"]),
                seed=int(cfg.get("seed", 0)),
            )
            decision = session.active_decision
            if decision is not None:
                agents = session.world.agents
                applied = all(
                    aid in agents and agents[aid].assigned_thread == tid
                    for aid, tid in decision.assignment.items()
                )
                if not applied:
                    decision = None
            trace = simulator.run(
                session.world, strat, config, decision=decision
            )
            session.world = trace.final_world
            session.active_decision = trace.decision
            session.active_schedule = trace.schedule
            session.append_events(trace.events)
            return {
                "version": session.bump(),
                "replans": trace.replans,
                "events": len(trace.events),
                "time": session.world.time,
                "final_digest": world_digest(session.world),
            }

    @app.post(f"{API_PREFIX}/events/inject")
    def post_inject(body: dict = Body(...)):
        with session.lock:
            session.check_version(body.get("expected_version"))
            event = event_from_doc(body.get("event"), "event")
            session.world = simulator.inject_event(session.world, event)
            session.append_events([event])
            return {"version": session.bump()}

    @app.get(f"{API_PREFIX}/events")
    def get_events(
        since: int = Query(default=0, ge=0),
        timeout: float = Query(default=0.0, ge=0.0),
    ):
        deadline_timeout = min(timeout, LONG_POLL_MAX_S)
        with session.lock:
            if len(session.events) <= since and deadline_timeout > 0:
                session.events_changed.wait(deadline_timeout)
            tail = session.events[since:]
            return {
                "version": session.version,
                "next": len(session.events),
                "events": [
                    {"seq": since + i + 1, **event_to_doc(e)}
                    for i, e in enumerate(tail)
                ],
            }

    @app.post(f"{API_PREFIX}/scenario")
    def post_scenario(body: dict = Body(...)):
        with session.lock:
            session.check_version(body.get("expected_version"))
            doc = store.load_scenario(body.get("scenario"))
            session.world = doc.world
            session.scenario_strategies = doc.strategies
            session.metadata = dict(doc.metadata)
            session.active_strategy = None
            session.invalidate_plans()
            session.events.clear()
            return {"version": session.bump()}

    @app.get(f"{API_PREFIX}/scenario")
    def get_scenario():
        with session.lock:
            doc = store.ScenarioDocument(
                world=session.world,
                strategies=session.scenario_strategies,
                metadata=session.metadata,
            )
            return Response(
                content=store.save_snapshot(doc), media_type="application/json"
            )

    return app
