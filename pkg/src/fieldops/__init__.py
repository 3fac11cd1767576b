"""Geospatial coordination engine for field-unit teams.

Library surface: domain model and validation, geospatial reasoning,
strategy enumeration, centralized scheduling, optimal-plan search, refuge
allocation, strategy critique, deterministic simulation with replay, and
canonical file persistence. A CLI (`fieldops`) and an HTTP service expose
the same operations.
"""

from .allocation import Allocation, allocate_refuges, allocation_cost, brute_force_allocation
from .advisor import Recommendation, RecommendationKind, critique, refine
from .errors import (
    ConflictError,
    ContractError,
    FieldOpsError,
    InfeasibleStrategyError,
    LivelockError,
    OrderingError,
    ParseError,
    ReplanRequired,
    SizeGuardError,
    StaleDecisionError,
    StalenessError,
    ValidationError,
    VersionConflictError,
    VersionError,
)
from .geo import (
    EARTH_RADIUS_M,
    RegionSummary,
    aggregate_by_region,
    haversine_distance,
    nearest,
    point_in_region,
    region_centroid,
    travel_time,
)
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
    validate_strategy,
    validate_world,
)
from .scheduler import (
    adapt_schedule,
    adaption_time,
    build_schedule,
    check_schedule,
    estimate_completion,
)
from .search import OptimalPlan, SearchNode, brute_force_makespan, lower_bound, optimal_plan
from .serialize import canonical_json, world_digest
from .simulator import SimConfig, Trace, apply_event, inject_event, quiescent, run, step
from .store import (
    EventLog,
    ScenarioDocument,
    load_scenario,
    load_scenario_file,
    replay,
    save_snapshot,
    save_trace,
    verify_trace,
)
from .strategy import ChoiceSet, Release, apply_choice, compute_releases, enumerate_choices

__version__ = "0.1.0"
