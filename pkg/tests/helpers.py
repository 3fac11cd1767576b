"""Shared builders and independent oracles for the test suite.

Oracles here deliberately avoid the library's own code paths: the
geodesic oracle uses the spherical law of cosines instead of the
haversine form, recounts are plain filters, and instance generators
produce plain data.
"""

from __future__ import annotations

import math
import random

from fieldops.model import (
    Agent,
    CasualtyCluster,
    GeoPoint,
    MacroTask,
    Refuge,
    Region,
    RevealRule,
    Strategy,
    TaskType,
    Thread,
    WorldState,
)
from fieldops.store import ScenarioDocument

EARTH_RADIUS_M = 6371008.8
CITY_LON, CITY_LAT = 135.75, 35.0


def geodesic_oracle(a: GeoPoint, b: GeoPoint) -> float:
    """Spherical law of cosines; independent of the haversine implementation."""
    lon1, lat1, lon2, lat2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    cos_c = math.sin(lat1) * math.sin(lat2) + math.cos(lat1) * math.cos(lat2) * math.cos(
        lon2 - lon1
    )
    return EARTH_RADIUS_M * math.acos(max(-1.0, min(1.0, cos_c)))


def lon_delta_for_distance(lat_deg: float, meters: float) -> float:
    """Longitude offset whose haversine distance along the parallel is `meters`."""
    lat = math.radians(lat_deg)
    half = math.asin(math.sin(meters / (2.0 * EARTH_RADIUS_M)) / math.cos(lat))
    return math.degrees(2.0 * half)


def exact_square_region(rid: str, cx: float, cy: float, half: float = 0.01) -> Region:
    """Full-precision square; its centroid sits exactly at (cx, cy)."""
    return Region(
        id=rid,
        name=rid,
        boundary=(
            GeoPoint(cx - half, cy - half),
            GeoPoint(cx + half, cy - half),
            GeoPoint(cx + half, cy + half),
            GeoPoint(cx - half, cy + half),
        ),
    )


def square_region(rid: str, cx: float, cy: float, half: float = 0.01, name: str = "") -> Region:
    # Vertices rounded to 6 decimals so documents stay stable under the
    # canonical 9-significant-digit rendering.
    x0, x1 = round(cx - half, 6), round(cx + half, 6)
    y0, y1 = round(cy - half, 6), round(cy + half, 6)
    return Region(
        id=rid,
        name=name or rid,
        boundary=(
            GeoPoint(x0, y0),
            GeoPoint(x1, y0),
            GeoPoint(x1, y1),
            GeoPoint(x0, y1),
        ),
    )


def mk_world(
    *,
    time: float = 0.0,
    agents=(),
    regions=(),
    task_types=(),
    tasks=(),
    refuges=(),
    clusters=(),
) -> WorldState:
    return WorldState(
        time=time,
        agents={a.id: a for a in agents},
        regions={r.id: r for r in regions},
        task_types={t.id: t for t in task_types},
        macro_tasks={t.id: t for t in tasks},
        refuges={r.id: r for r in refuges},
        casualty_clusters={c.id: c for c in clusters},
    )


def hand_traced_world(with_reveal: bool = False) -> tuple[WorldState, Strategy]:
    """One agent 100 m from the sole region; one task, quantity 1, unit 50."""
    dlon = lon_delta_for_distance(CITY_LAT, 100.0)
    agent = Agent(
        id="a1",
        kind="squad",
        location=GeoPoint(CITY_LON, CITY_LAT),
        speed=1.0,
        capabilities=frozenset({"SEARCH", "RESCUE"}),
    )
    # Full-precision square so its centroid sits exactly 100 m away.
    region = exact_square_region("r1", CITY_LON + dlon, CITY_LAT)
    rules = (RevealRule("RESCUE", 2),) if with_reveal else ()
    task = MacroTask(id="t1", task_type="SEARCH", region="r1", quantity=1, reveal_rules=rules)
    world = mk_world(
        agents=[agent],
        regions=[region],
        task_types=[TaskType("SEARCH", 50.0), TaskType("RESCUE", 30.0)],
        tasks=[task],
    )
    strategy = Strategy(
        id="s1",
        objective="clear the zone",
        threads=(
            Thread(
                id="T1",
                priority=1,
                goal_task_types=frozenset({"SEARCH", "RESCUE"}),
                min_agents=1,
                max_agents=1,
            ),
        ),
    )
    return world, strategy


def random_instance(rng: random.Random, *, n_agents=None, n_threads=None, n_tasks=None):
    """Random small planning instance: world plus a feasible strategy."""
    n_agents = n_agents if n_agents is not None else rng.randint(2, 5)
    n_threads = n_threads if n_threads is not None else rng.randint(1, 3)
    n_tasks = n_tasks if n_tasks is not None else rng.randint(1, 6)
    type_ids = ["SEARCH", "RESCUE", "TRANSPORT"][: rng.randint(1, 3)]
    task_types = [TaskType(t, rng.choice([20.0, 30.0, 50.0, 60.0])) for t in type_ids]

    n_regions = rng.randint(1, 3)
    regions = []
    for i in range(n_regions):
        cx = CITY_LON + rng.uniform(-0.05, 0.05)
        cy = CITY_LAT + rng.uniform(-0.05, 0.05)
        regions.append(square_region(f"r{i}", round(cx, 6), round(cy, 6), half=0.004))

    agents = []
    for i in range(n_agents):
        caps = frozenset(rng.sample(type_ids, rng.randint(1, len(type_ids))))
        agents.append(
            Agent(
                id=f"a{i}",
                kind="unit",
                location=GeoPoint(
                    round(CITY_LON + rng.uniform(-0.05, 0.05), 6),
                    round(CITY_LAT + rng.uniform(-0.05, 0.05), 6),
                ),
                speed=rng.choice([1.0, 2.0, 5.0, 10.0]),
                capabilities=caps,
            )
        )

    tasks = []
    for i in range(n_tasks):
        tasks.append(
            MacroTask(
                id=f"t{i}",
                task_type=rng.choice(type_ids),
                region=rng.choice(regions).id,
                quantity=rng.randint(1, 4),
            )
        )

    # Threads jointly cover all task types so instances stay feasible.
    threads = []
    for i in range(n_threads):
        if i == 0:
            goals = frozenset(type_ids)
        else:
            goals = frozenset(rng.sample(type_ids, rng.randint(1, len(type_ids))))
        threads.append(
            Thread(
                id=f"T{i}",
                priority=rng.randint(1, 3),
                goal_task_types=goals,
                min_agents=0,
                max_agents=n_agents,
            )
        )
    world = mk_world(
        agents=agents, regions=regions, task_types=task_types, tasks=tasks
    )
    strategy = Strategy(id="s", objective="generated", threads=tuple(threads))
    return world, strategy


def random_allocation_world(rng: random.Random) -> WorldState:
    """Within the brute-force guards: <= 8 persons, <= 3 refuges."""
    n_refuges = rng.randint(1, 3)
    refuges = []
    for i in range(n_refuges):
        capacity = rng.randint(0, 5)
        refuges.append(
            Refuge(
                id=f"R{i}",
                location=GeoPoint(
                    round(CITY_LON + rng.uniform(-0.08, 0.08), 6),
                    round(CITY_LAT + rng.uniform(-0.08, 0.08), 6),
                ),
                capacity=capacity,
                occupied=rng.randint(0, capacity) if capacity else 0,
            )
        )
    remaining = 8
    clusters = []
    for i in range(rng.randint(1, 4)):
        if remaining <= 0:
            break
        count = rng.randint(1, min(3, remaining))
        remaining -= count
        clusters.append(
            CasualtyCluster(
                id=f"C{i}",
                location=GeoPoint(
                    round(CITY_LON + rng.uniform(-0.08, 0.08), 6),
                    round(CITY_LAT + rng.uniform(-0.08, 0.08), 6),
                ),
                count=count,
                severity=rng.randint(1, 3),
            )
        )
    return mk_world(refuges=refuges, clusters=clusters)


def random_sim_scenario(rng: random.Random) -> tuple[WorldState, Strategy]:
    """Scenario whose strategy can always execute every reveal chain."""
    world, strategy = random_instance(
        rng, n_agents=rng.randint(1, 3), n_threads=1, n_tasks=rng.randint(1, 4)
    )
    type_ids = sorted(world.task_types)
    # Every agent must cover every type so chains never strand work.
    agents = {
        aid: Agent(
            id=a.id,
            kind=a.kind,
            location=a.location,
            speed=a.speed,
            capabilities=frozenset(type_ids),
        )
        for aid, a in world.agents.items()
    }
    tasks = {}
    for tid, t in world.macro_tasks.items():
        rules = ()
        if rng.random() < 0.5:
            rules = (RevealRule(rng.choice(type_ids), rng.randint(1, 2)),)
        tasks[tid] = MacroTask(
            id=t.id,
            task_type=t.task_type,
            region=t.region,
            quantity=t.quantity,
            reveal_rules=rules,
        )
    world = WorldState(
        time=0.0,
        agents=agents,
        regions=world.regions,
        task_types=world.task_types,
        macro_tasks=tasks,
        refuges=world.refuges,
        casualty_clusters=world.casualty_clusters,
    )
    return world, strategy


def random_multithread_scenario(rng: random.Random) -> tuple[WorldState, Strategy]:
    """Multi-thread scenario exercising releases and mid-run redeployment."""
    n_agents = rng.randint(2, 4)
    n_threads = rng.randint(2, 3)
    type_ids = ["SEARCH", "RESCUE", "TRANSPORT"][: rng.randint(2, 3)]
    regions = [
        square_region(
            f"r{j}",
            round(CITY_LON + rng.uniform(-0.04, 0.04), 6),
            round(CITY_LAT + rng.uniform(-0.04, 0.04), 6),
            half=0.004,
        )
        for j in range(rng.randint(1, 3))
    ]
    agents = [
        Agent(
            f"a{j}",
            "u",
            GeoPoint(
                round(CITY_LON + rng.uniform(-0.04, 0.04), 6),
                round(CITY_LAT + rng.uniform(-0.04, 0.04), 6),
            ),
            rng.choice([1.0, 2.0, 5.0]),
            frozenset(type_ids),
        )
        for j in range(n_agents)
    ]
    tasks = []
    for j in range(rng.randint(2, 5)):
        rules = (
            (RevealRule(rng.choice(type_ids), rng.randint(1, 2)),)
            if rng.random() < 0.5
            else ()
        )
        tasks.append(
            MacroTask(
                f"t{j}",
                rng.choice(type_ids),
                rng.choice(regions).id,
                rng.randint(1, 3),
                reveal_rules=rules,
            )
        )
    threads = []
    min_budget = n_agents
    for j in range(n_threads):
        goals = (
            frozenset(type_ids)
            if j == 0
            else frozenset(rng.sample(type_ids, rng.randint(1, len(type_ids))))
        )
        min_agents = rng.choice([0, 0, 1]) if min_budget > 0 else 0
        min_budget -= min_agents
        threads.append(
            Thread(f"T{j}", rng.randint(1, 3), goals, min_agents=min_agents, max_agents=n_agents)
        )
    world = mk_world(
        agents=agents,
        regions=regions,
        task_types=[TaskType(t, rng.choice([10.0, 20.0, 40.0])) for t in type_ids],
        tasks=tasks,
    )
    return world, Strategy("s", "multi-thread", tuple(threads))


def random_document(rng: random.Random) -> ScenarioDocument:
    world, strategy = random_instance(rng)
    rng2 = random.Random(rng.random())
    alloc_world = random_allocation_world(rng2)
    world = WorldState(
        time=round(rng.uniform(0, 100), 3),
        agents=world.agents,
        regions=world.regions,
        task_types=world.task_types,
        macro_tasks=world.macro_tasks,
        refuges=alloc_world.refuges,
        casualty_clusters=alloc_world.casualty_clusters,
    )
    meta = {f"k{i}": f"v{rng.randint(0, 9)}" for i in range(rng.randint(0, 3))}
    return ScenarioDocument(world=world, strategies=(strategy,), metadata=meta)
