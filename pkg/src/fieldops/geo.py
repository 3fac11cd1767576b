"""Self-contained geospatial reasoning: distances, containment, aggregation.

Travel is modeled as great-circle distance over a spherical Earth divided
by agent speed; this is the single seam where a road-network router could
later be substituted. Point-in-polygon and centroids work directly in the
lon/lat plane, which is adequate for city-scale macro zones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import ContractError
from .model import (
    Agent,
    GeoPoint,
    Region,
    TaskState,
    WorldState,
)

EARTH_RADIUS_M = 6371008.8  # mean Earth radius


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two WGS84 points."""
    lon1, lat1, lon2, lat2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    s = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(s)))


def travel_time(agent: Agent, origin: GeoPoint, target: GeoPoint) -> float:
    """Seconds for `agent` to cover origin -> target at its cruise speed."""
    if agent.speed <= 0:
        raise ContractError(f"agent {agent.id} has non-positive speed {agent.speed}")
    return haversine_distance(origin, target) / agent.speed


def point_in_region(p: GeoPoint, region: Region) -> bool:
    """Even-odd containment test in the lon/lat plane, boundary-inclusive."""
    boundary = region.boundary
    n = len(boundary)
    for i in range(n):
        if _point_on_segment(boundary[i], boundary[(i + 1) % n], p):
            return True
    inside = False
    x, y = p[0], p[1]
    for i in range(n):
        x1, y1 = boundary[i]
        x2, y2 = boundary[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def _point_on_segment(a: GeoPoint, b: GeoPoint, p: GeoPoint) -> bool:
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > 1e-12:
        return False
    return (
        min(a[0], b[0]) - 1e-12 <= p[0] <= max(a[0], b[0]) + 1e-12
        and min(a[1], b[1]) - 1e-12 <= p[1] <= max(a[1], b[1]) + 1e-12
    )


class CentroidResult(NamedTuple):
    point: GeoPoint
    degenerate: bool


def region_centroid(region: Region) -> CentroidResult:
    """Area-weighted polygon centroid in the lon/lat plane.

    Degenerate (zero-area) polygons fall back to the vertex average and are
    flagged as such.
    """
    pts = region.boundary
    n = len(pts)
    # Accumulate relative to the first vertex: the raw shoelace products
    # cancel catastrophically for small polygons at large coordinates.
    ox, oy = pts[0]
    area2 = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(n):
        x1, y1 = pts[i][0] - ox, pts[i][1] - oy
        x2, y2 = pts[(i + 1) % n][0] - ox, pts[(i + 1) % n][1] - oy
        w = x1 * y2 - x2 * y1
        area2 += w
        cx += (x1 + x2) * w
        cy += (y1 + y2) * w
    if abs(area2) < 1e-14:
        mx = sum(p[0] for p in pts) / n
        my = sum(p[1] for p in pts) / n
        return CentroidResult(GeoPoint(mx, my), True)
    return CentroidResult(
        GeoPoint(ox + cx / (3.0 * area2), oy + cy / (3.0 * area2)), False
    )


def nearest(p: GeoPoint, candidates: Sequence[tuple[str, GeoPoint]]) -> str:
    """Id of the candidate closest to p; ties go to the smallest id."""
    if not candidates:
        raise ContractError("nearest() requires at least one candidate")
    return min(candidates, key=lambda c: (haversine_distance(p, c[1]), c[0]))[0]


def interpolate(a: GeoPoint, b: GeoPoint, fraction: float) -> GeoPoint:
    """Point at `fraction` of the great-circle arc from a to b (slerp)."""
    if fraction <= 0.0:
        return GeoPoint(*a)
    if fraction >= 1.0:
        return GeoPoint(*b)
    v1 = _to_unit(a)
    v2 = _to_unit(b)
    dot = max(-1.0, min(1.0, sum(x * y for x, y in zip(v1, v2))))
    omega = math.acos(dot)
    if omega < 1e-12:
        return GeoPoint(*b)
    s = math.sin(omega)
    w1 = math.sin((1.0 - fraction) * omega) / s
    w2 = math.sin(fraction * omega) / s
    v = tuple(w1 * x + w2 * y for x, y in zip(v1, v2))
    return _from_unit(v)


def _to_unit(p: GeoPoint) -> tuple[float, float, float]:
    lon = math.radians(p[0])
    lat = math.radians(p[1])
    return (
        math.cos(lat) * math.cos(lon),
        math.cos(lat) * math.sin(lon),
        math.sin(lat),
    )


def _from_unit(v: tuple[float, float, float]) -> GeoPoint:
    x, y, z = v
    norm = math.sqrt(x * x + y * y + z * z)
    x, y, z = x / norm, y / norm, z / norm
    return GeoPoint(math.degrees(math.atan2(y, x)), math.degrees(math.asin(max(-1.0, min(1.0, z)))))


class StateCounts(NamedTuple):
    revealed: int
    in_progress: int
    done: int


@dataclass(frozen=True, slots=True)
class RegionSummary:
    """Per-region roll-up of macro-task states and remaining workload."""

    region: str
    per_type_counts: dict[str, StateCounts]
    total_remaining_workload: float

    def to_doc(self) -> dict:
        return {
            "region": self.region,
            "per_type_counts": {
                t: {"revealed": c.revealed, "in_progress": c.in_progress, "done": c.done}
                for t, c in sorted(self.per_type_counts.items())
            },
            "total_remaining_workload": self.total_remaining_workload,
        }


def aggregate_by_region(world: WorldState) -> list[RegionSummary]:
    """One summary per region, ordered by region id. Hidden tasks excluded.

    Remaining workload sums remaining_quantity x unit_workload over revealed
    and in-progress tasks.
    """
    summaries: list[RegionSummary] = []
    for rid in sorted(world.regions):
        counts: dict[str, list[int]] = {}
        workload = 0.0
        for task in world.macro_tasks.values():
            if task.region != rid or task.state is TaskState.HIDDEN:
                continue
            c = counts.setdefault(task.task_type, [0, 0, 0])
            if task.state is TaskState.REVEALED:
                c[0] += 1
            elif task.state is TaskState.IN_PROGRESS:
                c[1] += 1
            elif task.state is TaskState.DONE:
                c[2] += 1
            if task.state in (TaskState.REVEALED, TaskState.IN_PROGRESS):
                unit = world.task_types[task.task_type].unit_workload
                workload += task.remaining * unit
        summaries.append(
            RegionSummary(
                region=rid,
                per_type_counts={t: StateCounts(*v) for t, v in counts.items()},
                total_remaining_workload=workload,
            )
        )
    return summaries
