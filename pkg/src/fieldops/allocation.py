"""Refuge allocation: match casualty clusters to free refuge capacity.

Solved as a minimum-cost flow on the bipartite cluster->refuge graph with
per-person cost severity x travel seconds. When capacity cannot absorb
everyone, exactly the cheapest-servable persons are assigned and the rest
are reported unassigned. Arc costs are kept speed-independent internally
(severity x distance) so the chosen flows are exactly invariant under
rescaling of the transport speed; only the reported cost rescales.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from . import geo
from .errors import ContractError, SizeGuardError, ValidationError
from .model import CasualtyCluster, Refuge, Strategy, Violation, WorldState

TRANSPORT_TASK_TYPE = "TRANSPORT"


@dataclass(frozen=True, slots=True)
class Allocation:
    """Transport flows plus their total cost in person-seconds."""

    flows: tuple[tuple[str, str, int], ...]  # (cluster, refuge, persons >= 1)
    total_cost: float
    unassigned: int

    def to_doc(self) -> dict:
        return {
            "flows": [
                {"cluster": c, "refuge": r, "persons": int(p)} for c, r, p in self.flows
            ],
            "total_cost": float(self.total_cost),
            "unassigned": int(self.unassigned),
        }


def _participating_clusters(
    world: WorldState, strategy: Strategy | None
) -> list[CasualtyCluster]:
    clusters = sorted(world.casualty_clusters.values(), key=lambda c: c.id)
    if strategy is None:
        return clusters
    transport_threads = [
        t for t in strategy.threads if TRANSPORT_TASK_TYPE in t.goal_task_types
    ]
    if not transport_threads:
        return []
    out = []
    for cluster in clusters:
        for thread in transport_threads:
            if not thread.goal_regions:
                out.append(cluster)
                break
            if any(
                geo.point_in_region(cluster.location, world.regions[rid])
                for rid in thread.goal_regions
                if rid in world.regions
            ):
                out.append(cluster)
                break
    return out


def allocate_refuges(
    world: WorldState,
    transport_speed: float,
    strategy: Strategy | None = None,
) -> Allocation:
    """Minimum-cost assignment of persons to free refuge capacity.

    With a strategy given, only clusters inside the goal regions of threads
    whose goals include TRANSPORT participate.
    """
    if not (math.isfinite(transport_speed) and transport_speed > 0):
        raise ContractError(f"transport_speed must be > 0, got {transport_speed!r}")
    clusters = [c for c in _participating_clusters(world, strategy) if c.count > 0]
    refuges = sorted(
        (r for r in world.refuges.values() if r.free > 0), key=lambda r: r.id
    )
    flows, weighted = _min_cost_transport(world, clusters, refuges)
    served = sum(p for _, _, p in flows)
    total_persons = sum(c.count for c in clusters)
    return Allocation(
        flows=tuple(flows),
        total_cost=weighted / transport_speed,
        unassigned=total_persons - served,
    )


def _min_cost_transport(
    world: WorldState,
    clusters: list[CasualtyCluster],
    refuges: list[Refuge],
) -> tuple[list[tuple[str, str, int]], float]:
    """Successive shortest paths on the bipartite transport network.

    Returns integral flows ordered by (cluster, refuge) and the optimal
    severity-weighted distance (meters), speed-independent.
    """
    if not clusters or not refuges:
        return [], 0.0
    n_c, n_r = len(clusters), len(refuges)
    source = 0
    sink = 1 + n_c + n_r
    n_nodes = sink + 1

    # Arc storage: forward/backward pairs, deterministic construction order.
    to: list[int] = []
    cap: list[int] = []
    cost: list[float] = []
    adj: list[list[int]] = [[] for _ in range(n_nodes)]

    def add_arc(u: int, v: int, c: int, w: float) -> None:
        adj[u].append(len(to))
        to.append(v)
        cap.append(c)
        cost.append(w)
        adj[v].append(len(to))
        to.append(u)
        cap.append(0)
        cost.append(-w)

    for i, cluster in enumerate(clusters):
        add_arc(source, 1 + i, cluster.count, 0.0)
    for i, cluster in enumerate(clusters):
        for j, refuge in enumerate(refuges):
            meters = geo.haversine_distance(cluster.location, refuge.location)
            add_arc(1 + i, 1 + n_c + j, min(cluster.count, refuge.free), cluster.severity * meters)
    for j, refuge in enumerate(refuges):
        add_arc(1 + n_c + j, sink, refuge.free, 0.0)

    target = min(sum(c.count for c in clusters), sum(r.free for r in refuges))
    pushed = 0
    total_weighted = 0.0
    while pushed < target:
        # Bellman-Ford: deterministic relaxation, stable on cost ties.
        dist = [math.inf] * n_nodes
        in_arc = [-1] * n_nodes
        dist[source] = 0.0
        for _ in range(n_nodes):
            changed = False
            for u in range(n_nodes):
                if dist[u] == math.inf:
                    continue
                for ai in adj[u]:
                    if cap[ai] <= 0:
                        continue
                    nd = dist[u] + cost[ai]
                    if nd < dist[to[ai]] - 1e-12:
                        dist[to[ai]] = nd
                        in_arc[to[ai]] = ai
                        changed = True
            if not changed:
                break
        if dist[sink] == math.inf:
            break
        bottleneck = target - pushed
        v = sink
        while v != source:
            ai = in_arc[v]
            bottleneck = min(bottleneck, cap[ai])
            v = to[ai ^ 1]
        v = sink
        while v != source:
            ai = in_arc[v]
            cap[ai] -= bottleneck
            cap[ai ^ 1] += bottleneck
            v = to[ai ^ 1]
        pushed += bottleneck
        total_weighted += bottleneck * dist[sink]

    flows: list[tuple[str, str, int]] = []
    # Re-walk cluster->refuge arcs in construction order to read the flow.
    idx = 2 * n_c  # skip the source->cluster arc pairs
    for i, cluster in enumerate(clusters):
        for j, refuge in enumerate(refuges):
            forward = idx
            idx += 2
            sent = cap[forward ^ 1]  # backward capacity equals flow sent
            if sent > 0:
                flows.append((cluster.id, refuge.id, sent))
    flows.sort(key=lambda f: (f[0], f[1]))
    return flows, total_weighted


def allocation_cost(
    allocation: Allocation, world: WorldState, transport_speed: float
) -> float:
    """Recompute the objective from raw world data, for verification."""
    if not (math.isfinite(transport_speed) and transport_speed > 0):
        raise ContractError(f"transport_speed must be > 0, got {transport_speed!r}")
    total = 0.0
    for cluster_id, refuge_id, persons in allocation.flows:
        cluster = world.casualty_clusters.get(cluster_id)
        refuge = world.refuges.get(refuge_id)
        if cluster is None or refuge is None:
            raise ValidationError(
                [
                    Violation(
                        f"flows/{cluster_id}->{refuge_id}",
                        "dangling cluster or refuge reference",
                    )
                ]
            )
        seconds = geo.haversine_distance(cluster.location, refuge.location) / transport_speed
        total += persons * cluster.severity * seconds
    return total


def check_allocation(world: WorldState, allocation: Allocation) -> list[Violation]:
    """Independent constraint checker: capacity, counts, conservation."""
    out: list[Violation] = []
    per_refuge: dict[str, int] = {}
    per_cluster: dict[str, int] = {}
    for cluster_id, refuge_id, persons in allocation.flows:
        if persons < 1:
            out.append(Violation(f"flows/{cluster_id}->{refuge_id}", "persons must be >= 1"))
        per_refuge[refuge_id] = per_refuge.get(refuge_id, 0) + persons
        per_cluster[cluster_id] = per_cluster.get(cluster_id, 0) + persons
    for refuge_id, total in sorted(per_refuge.items()):
        refuge = world.refuges.get(refuge_id)
        if refuge is None:
            out.append(Violation(f"flows/{refuge_id}", "unknown refuge"))
        elif total > refuge.free:
            out.append(
                Violation(
                    f"flows/{refuge_id}",
                    f"assigned {total} exceeds free capacity {refuge.free}",
                )
            )
    for cluster_id, total in sorted(per_cluster.items()):
        cluster = world.casualty_clusters.get(cluster_id)
        if cluster is None:
            out.append(Violation(f"flows/{cluster_id}", "unknown cluster"))
        elif total > cluster.count:
            out.append(
                Violation(
                    f"flows/{cluster_id}",
                    f"assigned {total} exceeds cluster count {cluster.count}",
                )
            )
    return out


def brute_force_allocation(
    world: WorldState,
    transport_speed: float,
    strategy: Strategy | None = None,
) -> Allocation:
    """Exhaustive oracle over integral flow matrices; guards small sizes.

    Maximizes served persons first, then minimizes cost, then breaks ties
    by the lexicographically smallest flow list.
    """
    if not (math.isfinite(transport_speed) and transport_speed > 0):
        raise ContractError(f"transport_speed must be > 0, got {transport_speed!r}")
    clusters = [c for c in _participating_clusters(world, strategy) if c.count > 0]
    refuges = sorted(
        (r for r in world.refuges.values() if r.free > 0), key=lambda r: r.id
    )
    total_persons = sum(c.count for c in clusters)
    if total_persons > 8 or len(refuges) > 3:
        raise SizeGuardError(
            f"brute force limited to 8 persons / 3 refuges, got "
            f"{total_persons} / {len(refuges)}"
        )
    if not clusters or not refuges:
        return Allocation(flows=(), total_cost=0.0, unassigned=total_persons)

    weights = {
        (c.id, r.id): c.severity
        * geo.haversine_distance(c.location, r.location)
        for c in clusters
        for r in refuges
    }

    def cluster_splits(count: int, bins: int):
        if bins == 1:
            yield (count,)
            return
        for head in range(count + 1):
            for rest in cluster_splits(count - head, bins - 1):
                yield (head, *rest)

    best: tuple[int, float, tuple] | None = None  # (-served, weighted, flows)
    options = []
    for c in clusters:
        per_cluster = []
        for assigned in range(c.count + 1):
            for split in cluster_splits(assigned, len(refuges)):
                per_cluster.append(split)
        options.append(per_cluster)
    for combo in itertools.product(*options):
        used = [0] * len(refuges)
        ok = True
        for split in combo:
            for j, p in enumerate(split):
                used[j] += p
        for j, refuge in enumerate(refuges):
            if used[j] > refuge.free:
                ok = False
                break
        if not ok:
            continue
        served = sum(sum(split) for split in combo)
        weighted = sum(
            split[j] * weights[(clusters[i].id, refuges[j].id)]
            for i, split in enumerate(combo)
            for j in range(len(refuges))
        )
        flows = tuple(
            (clusters[i].id, refuges[j].id, split[j])
            for i, split in enumerate(combo)
            for j in range(len(refuges))
            if split[j] > 0
        )
        key = (-served, weighted, flows)
        if best is None or key < best:
            best = key
    served = -best[0]
    return Allocation(
        flows=best[2],
        total_cost=best[1] / transport_speed,
        unassigned=total_persons - served,
    )
