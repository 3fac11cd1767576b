"""Static reporting: map and timeline figures plus delimited summaries.

Renders the thematic map (regions shaded by remaining workload, agents by
status, refuges and casualty clusters as distinct glyphs) and a Gantt-style
schedule timeline to image files, alongside CSV tables of the same data.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.lines import Line2D

from . import geo
from .model import AgentStatus, Schedule, WorldState

_STATUS_COLORS = {
    AgentStatus.AVAILABLE: "#2ca02c",
    AgentStatus.ASSIGNED: "#1f77b4",
    AgentStatus.WORKING: "#ff7f0e",
    AgentStatus.DISABLED: "#7f7f7f",
}


def render_map(world: WorldState, path: str | Path) -> Path:
    """Thematic map of the current snapshot, written as a PNG."""
    path = Path(path)
    summaries = {s.region: s for s in geo.aggregate_by_region(world)}
    max_load = max(
        (s.total_remaining_workload for s in summaries.values()), default=0.0
    )

    fig, ax = plt.subplots(figsize=(8, 7))
    cmap = plt.get_cmap("YlOrRd")
    for rid, region in sorted(world.regions.items()):
        xs = [p.lon for p in region.boundary]
        ys = [p.lat for p in region.boundary]
        load = summaries[rid].total_remaining_workload if rid in summaries else 0.0
        shade = cmap(0.15 + 0.7 * (load / max_load)) if max_load > 0 else cmap(0.15)
        ax.fill(xs, ys, facecolor=shade, edgecolor="#444444", linewidth=1.0, alpha=0.8)
        cx, cy = geo.region_centroid(region).point
        ax.annotate(rid, (cx, cy), ha="center", fontsize=8, color="#222222")

    for agent in sorted(world.agents.values(), key=lambda a: a.id):
        color = _STATUS_COLORS[agent.status]
        ax.plot(agent.location.lon, agent.location.lat, "o", color=color, markersize=7)
        ax.annotate(
            agent.id, (agent.location.lon, agent.location.lat),
            textcoords="offset points", xytext=(4, 4), fontsize=7,
        )
    for refuge in sorted(world.refuges.values(), key=lambda r: r.id):
        ax.plot(refuge.location.lon, refuge.location.lat, "s", color="#9467bd", markersize=8)
        ax.annotate(
            f"{refuge.id} {refuge.occupied}/{refuge.capacity}",
            (refuge.location.lon, refuge.location.lat),
            textcoords="offset points", xytext=(4, -9), fontsize=7,
        )
    for cluster in sorted(world.casualty_clusters.values(), key=lambda c: c.id):
        ax.plot(cluster.location.lon, cluster.location.lat, "^", color="#d62728",
                markersize=6 + cluster.count)
        ax.annotate(
            f"{cluster.id} x{cluster.count}",
            (cluster.location.lon, cluster.location.lat),
            textcoords="offset points", xytext=(4, 4), fontsize=7,
        )

    handles = [
        Line2D([], [], marker="o", linestyle="", color=c, label=s.value)
        for s, c in _STATUS_COLORS.items()
    ]
    handles.append(Line2D([], [], marker="s", linestyle="", color="#9467bd", label="refuge"))
    handles.append(Line2D([], [], marker="^", linestyle="", color="#d62728", label="casualties"))
    ax.legend(handles=handles, loc="upper right", fontsize=7)
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title(f"operations map at t={world.time:g}s")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_timeline(schedule: Schedule, path: str | Path) -> Path:
    """Per-agent Gantt chart of the schedule; adaption time as a marker."""
    path = Path(path)
    agents = sorted({a for e in schedule.entries for a in e.agents})
    fig, ax = plt.subplots(figsize=(9, 1.2 + 0.5 * max(1, len(agents))))
    cmap = plt.get_cmap("tab20")
    task_ids = sorted({e.task for e in schedule.entries})
    task_color = {t: cmap(i % 20) for i, t in enumerate(task_ids)}

    for row, aid in enumerate(agents):
        for e in schedule.entries:
            if aid not in e.agents:
                continue
            ax.barh(
                row, e.finish - e.start, left=e.start, height=0.6,
                color=task_color[e.task], edgecolor="#333333", linewidth=0.5,
            )
            ax.annotate(
                f"{e.task}", (e.start + (e.finish - e.start) / 2, row),
                ha="center", va="center", fontsize=7,
            )
    if math.isfinite(schedule.adaption_time):
        ax.axvline(schedule.adaption_time, color="#d62728", linestyle="--", linewidth=1.2)
        ax.annotate(
            "adaption", (schedule.adaption_time, len(agents) - 0.4),
            color="#d62728", fontsize=8, rotation=90, va="top",
        )
    ax.set_yticks(range(len(agents)))
    ax.set_yticklabels(agents)
    ax.set_xlabel("seconds since epoch")
    ax.set_title(
        f"schedule for decision {schedule.decision.id} "
        f"(makespan {schedule.makespan:g}s)"
    )
    ax.set_xlim(left=min((e.start for e in schedule.entries), default=0.0))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_regions_csv(world: WorldState, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["region", "task_type", "revealed", "in_progress", "done", "remaining_workload_s"]
        )
        for summary in geo.aggregate_by_region(world):
            if not summary.per_type_counts:
                writer.writerow([summary.region, "", 0, 0, 0, f"{summary.total_remaining_workload:.6f}"])
                continue
            for task_type, counts in sorted(summary.per_type_counts.items()):
                writer.writerow(
                    [
                        summary.region,
                        task_type,
                        counts.revealed,
                        counts.in_progress,
                        counts.done,
                        f"{summary.total_remaining_workload:.6f}",
                    ]
                )
    return path


def write_schedule_csv(schedule: Schedule, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["task", "task_type", "region", "agents", "start", "finish", "estimated_done", "estimated_reveals"]
        )
        for e in schedule.entries:
            writer.writerow(
                [
                    e.task,
                    e.task_type,
                    e.region,
                    " ".join(sorted(e.agents)),
                    f"{e.start:.6f}",
                    f"{e.finish:.6f}",
                    e.estimated_done,
                    " ".join(f"{t}:{n}" for t, n in e.estimated_reveals),
                ]
            )
    return path
