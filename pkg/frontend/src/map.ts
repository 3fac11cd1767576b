/** SVG map rendering: a pure function of the latest /world payload. */

import type { RegionSummaryDoc, WorldDoc } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 640;
const HEIGHT = 520;
const PAD = 30;

interface Projector {
  x(lon: number): number;
  y(lat: number): number;
}

function projector(world: WorldDoc): Projector {
  const lons: number[] = [];
  const lats: number[] = [];
  for (const r of world.regions) {
    for (const [lon, lat] of r.boundary) {
      lons.push(lon);
      lats.push(lat);
    }
  }
  for (const group of [world.agents, world.refuges, world.casualty_clusters]) {
    for (const item of group) {
      lons.push(item.location[0]);
      lats.push(item.location[1]);
    }
  }
  if (!lons.length) {
    lons.push(0, 1);
    lats.push(0, 1);
  }
  const minLon = Math.min(...lons);
  const maxLon = Math.max(...lons);
  const minLat = Math.min(...lats);
  const maxLat = Math.max(...lats);
  const spanLon = Math.max(maxLon - minLon, 1e-6);
  const spanLat = Math.max(maxLat - minLat, 1e-6);
  return {
    x: (lon) => PAD + ((lon - minLon) / spanLon) * (WIDTH - 2 * PAD),
    y: (lat) => HEIGHT - PAD - ((lat - minLat) / spanLat) * (HEIGHT - 2 * PAD),
  };
}

function describe(kind: string, fields: Record<string, unknown>): string {
  const parts = Object.entries(fields).map(([k, v]) => `${k}: ${JSON.stringify(v)}`);
  return `${kind} — ${parts.join(", ")}`;
}

export function renderMap(
  world: WorldDoc,
  summaries: RegionSummaryDoc[],
  onSelect: (description: string) => void,
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.classList.add("map");
  const project = projector(world);
  const loads = new Map(summaries.map((s) => [s.region, s.total_remaining_workload]));
  const maxLoad = Math.max(0, ...summaries.map((s) => s.total_remaining_workload));

  for (const region of world.regions) {
    const polygon = document.createElementNS(SVG_NS, "polygon");
    polygon.setAttribute(
      "points",
      region.boundary.map(([lon, lat]) => `${project.x(lon)},${project.y(lat)}`).join(" "),
    );
    const load = loads.get(region.id) ?? 0;
    const intensity = maxLoad > 0 ? load / maxLoad : 0;
    polygon.setAttribute("class", "region");
    polygon.setAttribute("data-region", region.id);
    polygon.setAttribute("data-load", String(load));
    polygon.setAttribute("fill", `rgba(214, 69, 48, ${0.08 + 0.55 * intensity})`);
    polygon.addEventListener("click", () =>
      onSelect(describe("region", { id: region.id, name: region.name, remaining_workload: load })),
    );
    svg.appendChild(polygon);
  }

  for (const refuge of world.refuges) {
    const rect = document.createElementNS(SVG_NS, "rect");
    const x = project.x(refuge.location[0]);
    const y = project.y(refuge.location[1]);
    rect.setAttribute("x", String(x - 6));
    rect.setAttribute("y", String(y - 6));
    rect.setAttribute("width", "12");
    rect.setAttribute("height", "12");
    rect.setAttribute("class", "refuge");
    rect.addEventListener("click", () =>
      onSelect(describe("refuge", { id: refuge.id, occupied: refuge.occupied, capacity: refuge.capacity })),
    );
    svg.appendChild(rect);
  }

  for (const cluster of world.casualty_clusters) {
    const x = project.x(cluster.location[0]);
    const y = project.y(cluster.location[1]);
    const size = 6 + Math.min(10, cluster.count);
    const triangle = document.createElementNS(SVG_NS, "path");
    triangle.setAttribute(
      "d",
      `M ${x} ${y - size} L ${x + size} ${y + size} L ${x - size} ${y + size} Z`,
    );
    triangle.setAttribute("class", "cluster");
    triangle.addEventListener("click", () =>
      onSelect(describe("casualties", { id: cluster.id, count: cluster.count, severity: cluster.severity })),
    );
    svg.appendChild(triangle);
  }

  for (const agent of world.agents) {
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(project.x(agent.location[0])));
    circle.setAttribute("cy", String(project.y(agent.location[1])));
    circle.setAttribute("r", "7");
    circle.setAttribute("class", `agent agent-${agent.status}`);
    circle.setAttribute("data-agent", agent.id);
    circle.addEventListener("click", () =>
      onSelect(
        describe("agent", {
          id: agent.id,
          kind: agent.kind,
          status: agent.status,
          thread: agent.assigned_thread,
          speed: agent.speed,
          capabilities: agent.capabilities,
        }),
      ),
    );
    svg.appendChild(circle);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(project.x(agent.location[0]) + 9));
    label.setAttribute("y", String(project.y(agent.location[1]) - 9));
    label.setAttribute("class", "map-label");
    label.textContent = agent.id;
    svg.appendChild(label);
  }

  return svg;
}
