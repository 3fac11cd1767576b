/** Gantt-style schedule timeline: rows are agents, bars are macro decisions. */

import type { ScheduleDoc } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";
const ROW_H = 28;
const LEFT = 70;
const WIDTH = 640;
const TOP = 24;

export function renderTimeline(schedule: ScheduleDoc): SVGSVGElement {
  const agents = Array.from(new Set(schedule.entries.flatMap((e) => e.agents))).sort();
  const height = TOP + ROW_H * Math.max(agents.length, 1) + 30;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${height}`);
  svg.classList.add("timeline");

  const t0 = Math.min(schedule.created_at, ...schedule.entries.map((e) => e.start));
  const t1 = Math.max(schedule.makespan, t0 + 1e-9);
  const x = (t: number) => LEFT + ((t - t0) / (t1 - t0)) * (WIDTH - LEFT - 20);

  agents.forEach((aid, row) => {
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", "4");
    label.setAttribute("y", String(TOP + row * ROW_H + 17));
    label.setAttribute("class", "timeline-agent");
    label.textContent = aid;
    svg.appendChild(label);
  });

  for (const entry of schedule.entries) {
    for (const aid of entry.agents) {
      const row = agents.indexOf(aid);
      const bar = document.createElementNS(SVG_NS, "rect");
      bar.setAttribute("x", String(x(entry.start)));
      bar.setAttribute("y", String(TOP + row * ROW_H + 4));
      bar.setAttribute("width", String(Math.max(2, x(entry.finish) - x(entry.start))));
      bar.setAttribute("height", String(ROW_H - 8));
      bar.setAttribute("class", "timeline-bar");
      bar.setAttribute("data-task", entry.task);
      const tip = document.createElementNS(SVG_NS, "title");
      tip.textContent =
        `${entry.task} (${entry.task_type} @ ${entry.region}) ` +
        `${entry.start.toFixed(1)}s → ${entry.finish.toFixed(1)}s, ` +
        `${entry.estimated_done} micro tasks`;
      bar.appendChild(tip);
      svg.appendChild(bar);
      const text = document.createElementNS(SVG_NS, "text");
      text.setAttribute("x", String(x(entry.start) + 3));
      text.setAttribute("y", String(TOP + row * ROW_H + 18));
      text.setAttribute("class", "timeline-task");
      text.textContent = entry.task;
      svg.appendChild(text);
    }
  }

  if (schedule.adaption_time !== "inf" && Number.isFinite(schedule.adaption_time)) {
    const line = document.createElementNS(SVG_NS, "line");
    const ax = x(schedule.adaption_time as number);
    line.setAttribute("x1", String(ax));
    line.setAttribute("x2", String(ax));
    line.setAttribute("y1", String(TOP - 6));
    line.setAttribute("y2", String(height - 20));
    line.setAttribute("class", "timeline-adaption");
    svg.appendChild(line);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(ax + 4));
    label.setAttribute("y", String(TOP - 10));
    label.setAttribute("class", "timeline-adaption-label");
    label.textContent = "adaption";
    svg.appendChild(label);
  }

  const axis = document.createElementNS(SVG_NS, "text");
  axis.setAttribute("x", String(LEFT));
  axis.setAttribute("y", String(height - 6));
  axis.setAttribute("class", "timeline-axis");
  axis.textContent = `t=${t0.toFixed(1)}s … makespan ${schedule.makespan.toFixed(1)}s`;
  svg.appendChild(axis);
  return svg;
}
