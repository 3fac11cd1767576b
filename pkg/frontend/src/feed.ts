/** Live ops feed items and the recommendation inbox cards. */

import type { EventDoc, RecommendationDoc } from "./types";

const EVENT_ICONS: Record<string, string> = {
  task_started: "▶",
  task_progress: "…",
  task_done: "✔",
  tasks_revealed: "✚",
  agent_released: "↩",
  agent_disabled: "✖",
  replan_triggered: "⟳",
  allocation_made: "⇄",
};

export function renderEventItem(event: EventDoc): HTMLElement {
  const item = document.createElement("li");
  item.className = `event event-${event.kind}`;
  item.dataset.kind = event.kind;
  const subject =
    (event.payload["task"] as string | undefined) ??
    (event.payload["agent"] as string | undefined) ??
    "";
  item.textContent = `${EVENT_ICONS[event.kind] ?? "•"} t=${event.at.toFixed(1)}s ${event.kind}${
    subject ? ` ${subject}` : ""
  }`;
  return item;
}

export function renderRecommendation(
  rec: RecommendationDoc,
  onAccept: (id: string) => void,
  onDismiss: (id: string) => void,
): HTMLElement {
  const card = document.createElement("article");
  card.className = "recommendation";
  card.dataset.kind = rec.kind;
  card.dataset.recId = rec.id;
  const gain = rec.predicted_gain > 0 ? ` (saves ~${rec.predicted_gain.toFixed(0)}s)` : "";
  card.innerHTML = `
    <header><strong>${rec.kind}</strong> → ${rec.subject.join(", ")}${gain}</header>
    <p>${rec.rationale}</p>
    <footer>
      <button type="button" class="accept">accept</button>
      <button type="button" class="dismiss">dismiss</button>
    </footer>
  `;
  card.querySelector(".accept")!.addEventListener("click", () => onAccept(rec.id));
  card.querySelector(".dismiss")!.addEventListener("click", () => onDismiss(rec.id));
  return card;
}
