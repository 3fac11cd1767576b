/** Ranked strategic choices: commit one, or delegate to the search. */

import type { ChoiceSetPayload, DecisionDoc, PlanDoc } from "./types";

function assignmentText(decision: DecisionDoc): string {
  return Object.entries(decision.assignment)
    .sort(([a], [b]) => (a < b ? -1 : 1))
    .map(([agent, thread]) => `${agent}→${thread}`)
    .join("  ");
}

function signature(assignment: Record<string, string>): string {
  return Object.entries(assignment)
    .sort(([a], [b]) => (a < b ? -1 : 1))
    .map(([a, t]) => `${a}:${t}`)
    .join("|");
}

export function renderChoices(
  payload: ChoiceSetPayload,
  optimal: PlanDoc | null,
  onCommit: (id: string) => void,
  onDelegate: () => void,
): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "choices";
  const optimalSig = optimal ? signature(optimal.decision.assignment) : null;

  const controls = document.createElement("div");
  controls.className = "row";
  const delegate = document.createElement("button");
  delegate.type = "button";
  delegate.className = "delegate-search";
  delegate.textContent = "delegate to search";
  delegate.addEventListener("click", onDelegate);
  controls.appendChild(delegate);
  if (payload.choices.truncated) {
    const note = document.createElement("span");
    note.className = "truncated-note";
    note.textContent = "list truncated";
    controls.appendChild(note);
  }
  panel.appendChild(controls);

  const list = document.createElement("ol");
  list.className = "choice-list";
  payload.choices.decisions.forEach((decision) => {
    const item = document.createElement("li");
    item.className = "choice";
    item.dataset.decisionId = decision.id;
    const score =
      decision.score === "inf"
        ? "leaves work uncovered"
        : decision.score === null
          ? "?"
          : `${(decision.score as number).toFixed(1)}s`;
    const isOptimal = optimalSig !== null && signature(decision.assignment) === optimalSig;
    item.innerHTML = `
      <span class="choice-score">${score}</span>
      <span class="choice-assignment">${assignmentText(decision)}</span>
      ${isOptimal ? '<span class="badge-optimal">optimal</span>' : ""}
      <button type="button" class="commit">commit</button>
    `;
    item.querySelector(".commit")!.addEventListener("click", () => onCommit(decision.id));
    list.appendChild(item);
  });
  panel.appendChild(list);
  return panel;
}
