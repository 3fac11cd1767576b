/** Strategy editor: thread rows with client-side invariant checks. */

import type { StrategyDoc, ThreadDoc } from "./types";

export interface ThreadDraft {
  id: string;
  priority: number;
  goal_task_types: string[];
  goal_regions: string[];
  min_agents: number;
  max_agents: number;
}

export interface DraftError {
  thread: string;
  field: string;
  message: string;
}

/** Mirror of the server-side strategy invariants, run before submission. */
export function validateDraft(threads: ThreadDraft[]): DraftError[] {
  const errors: DraftError[] = [];
  if (!threads.length) {
    errors.push({ thread: "", field: "threads", message: "at least one thread is required" });
  }
  const seen = new Set<string>();
  for (const t of threads) {
    if (!t.id) errors.push({ thread: t.id, field: "id", message: "thread id is required" });
    if (seen.has(t.id))
      errors.push({ thread: t.id, field: "id", message: "duplicate thread id" });
    seen.add(t.id);
    if (t.priority < 1)
      errors.push({ thread: t.id, field: "priority", message: "priority must be >= 1" });
    if (!t.goal_task_types.length)
      errors.push({ thread: t.id, field: "goal_task_types", message: "pick at least one task type" });
    if (t.min_agents < 0)
      errors.push({ thread: t.id, field: "min_agents", message: "min must be >= 0" });
    if (t.min_agents > t.max_agents)
      errors.push({ thread: t.id, field: "max_agents", message: "max must be >= min" });
  }
  return errors;
}

export function draftToStrategy(id: string, objective: string, threads: ThreadDraft[]): StrategyDoc {
  return {
    id,
    objective,
    threads: threads.map(
      (t): ThreadDoc => ({
        id: t.id,
        priority: t.priority,
        goal_task_types: [...t.goal_task_types].sort(),
        goal_regions: [...t.goal_regions].sort(),
        min_agents: t.min_agents,
        max_agents: t.max_agents,
      }),
    ),
  };
}

export interface StrategyEditor {
  element: HTMLElement;
  setOptions(taskTypes: string[], regions: string[]): void;
  setThreads(threads: ThreadDraft[]): void;
  readThreads(): ThreadDraft[];
  showErrors(errors: DraftError[]): void;
}

export function buildStrategyEditor(onSubmit: (strategy: StrategyDoc) => void): StrategyEditor {
  const element = document.createElement("section");
  element.className = "panel strategy-editor";
  element.innerHTML = `
    <h2>Strategy</h2>
    <div class="row">
      <label>id <input name="strategy-id" value="ops"></label>
      <label>objective <input name="strategy-objective" value="stabilize the area"></label>
    </div>
    <table class="threads">
      <thead><tr>
        <th>thread</th><th>priority</th><th>task types</th><th>regions</th>
        <th>min</th><th>max</th><th></th>
      </tr></thead>
      <tbody></tbody>
    </table>
    <div class="row">
      <button type="button" class="add-thread">add thread</button>
      <button type="button" class="submit-strategy">submit strategy</button>
    </div>
    <ul class="strategy-errors"></ul>
  `;
  const tbody = element.querySelector("tbody")!;
  const errorsList = element.querySelector(".strategy-errors")!;
  let taskTypeOptions: string[] = [];
  let regionOptions: string[] = [];

  function addRow(draft?: Partial<ThreadDraft>): void {
    const row = document.createElement("tr");
    row.className = "thread-row";
    row.innerHTML = `
      <td><input class="t-id" value="${draft?.id ?? `T${tbody.children.length + 1}`}"></td>
      <td><input class="t-priority" type="number" min="1" value="${draft?.priority ?? 1}"></td>
      <td class="t-types"></td>
      <td class="t-regions"></td>
      <td><input class="t-min" type="number" min="0" value="${draft?.min_agents ?? 0}"></td>
      <td><input class="t-max" type="number" min="0" value="${draft?.max_agents ?? 1}"></td>
      <td><button type="button" class="remove">x</button></td>
    `;
    const typeCell = row.querySelector(".t-types")!;
    for (const tt of taskTypeOptions) {
      const checked = draft?.goal_task_types?.includes(tt) ? "checked" : "";
      typeCell.insertAdjacentHTML(
        "beforeend",
        `<label><input type="checkbox" class="t-type" value="${tt}" ${checked}>${tt}</label>`,
      );
    }
    const regionCell = row.querySelector(".t-regions")!;
    for (const rid of regionOptions) {
      const checked = draft?.goal_regions?.includes(rid) ? "checked" : "";
      regionCell.insertAdjacentHTML(
        "beforeend",
        `<label><input type="checkbox" class="t-region" value="${rid}" ${checked}>${rid}</label>`,
      );
    }
    row.querySelector(".remove")!.addEventListener("click", () => row.remove());
    tbody.appendChild(row);
  }

  function readThreads(): ThreadDraft[] {
    return Array.from(tbody.querySelectorAll(".thread-row")).map((row) => ({
      id: (row.querySelector(".t-id") as HTMLInputElement).value.trim(),
      priority: Number((row.querySelector(".t-priority") as HTMLInputElement).value),
      goal_task_types: Array.from(row.querySelectorAll<HTMLInputElement>(".t-type:checked")).map(
        (el) => el.value,
      ),
      goal_regions: Array.from(row.querySelectorAll<HTMLInputElement>(".t-region:checked")).map(
        (el) => el.value,
      ),
      min_agents: Number((row.querySelector(".t-min") as HTMLInputElement).value),
      max_agents: Number((row.querySelector(".t-max") as HTMLInputElement).value),
    }));
  }

  function showErrors(errors: DraftError[]): void {
    errorsList.innerHTML = "";
    for (const err of errors) {
      const item = document.createElement("li");
      item.className = "field-error";
      item.dataset.field = err.field;
      item.textContent = err.thread ? `${err.thread}/${err.field}: ${err.message}` : err.message;
      errorsList.appendChild(item);
    }
  }

  element.querySelector(".add-thread")!.addEventListener("click", () => addRow());
  element.querySelector(".submit-strategy")!.addEventListener("click", () => {
    const threads = readThreads();
    const errors = validateDraft(threads);
    showErrors(errors);
    if (errors.length) return; // invalid drafts never reach the wire
    const id = (element.querySelector('[name="strategy-id"]') as HTMLInputElement).value.trim();
    const objective = (
      element.querySelector('[name="strategy-objective"]') as HTMLInputElement
    ).value.trim();
    onSubmit(draftToStrategy(id || "strategy", objective, threads));
  });

  return {
    element,
    setOptions(taskTypes, regions) {
      taskTypeOptions = taskTypes;
      regionOptions = regions;
    },
    setThreads(threads) {
      tbody.innerHTML = "";
      for (const t of threads) addRow(t);
    },
    readThreads,
    showErrors,
  };
}
