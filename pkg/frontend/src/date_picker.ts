import { renderResults, showError } from "./render";
import { RowsResponse, StateStore, stateFor } from "./types";

/**
 * A date input that fetches matching rows on selection and re-renders the
 * target results region. Plain <input type="date">, so a browser agent can
 * drive it with an ordinary type/select action.
 */
export function mountDatePicker(anchor: HTMLElement, store: StateStore): void {
  const endpoint = anchor.dataset.endpoint ?? "/api/rows";
  const param = anchor.dataset.param ?? "date";
  const targetId = anchor.dataset.target ?? "";

  const label = document.createElement("label");
  label.textContent = `Pick a ${param}: `;
  const input = document.createElement("input");
  input.type = "date";
  input.name = param;
  label.appendChild(input);
  anchor.appendChild(label);

  input.addEventListener("change", async () => {
    if (!input.value) return;
    const target = document.getElementById(targetId);
    if (!target) return;
    try {
      const response = await fetch(`${endpoint}?${param}=${encodeURIComponent(input.value)}`);
      if (!response.ok) throw new Error(`status ${response.status}`);
      const payload = (await response.json()) as RowsResponse;
      const state = stateFor(store, targetId);
      state.rows = payload.rows;
      renderResults(target, state);
    } catch (err) {
      showError(anchor, err instanceof Error ? err.message : String(err));
    }
  });
}
