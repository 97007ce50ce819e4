import { ResultState, Row } from "./types";

export function visibleRows(state: ResultState): Row[] {
  return state.rows.filter((row) =>
    Object.entries(state.filters).every(([field, value]) => !value || String(row[field]) === value),
  );
}

/** Re-render the shared results region as a plain table. */
export function renderResults(target: HTMLElement, state: ResultState): void {
  const rows = visibleRows(state);
  target.textContent = "";
  const summary = document.createElement("p");
  summary.textContent = `${rows.length} rows shown.`;
  target.appendChild(summary);
  if (rows.length === 0) return;
  const table = document.createElement("table");
  const columns = Object.keys(rows[0]);
  const head = document.createElement("tr");
  for (const column of columns) {
    const th = document.createElement("th");
    th.textContent = column;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const row of rows) {
    const tr = document.createElement("tr");
    for (const column of columns) {
      const td = document.createElement("td");
      td.textContent = String(row[column]);
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  target.appendChild(table);
}

export function showError(anchor: HTMLElement, message: string): void {
  const banner = document.createElement("div");
  banner.className = "widget-error";
  banner.setAttribute("role", "alert");
  banner.textContent = `Failed to load data: ${message}`;
  anchor.appendChild(banner);
}
