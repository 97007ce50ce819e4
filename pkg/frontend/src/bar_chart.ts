import { showError } from "./render";
import { Row, RowsResponse } from "./types";

/**
 * Bar chart painted onto a canvas. The numeric values exist only as pixels -
 * nothing numeric is written into the DOM - so a text-mode agent cannot read
 * them and must fall back to visual inspection.
 */
export function mountBarChart(canvas: HTMLCanvasElement): Promise<void> {
  const endpoint = canvas.dataset.endpoint ?? "/api/rows";
  const metric = canvas.dataset.metric ?? "";
  const period = canvas.dataset.period ?? "";
  const params = new URLSearchParams();
  if (metric) params.set("metric", metric);
  if (period) params.set("period", period);

  return fetch(`${endpoint}?${params.toString()}`)
    .then((response) => {
      if (!response.ok) throw new Error(`status ${response.status}`);
      return response.json() as Promise<RowsResponse>;
    })
    .then((payload) => drawBars(canvas, payload.rows))
    .catch((err) => {
      showError(canvas.parentElement ?? document.body, err instanceof Error ? err.message : String(err));
    });
}

export function drawBars(canvas: HTMLCanvasElement, rows: Row[]): void {
  const context = canvas.getContext("2d");
  if (!context) return;
  const width = canvas.width || 640;
  const height = canvas.height || 320;
  context.clearRect(0, 0, width, height);
  context.fillStyle = "#ffffff";
  context.fillRect(0, 0, width, height);
  if (rows.length === 0) return;
  const values = rows.map((row) => Number(row.value ?? 0));
  const peak = Math.max(...values, 1);
  const slot = width / rows.length;
  const barWidth = Math.max(8, slot * 0.6);
  rows.forEach((row, i) => {
    const value = Number(row.value ?? 0);
    const barHeight = (value / peak) * (height - 60);
    const x = i * slot + (slot - barWidth) / 2;
    const y = height - 30 - barHeight;
    context.fillStyle = "#4a7ab5";
    context.fillRect(x, y, barWidth, barHeight);
    context.fillStyle = "#111111";
    context.font = "12px sans-serif";
    // values are painted, never inserted as DOM text
    context.fillText(String(value), x, y - 4);
    context.fillText(String(row.region ?? row.label ?? i + 1), x, height - 12);
  });
}
