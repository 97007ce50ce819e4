import { afterEach, describe, expect, it, vi } from "vitest";
import { mountBarChart } from "../src/bar_chart";
import { flush, mockFetchFailure, mockFetchRows } from "./helpers";

const STAT_ROWS = [
  { region: "East Shore", metric: "rainfall_mm", period: "2024-Q1", value: 231.4 },
  { region: "West Ridge", metric: "rainfall_mm", period: "2024-Q1", value: 87.9 },
];

function fakeContext() {
  return {
    clearRect: vi.fn(),
    fillRect: vi.fn(),
    fillText: vi.fn(),
    fillStyle: "",
    font: "",
  };
}

function setup() {
  document.body.innerHTML = `
    <p>Bars show the metric by region.</p>
    <canvas id="chart" data-widget="bar_chart" data-endpoint="/api/rows"
            data-metric="rainfall_mm" data-period="2024-Q1" width="640" height="320"></canvas>
    <p>Regions: <span>East Shore</span> <span>West Ridge</span></p>`;
  const canvas = document.getElementById("chart") as HTMLCanvasElement;
  const context = fakeContext();
  (canvas as any).getContext = vi.fn(() => context);
  return { canvas, context };
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("bar chart", () => {
  it("paints values onto the canvas", async () => {
    const { canvas, context } = setup();
    mockFetchRows(STAT_ROWS);
    await mountBarChart(canvas);
    await flush();
    const painted = context.fillText.mock.calls.map((call) => String(call[0]));
    expect(painted).toContain("231.4");
    expect(painted).toContain("87.9");
    expect(context.fillRect.mock.calls.length).toBeGreaterThanOrEqual(3); // background + 2 bars
  });

  it("keeps every numeric value out of the DOM text", async () => {
    const { canvas } = setup();
    mockFetchRows(STAT_ROWS);
    await mountBarChart(canvas);
    await flush();
    const domText = document.body.textContent ?? "";
    expect(domText).not.toContain("231.4");
    expect(domText).not.toContain("87.9");
    expect(/\d/.test(domText.replace(/\s/g, " "))).toBe(false);
    // while region labels stay readable for the text mode
    expect(domText).toContain("East Shore");
  });

  it("requests rows for its metric and period", async () => {
    const { canvas } = setup();
    const fetchMock = mockFetchRows(STAT_ROWS);
    await mountBarChart(canvas);
    expect(fetchMock).toHaveBeenCalledWith("/api/rows?metric=rainfall_mm&period=2024-Q1");
  });

  it("failure surfaces as a visible banner, not silence", async () => {
    const { canvas } = setup();
    mockFetchFailure();
    await mountBarChart(canvas);
    await flush();
    expect(document.querySelector(".widget-error")).not.toBeNull();
  });
});
