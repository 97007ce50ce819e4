import { vi } from "vitest";
import { Row } from "../src/types";

export function mockFetchRows(rows: Row[]) {
  const fn = vi.fn(async () => ({
    ok: true,
    status: 200,
    json: async () => ({ rows }),
  }));
  vi.stubGlobal("fetch", fn);
  return fn;
}

export function mockFetchFailure(status = 500) {
  const fn = vi.fn(async () => ({
    ok: false,
    status,
    json: async () => ({}),
  }));
  vi.stubGlobal("fetch", fn);
  return fn;
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

export const FLIGHT_ROWS: Row[] = [
  { flight_no: "SF100", origin: "Arlano", destination: "Bexley", date: "2025-03-04", fare: 120.5 },
  { flight_no: "SF101", origin: "Corvan", destination: "Bexley", date: "2025-03-04", fare: 89.0 },
  { flight_no: "SF102", origin: "Arlano", destination: "Delmare", date: "2025-03-04", fare: 301.25 },
];
