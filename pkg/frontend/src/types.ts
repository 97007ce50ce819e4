export type Row = Record<string, string | number>;

export interface RowsResponse {
  rows: Row[];
}

/** Shared per-target state: the last fetched rows plus active client-side filters. */
export interface ResultState {
  rows: Row[];
  filters: Record<string, string>;
}

export type StateStore = Map<string, ResultState>;

export function stateFor(store: StateStore, targetId: string): ResultState {
  let state = store.get(targetId);
  if (!state) {
    state = { rows: [], filters: {} };
    store.set(targetId, state);
  }
  return state;
}
