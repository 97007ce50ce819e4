import { describe, expect, it } from "vitest";
import { mountRadioFilter } from "../src/radio_filter";
import { renderResults } from "../src/render";
import { StateStore, stateFor } from "../src/types";
import { FLIGHT_ROWS } from "./helpers";

function setup() {
  document.body.innerHTML = `
    <div id="filter" data-widget="radio_filter" data-field="origin"
         data-target="results" data-choices='["Arlano","Corvan"]'></div>
    <div id="results"></div>`;
  const store: StateStore = new Map();
  const state = stateFor(store, "results");
  state.rows = [...FLIGHT_ROWS];
  renderResults(document.getElementById("results")!, state);
  mountRadioFilter(document.getElementById("filter")!, store);
  return store;
}

function choose(value: string) {
  const radios = [...document.querySelectorAll<HTMLInputElement>("#filter input[type=radio]")];
  const radio = radios.find((r) => r.value === value)!;
  radio.checked = true;
  radio.dispatchEvent(new Event("change"));
}

describe("radio filter", () => {
  it("renders one radio per choice plus an any option", () => {
    setup();
    const radios = document.querySelectorAll("#filter input[type=radio]");
    expect(radios.length).toBe(3);
  });

  it("narrows rows client-side without refetching", () => {
    setup();
    choose("Arlano");
    const results = document.getElementById("results")!;
    expect(results.textContent).toContain("2 rows shown.");
    expect(results.textContent).toContain("SF100");
    expect(results.textContent).not.toContain("SF101");
  });

  it("the any option restores the full set", () => {
    setup();
    choose("Corvan");
    choose("");
    expect(document.getElementById("results")!.textContent).toContain("3 rows shown.");
  });
});
