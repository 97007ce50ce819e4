import { renderResults } from "./render";
import { StateStore, stateFor } from "./types";

/**
 * Radio buttons that narrow the already-fetched rows client-side by one
 * field. An "any" option clears the filter.
 */
export function mountRadioFilter(anchor: HTMLElement, store: StateStore): void {
  const field = anchor.dataset.field ?? "";
  const targetId = anchor.dataset.target ?? "";
  const choices: string[] = JSON.parse(anchor.dataset.choices ?? "[]");

  const group = document.createElement("fieldset");
  const legend = document.createElement("legend");
  legend.textContent = `Filter by ${field}`;
  group.appendChild(legend);
  const name = `filter-${field}`;

  const addOption = (value: string, text: string) => {
    const label = document.createElement("label");
    const radio = document.createElement("input");
    radio.type = "radio";
    radio.name = name;
    radio.value = value;
    radio.addEventListener("change", () => {
      const target = document.getElementById(targetId);
      if (!target) return;
      const state = stateFor(store, targetId);
      state.filters[field] = value;
      renderResults(target, state);
    });
    label.appendChild(radio);
    label.appendChild(document.createTextNode(` ${text}`));
    group.appendChild(label);
  };

  addOption("", `any ${field}`);
  for (const choice of choices) addOption(choice, choice);
  anchor.appendChild(group);
}
