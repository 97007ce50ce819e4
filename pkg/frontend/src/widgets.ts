import { mountBarChart } from "./bar_chart";
import { mountDatePicker } from "./date_picker";
import { mountRadioFilter } from "./radio_filter";
import { StateStore } from "./types";

/** Hydrate every widget anchor on the page. Safe to call once per document. */
export function hydrate(root: Document = document): void {
  const store: StateStore = new Map();
  root.querySelectorAll<HTMLElement>("[data-widget]").forEach((anchor) => {
    switch (anchor.dataset.widget) {
      case "date_picker":
        mountDatePicker(anchor, store);
        break;
      case "radio_filter":
        mountRadioFilter(anchor, store);
        break;
      case "bar_chart":
        void mountBarChart(anchor as HTMLCanvasElement);
        break;
      default:
        break;
    }
  });
}

if (typeof document !== "undefined" && typeof window !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", () => hydrate());
  } else {
    hydrate();
  }
}
