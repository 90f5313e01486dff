// Renderer contract: canned service payloads in, checkable DOM out.

import { describe, expect, test } from "vitest";

import type {
  DiffsPayload,
  ProvenanceEntry,
  ResultsPayload,
} from "../src/api.js";
import {
  renderDiffs,
  renderError,
  renderImportance,
  renderPreview,
  renderProvenance,
  renderRunFacts,
  renderScoreCards,
} from "../src/render.js";

const RESULTS: ResultsPayload = {
  config: { mode: "join_select_align" },
  stage_seconds: { search: 0.12, select: 0.03, align: 0.2, eval: 1.51 },
  before: {
    task_kind: "classification",
    metric: "macro_f1",
    fold_scores: [0.5, 0.6, 0.55, 0.58],
    mean: 0.5575,
    std: 0.0368,
    wall_time_seconds: 0.41,
  },
  after: {
    task_kind: "classification",
    metric: "macro_f1",
    fold_scores: [0.9, 0.95, 0.92, 0.93],
    mean: 0.925,
    std: 0.0184,
    wall_time_seconds: 0.62,
  },
  improvement_pct: 65.9192,
  importance: {
    features: [
      { name: "indicator 0 (t0003)", importance: 0.91, origin: "enriched" },
      { name: "year", importance: 0.42, origin: "query" },
      { name: "indicator 0 (t0007)", importance: 0, origin: "enriched" },
    ],
  },
  candidate_counts: { after_search: 12, after_selection: 6 },
  tables_used: ["t0003", "t0007"],
  model_kind_used: "lasso_linear",
};

const PROVENANCE: ProvenanceEntry[] = [
  {
    table_id: "t0003",
    title: "product market value indicators 0",
    context: "retail units growth",
    source_url: "https://example.test/t0003",
    score: 0.8123,
    columns: ["indicator 0"],
  },
  {
    table_id: "t0007",
    title: "unsourced table",
    context: "demand margin",
    source_url: null,
    score: 0.644,
    columns: [],
  },
];

const DIFFS: DiffsPayload = {
  supported: true,
  filter: "all",
  counts: { fixed: 2, broken: 1, "both-wrong-changed": 0 },
  diffs: [
    { row: 3, before: "low", after: "high", truth: "high", flag: "fixed" },
    { row: 7, before: "high", after: "low", truth: "high", flag: "broken" },
    { row: 9, before: "low", after: "high", truth: "high", flag: "fixed" },
  ],
};

describe("score cards", () => {
  test("before, after, and change carry the raw API values", () => {
    const node = renderScoreCards(document, RESULTS);
    const value = (field: string) =>
      node.querySelector(`[data-field="${field}"]`)?.getAttribute("data-value");
    expect(Number(value("before-mean"))).toBe(0.5575);
    expect(Number(value("after-mean"))).toBe(0.925);
    expect(Number(value("improvement"))).toBe(65.9192);
    expect(node.textContent).toContain("macro_f1");
    expect(node.textContent).toContain("+65.92%");
  });

  test("a regression is styled as bad, not good", () => {
    const node = renderScoreCards(document, { ...RESULTS, improvement_pct: -4.4 });
    const delta = node.querySelector('[data-field="improvement"]')!;
    expect(delta.className).toContain("bad");
    expect(delta.textContent).toBe("-4.4%");
  });
});

describe("run facts", () => {
  test("stage timings and candidate counts come through", () => {
    const node = renderRunFacts(document, RESULTS);
    expect(node.textContent).toContain("tables after search");
    expect(node.textContent).toContain("12");
    expect(node.textContent).toContain("tables after selection");
    expect(node.textContent).toContain("lasso_linear");
  });

  test("skipped stages say so instead of showing a number", () => {
    const results = {
      ...RESULTS,
      stage_seconds: { search: 0.12, select: null, align: null, eval: 1.0 },
    };
    const node = renderRunFacts(document, results);
    expect(node.textContent).toContain("skipped");
  });
});

describe("importance chart", () => {
  test("bars keep the API's rank order", () => {
    const node = renderImportance(document, RESULTS);
    const names = [...node.querySelectorAll("rect")].map((r) =>
      r.getAttribute("data-name"),
    );
    expect(names).toEqual([
      "indicator 0 (t0003)",
      "year",
      "indicator 0 (t0007)",
    ]);
  });

  test("origin classes split query from enriched", () => {
    const node = renderImportance(document, RESULTS);
    const byName = new Map(
      [...node.querySelectorAll("rect")].map((r) => [
        r.getAttribute("data-name"),
        r.getAttribute("class"),
      ]),
    );
    expect(byName.get("year")).toBe("bar-query");
    expect(byName.get("indicator 0 (t0003)")).toBe("bar-enriched");
    // legend shows both color swatches
    expect(node.querySelector(".legend .swatch.bar-query")).not.toBeNull();
    expect(node.querySelector(".legend .swatch.bar-enriched")).not.toBeNull();
  });

  test("bar widths scale with importance and never vanish", () => {
    const node = renderImportance(document, RESULTS);
    const widths = [...node.querySelectorAll("rect")].map((r) =>
      Number(r.getAttribute("width")),
    );
    expect(widths[0]).toBeGreaterThan(widths[1]);
    expect(widths[2]).toBe(1); // zero importance keeps a sliver
  });
});

describe("provenance", () => {
  test("entries render with links only when a source url exists", () => {
    const node = renderProvenance(document, PROVENANCE);
    const items = node.querySelectorAll("ol.provenance li");
    expect(items.length).toBe(2);
    const linked = items[0].querySelector("a.prov-title")!;
    expect(linked.getAttribute("href")).toBe("https://example.test/t0003");
    expect(items[1].querySelector("a")).toBeNull();
    expect(items[0].textContent).toContain("indicator 0");
    expect(items[1].textContent).toContain("no columns taken");
  });

  test("an empty list says so", () => {
    const node = renderProvenance(document, []);
    expect(node.textContent).toContain("no tables contributed");
  });
});

describe("diffs", () => {
  test("regression jobs show the reason instead of a table", () => {
    const node = renderDiffs(document, {
      supported: false,
      reason: "prediction diffs exist for classification only",
    });
    expect(node.textContent).toContain("classification only");
    expect(node.querySelector("table")).toBeNull();
  });

  test("rows carry their index and flag", () => {
    const node = renderDiffs(document, DIFFS);
    const rows = [...node.querySelectorAll("tr[data-row]")];
    expect(rows.map((r) => r.getAttribute("data-row"))).toEqual(["3", "7", "9"]);
    expect(rows[1].className).toBe("flag-broken");
    const counts = [...node.querySelectorAll(".diff-counts [data-count]")].map(
      (n) => n.textContent,
    );
    expect(counts).toEqual(["fixed: 2", "broken: 1", "both-wrong-changed: 0"]);
  });

  test("an empty filter result is stated, not blank", () => {
    const node = renderDiffs(document, { ...DIFFS, diffs: [] });
    expect(node.querySelector("table")).toBeNull();
    expect(node.textContent).toContain("no rows under this filter");
  });
});

describe("upload preview", () => {
  test("shows the header and at most twenty rows", () => {
    const preview = Array.from({ length: 25 }, (_, i) => [`key${i}`, String(i)]);
    const node = renderPreview(document, {
      token: "t",
      fileName: "big.csv",
      columns: ["name", "value"],
      rowCount: 500,
      preview,
    });
    const headers = [...node.querySelectorAll("thead th")].map((n) => n.textContent);
    expect(headers).toEqual(["name", "value"]);
    expect(node.querySelectorAll("tbody tr").length).toBe(20);
    expect(node.textContent).toContain("500 rows");
    expect(node.textContent).toContain("2 columns");
  });
});

describe("errors", () => {
  test("messages render as alerts", () => {
    const node = renderError(document, "upload exploded");
    expect(node.getAttribute("role")).toBe("alert");
    expect(node.textContent).toBe("upload exploded");
  });
});
