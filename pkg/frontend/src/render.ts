// Renderers for everything the service sends back. All of them are pure
// (document plus payload in, element out) so they can be exercised against
// canned payloads without a server.

import type {
  DiffsPayload,
  EvalReport,
  ProvenanceEntry,
  ResultsPayload,
} from "./api.js";
import { importanceChart } from "./chart.js";
import { clear, h } from "./dom.js";
import { fmt, fmtPct, fmtSeconds } from "./format.js";
import type { UploadInfo } from "./state.js";

// Number spans carry the raw value in data-value so scripts and tests can
// read back exactly what the API returned, not the rounded display text.
function num(
  doc: Document,
  value: number,
  field?: string,
  digits = 4,
): HTMLSpanElement {
  const attrs: Record<string, string> = { "data-value": String(value) };
  if (field) attrs["data-field"] = field;
  return h(doc, "span", attrs, fmt(value, digits));
}

export function renderError(doc: Document, message: string): HTMLElement {
  return h(doc, "div", { class: "error", role: "alert" }, message);
}

export function renderPreview(doc: Document, upload: UploadInfo): HTMLElement {
  const head = h(doc, "tr", {});
  for (const name of upload.columns) head.append(h(doc, "th", {}, name));
  const body = h(doc, "tbody", {});
  for (const row of upload.preview.slice(0, 20)) {
    const tr = h(doc, "tr", {});
    for (const cell of row) tr.append(h(doc, "td", {}, cell));
    body.append(tr);
  }
  const table = h(
    doc,
    "table",
    { class: "preview" },
    h(
      doc,
      "caption",
      {},
      `${upload.fileName} · ${upload.rowCount} rows · ` +
        `${upload.columns.length} columns · showing first ${Math.min(upload.preview.length, 20)}`,
    ),
    h(doc, "thead", {}, head),
    body,
  );
  return h(doc, "div", { class: "preview-wrap" }, table);
}

function scoreCard(
  doc: Document,
  title: string,
  report: EvalReport,
  field: string,
): HTMLElement {
  const folds = report.fold_scores.map((s) => fmt(s, 3)).join(", ");
  return h(
    doc,
    "article",
    { class: "score-card" },
    h(doc, "h4", {}, title),
    h(
      doc,
      "div",
      { class: "big" },
      num(doc, report.mean, field),
      h(doc, "span", { class: "muted" }, ` ${report.metric}`),
    ),
    h(doc, "div", {}, "± ", num(doc, report.std, `${field}-std`)),
    h(doc, "div", { class: "folds" }, `folds: ${folds}`),
    h(doc, "div", { class: "folds" }, `fit in ${fmtSeconds(report.wall_time_seconds)}`),
  );
}

export function renderScoreCards(
  doc: Document,
  results: ResultsPayload,
): HTMLElement {
  const delta = h(
    doc,
    "article",
    { class: "score-card" },
    h(doc, "h4", {}, "Change"),
    h(
      doc,
      "div",
      {
        class: `big delta ${results.improvement_pct >= 0 ? "good" : "bad"}`,
        "data-field": "improvement",
        "data-value": String(results.improvement_pct),
      },
      fmtPct(results.improvement_pct),
    ),
    h(doc, "div", { class: "folds" }, "positive means the model got better"),
  );
  return h(
    doc,
    "div",
    { class: "score-cards" },
    scoreCard(doc, "Before enrichment", results.before, "before-mean"),
    scoreCard(doc, "After enrichment", results.after, "after-mean"),
    delta,
  );
}

export function renderRunFacts(
  doc: Document,
  results: ResultsPayload,
): HTMLElement {
  const facts = h(doc, "dl", { class: "facts" });
  const add = (term: string, detail: Node | string) => {
    facts.append(h(doc, "dt", {}, term), h(doc, "dd", {}, detail));
  };
  const counts = results.candidate_counts;
  add("model used", results.model_kind_used);
  add("tables joined", String(results.tables_used.length));
  if ("after_search" in counts) {
    add("tables after search", String(counts.after_search));
  }
  if ("after_selection" in counts) {
    add("tables after selection", String(counts.after_selection));
  }
  for (const stage of ["search", "select", "align", "eval"]) {
    const seconds = results.stage_seconds[stage];
    add(`${stage} time`, fmtSeconds(seconds ?? null));
  }
  return facts;
}

export function renderImportance(
  doc: Document,
  results: ResultsPayload,
): HTMLElement {
  const legend = h(
    doc,
    "div",
    { class: "legend" },
    h(
      doc,
      "span",
      {},
      h(doc, "span", { class: "swatch bar-query" }),
      "from the query table",
    ),
    h(
      doc,
      "span",
      {},
      h(doc, "span", { class: "swatch bar-enriched" }),
      "added by enrichment",
    ),
  );
  return h(
    doc,
    "div",
    { class: "importance" },
    h(doc, "h3", {}, "Feature importance"),
    legend,
    importanceChart(doc, results.importance.features),
  );
}

export function renderProvenance(
  doc: Document,
  entries: ProvenanceEntry[],
): HTMLElement {
  const list = h(doc, "ol", { class: "provenance" });
  for (const entry of entries) {
    const title = entry.source_url
      ? h(doc, "a", { href: entry.source_url, class: "prov-title" }, entry.title)
      : h(doc, "span", { class: "prov-title" }, entry.title);
    const cols = h(doc, "span", { class: "prov-cols" });
    for (const name of entry.columns) cols.append(h(doc, "code", {}, name));
    list.append(
      h(
        doc,
        "li",
        { "data-table-id": entry.table_id },
        title,
        h(doc, "span", { class: "muted" }, ` score ${fmt(entry.score, 4)} · `),
        h(doc, "span", { class: "muted" }, entry.context),
        h(doc, "div", {}, entry.columns.length ? "columns taken: " : "no columns taken", cols),
      ),
    );
  }
  const section = h(doc, "div", {}, h(doc, "h3", {}, "Where the data came from"));
  section.append(
    entries.length ? list : h(doc, "p", { class: "muted" }, "no tables contributed"),
  );
  return section;
}

export function renderDiffs(doc: Document, payload: DiffsPayload): HTMLElement {
  const wrap = h(doc, "div", { class: "diff-body" });
  if (!payload.supported) {
    wrap.append(h(doc, "p", { class: "muted" }, payload.reason));
    return wrap;
  }
  const counts = h(doc, "p", { class: "diff-counts" });
  for (const flag of ["fixed", "broken", "both-wrong-changed"] as const) {
    counts.append(
      h(
        doc,
        "span",
        { "data-count": String(payload.counts[flag]) },
        `${flag}: ${payload.counts[flag]}`,
      ),
    );
  }
  const body = h(doc, "tbody", {});
  for (const diff of payload.diffs) {
    body.append(
      h(
        doc,
        "tr",
        { class: `flag-${diff.flag}`, "data-row": String(diff.row) },
        h(doc, "td", {}, String(diff.row)),
        h(doc, "td", {}, diff.before),
        h(doc, "td", {}, diff.after),
        h(doc, "td", {}, diff.truth),
        h(doc, "td", {}, diff.flag),
      ),
    );
  }
  const headRow = h(doc, "tr", {});
  for (const name of ["row", "before", "after", "truth", "flag"]) {
    headRow.append(h(doc, "th", {}, name));
  }
  wrap.append(counts);
  if (payload.diffs.length === 0) {
    wrap.append(h(doc, "p", { class: "muted" }, "no rows under this filter"));
  } else {
    wrap.append(
      h(doc, "table", { class: "diffs" }, h(doc, "thead", {}, headRow), body),
    );
  }
  return wrap;
}

export function swap(region: Element, node: Node): void {
  clear(region);
  region.append(node);
}
