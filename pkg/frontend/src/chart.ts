// Feature importances as plain SVG, one horizontal bar per feature in the
// exact order the service ranked them. Bars are colored by where the column
// came from (classes .bar-query and .bar-enriched, styled in the sheet).

import type { ImportanceEntry } from "./api.js";
import { fmt } from "./format.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const BAR_HEIGHT = 22;
const GAP = 6;
const LABEL_WIDTH = 190;
const VALUE_WIDTH = 80;
const CHART_WIDTH = 640;

function svgText(
  doc: Document,
  x: number,
  y: number,
  content: string,
): SVGTextElement {
  const node = doc.createElementNS(SVG_NS, "text") as SVGTextElement;
  node.setAttribute("x", String(x));
  node.setAttribute("y", String(y));
  node.textContent = content;
  return node;
}

export function importanceChart(
  doc: Document,
  features: ImportanceEntry[],
): SVGSVGElement {
  const svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  const height = features.length * (BAR_HEIGHT + GAP) + GAP;
  svg.setAttribute("viewBox", `0 0 ${CHART_WIDTH} ${Math.max(height, GAP)}`);
  svg.setAttribute("class", "importance-chart");
  svg.setAttribute("role", "img");
  svg.setAttribute("aria-label", "feature importances");

  const span = CHART_WIDTH - LABEL_WIDTH - VALUE_WIDTH;
  const max = features.reduce((acc, f) => Math.max(acc, f.importance), 0);
  features.forEach((feature, i) => {
    const y = GAP + i * (BAR_HEIGHT + GAP);
    const width = max > 0 ? (feature.importance / max) * span : 0;

    const label = svgText(doc, 4, y + BAR_HEIGHT * 0.72, feature.name);
    label.setAttribute("class", "bar-name");

    const bar = doc.createElementNS(SVG_NS, "rect");
    bar.setAttribute("x", String(LABEL_WIDTH));
    bar.setAttribute("y", String(y));
    // zero-importance features keep a sliver so the row reads as present
    bar.setAttribute("width", String(Math.max(width, 1)));
    bar.setAttribute("height", String(BAR_HEIGHT));
    bar.setAttribute("class", `bar-${feature.origin}`);
    bar.setAttribute("data-origin", feature.origin);
    bar.setAttribute("data-name", feature.name);

    const value = svgText(
      doc,
      LABEL_WIDTH + Math.max(width, 1) + 6,
      y + BAR_HEIGHT * 0.72,
      fmt(feature.importance, 3),
    );
    value.setAttribute("data-value", String(feature.importance));

    svg.append(label, bar, value);
  });
  return svg;
}
