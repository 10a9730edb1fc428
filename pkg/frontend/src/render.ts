// SVG + DOM rendering. Pure view code: state in, elements out.

import type { ChecklistItem, NetworkDoc, RoundEntry, SessionView } from "./model.js";
import { nodeLabel, uncertainIndices } from "./model.js";
import type { Point } from "./layout.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface GraphHandlers {
  onNodeClick?: (node: number) => void;
}

export function renderGraph(
  svg: SVGSVGElement,
  doc: NetworkDoc,
  layout: Point[],
  view: Pick<SessionView, "influenced" | "executed"> & { recommendation: number[] | null },
  handlers: GraphHandlers = {},
): void {
  svg.innerHTML = "";
  const unc = uncertainIndices(doc);
  const recommended = new Set(view.recommendation ?? []);
  const executed = new Set(view.executed);

  doc.edges.forEach((e, position) => {
    const a = layout[e.src];
    const b = layout[e.dst];
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", a.x.toFixed(1));
    line.setAttribute("y1", a.y.toFixed(1));
    line.setAttribute("x2", b.x.toFixed(1));
    line.setAttribute("y2", b.y.toFixed(1));
    const uncertain = e.u !== undefined;
    line.setAttribute("class", uncertain ? "edge uncertain" : "edge certain");
    line.setAttribute("stroke", uncertain ? "#8a6d3b" : "#555");
    line.setAttribute("stroke-width", "1.5");
    line.setAttribute("data-src", String(e.src));
    line.setAttribute("data-dst", String(e.dst));
    if (uncertain) {
      line.setAttribute("stroke-dasharray", "6 4");
      line.setAttribute("data-edge-index", String(unc.get(position)));
    }
    svg.appendChild(line);
    if (uncertain) {
      const label = document.createElementNS(SVG_NS, "text");
      label.setAttribute("x", ((a.x + b.x) / 2).toFixed(1));
      label.setAttribute("y", ((a.y + b.y) / 2 - 4).toFixed(1));
      label.setAttribute("class", "edge-u-label");
      label.setAttribute("font-size", "9");
      label.setAttribute("fill", "#8a6d3b");
      label.textContent = `u=${e.u}`;
      svg.appendChild(label);
    }
  });

  for (let v = 0; v < doc.n_nodes; v++) {
    const g = document.createElementNS(SVG_NS, "g");
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", layout[v].x.toFixed(1));
    circle.setAttribute("cy", layout[v].y.toFixed(1));
    circle.setAttribute("r", "12");
    const classes = ["node"];
    if (view.influenced.has(v)) classes.push("influenced");
    if (recommended.has(v)) classes.push("recommended");
    if (executed.has(v)) classes.push("selected");
    circle.setAttribute("class", classes.join(" "));
    circle.setAttribute("data-node", String(v));
    circle.setAttribute(
      "fill",
      view.influenced.has(v) ? "#cc5b4d" : executed.has(v) ? "#4878b0" : "#dddddd",
    );
    circle.setAttribute("stroke", recommended.has(v) ? "#1a9641" : "#333");
    circle.setAttribute("stroke-width", recommended.has(v) ? "3" : "1");
    if (handlers.onNodeClick) {
      circle.addEventListener("click", () => handlers.onNodeClick?.(v));
    }
    g.appendChild(circle);
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", layout[v].x.toFixed(1));
    text.setAttribute("y", (layout[v].y + 4).toFixed(1));
    text.setAttribute("text-anchor", "middle");
    text.setAttribute("font-size", "11");
    text.textContent = nodeLabel(doc, v);
    g.appendChild(text);
    svg.appendChild(g);
  }
}

export function renderChecklist(
  container: HTMLElement,
  doc: NetworkDoc,
  checklist: ChecklistItem[],
  onMark: (edgeIndex: number, mark: ChecklistItem["mark"]) => void,
): void {
  container.innerHTML = "";
  if (!checklist.length) {
    const empty = document.createElement("p");
    empty.className = "checklist-empty";
    empty.textContent = "No uncertain friendships to ask about this round.";
    container.appendChild(empty);
    return;
  }
  for (const item of checklist) {
    const row = document.createElement("div");
    row.className = "checklist-row";
    row.dataset.edgeIndex = String(item.edgeIndex);
    const label = document.createElement("span");
    label.textContent =
      `${nodeLabel(doc, item.src)} → ${nodeLabel(doc, item.dst)} (u=${item.u})`;
    row.appendChild(label);
    const select = document.createElement("select");
    for (const mark of ["unknown", "exists", "absent"] as const) {
      const option = document.createElement("option");
      option.value = mark;
      option.textContent = mark;
      option.selected = item.mark === mark;
      select.appendChild(option);
    }
    select.addEventListener("change", () => {
      onMark(item.edgeIndex, select.value as ChecklistItem["mark"]);
    });
    row.appendChild(select);
    container.appendChild(row);
  }
}

export function renderTimeline(container: HTMLElement, timeline: RoundEntry[]): void {
  container.innerHTML = "";
  for (const entry of timeline) {
    const row = document.createElement("li");
    row.className = "timeline-row" + (entry.deviated ? " deviated" : "");
    const obs = entry.observations
      .map((o) => `${o.edge_index}:${o.exists ? "yes" : "no"}`)
      .join(" ");
    row.textContent =
      `round ${entry.round}: executed [${entry.executed.join(", ")}]` +
      (entry.deviated ? " (deviation)" : "") + (obs ? ` observed ${obs}` : "");
    container.appendChild(row);
  }
}
