// Client-side network model: parsing, validation, and the observation
// bookkeeping the console needs. No planning logic lives here -- the
// server is the only source of recommendations.

export interface NodeDoc {
  id: number;
  label?: string;
}

export interface EdgeDoc {
  src: number;
  dst: number;
  p: number;
  u?: number;
}

export interface NetworkDoc {
  n_nodes: number;
  nodes?: NodeDoc[];
  edges: EdgeDoc[];
}

export class SchemaError extends Error {}

function fail(message: string): never {
  throw new SchemaError(message);
}

export function parseNetwork(text: string): NetworkDoc {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    fail(`not valid JSON: ${(err as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    fail("network document must be a JSON object");
  }
  const obj = doc as Record<string, unknown>;
  const n = obj.n_nodes;
  if (typeof n !== "number" || !Number.isInteger(n) || n < 0) {
    fail("n_nodes must be a non-negative integer");
  }
  if (!Array.isArray(obj.edges)) {
    fail("edges must be a list");
  }
  const seen = new Set<string>();
  const edges: EdgeDoc[] = [];
  for (const raw of obj.edges) {
    const e = raw as Record<string, unknown>;
    const src = e.src, dst = e.dst, p = e.p, u = e.u;
    if (typeof src !== "number" || typeof dst !== "number" || typeof p !== "number") {
      fail(`bad edge entry: ${JSON.stringify(raw)}`);
    }
    if (src === dst) fail(`self-loop at node ${src}`);
    if (src < 0 || src >= n || dst < 0 || dst >= n) {
      fail(`edge (${src},${dst}) references a node outside 0..${n - 1}`);
    }
    if (p < 0 || p > 1) fail(`propagation probability out of range: ${p}`);
    if (u !== undefined && (typeof u !== "number" || u <= 0 || u >= 1)) {
      fail(`existence probability out of range: ${u}`);
    }
    const key = `${src}>${dst}`;
    if (seen.has(key)) fail(`duplicate edge (${src},${dst})`);
    seen.add(key);
    edges.push(u === undefined ? { src, dst, p } : { src, dst, p, u });
  }
  const nodes: NodeDoc[] = [];
  if (obj.nodes !== undefined) {
    if (!Array.isArray(obj.nodes)) fail("nodes must be a list");
    for (const raw of obj.nodes) {
      const nd = raw as Record<string, unknown>;
      if (typeof nd.id !== "number") fail(`bad node entry: ${JSON.stringify(raw)}`);
      nodes.push({ id: nd.id, label: typeof nd.label === "string" ? nd.label : undefined });
    }
  }
  return { n_nodes: n, nodes: nodes.length ? nodes : undefined, edges };
}

export function nodeLabel(doc: NetworkDoc, id: number): string {
  const hit = doc.nodes?.find((nd) => nd.id === id);
  return hit?.label ?? String(id);
}

/** Uncertain-edge index (position among uncertain edges) per edge position. */
export function uncertainIndices(doc: NetworkDoc): Map<number, number> {
  const map = new Map<number, number>();
  let next = 0;
  doc.edges.forEach((e, position) => {
    if (e.u !== undefined) map.set(position, next++);
  });
  return map;
}

/** Uncertain edges revealed by executing `nodes`: their out-going ones. */
export function thetaEdges(doc: NetworkDoc, nodes: readonly number[]): number[] {
  const chosen = new Set(nodes);
  const out: number[] = [];
  let index = 0;
  for (const e of doc.edges) {
    if (e.u !== undefined) {
      if (chosen.has(e.src)) out.push(index);
      index++;
    }
  }
  return out;
}

export type ObservationMark = "exists" | "absent" | "unknown";

export interface ChecklistItem {
  edgeIndex: number;
  src: number;
  dst: number;
  u: number;
  mark: ObservationMark;
}

export function buildChecklist(
  doc: NetworkDoc,
  executed: readonly number[],
  previous?: ReadonlyMap<number, ObservationMark>,
): ChecklistItem[] {
  const byIndex = new Map<number, EdgeDoc>();
  let index = 0;
  for (const e of doc.edges) {
    if (e.u !== undefined) byIndex.set(index++, e);
  }
  return thetaEdges(doc, executed).map((edgeIndex) => {
    const e = byIndex.get(edgeIndex)!;
    return {
      edgeIndex,
      src: e.src,
      dst: e.dst,
      u: e.u!,
      mark: previous?.get(edgeIndex) ?? "unknown",
    };
  });
}

export interface RoundEntry {
  round: number;
  recommended: number[] | null;
  executed: number[];
  deviated: boolean;
  observations: { edge_index: number; exists: boolean }[];
}

export interface SessionView {
  sessionId: string;
  k: number;
  tHorizon: number;
  round: number;
  exhausted: boolean;
  network: NetworkDoc;
  recommendation: number[] | null;
  expectedReward: number | null;
  executed: number[];
  checklist: ChecklistItem[];
  timeline: RoundEntry[];
  influenced: Set<number>;
}

export function toggleExecuted(view: SessionView, node: number): void {
  const at = view.executed.indexOf(node);
  if (at >= 0) {
    view.executed.splice(at, 1);
  } else if (view.executed.length < view.k) {
    view.executed.push(node);
    view.executed.sort((a, b) => a - b);
  }
  const marks = new Map(view.checklist.map((c) => [c.edgeIndex, c.mark]));
  view.checklist = buildChecklist(view.network, view.executed, marks);
}

export function submitEnabled(view: SessionView): boolean {
  return !view.exhausted && view.executed.length === view.k;
}

/** Observations to post: unknown marks stay unresolved and are omitted. */
export function observationsToPost(
  view: SessionView,
): { edge_index: number; exists: boolean }[] {
  return view.checklist
    .filter((c) => c.mark !== "unknown")
    .map((c) => ({ edge_index: c.edgeIndex, exists: c.mark === "exists" }));
}
