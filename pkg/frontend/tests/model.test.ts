import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import {
  buildChecklist,
  observationsToPost,
  parseNetwork,
  SchemaError,
  thetaEdges,
  toggleExecuted,
  submitEnabled,
  uncertainIndices,
  type SessionView,
} from "../src/model.js";
import { computeLayout } from "../src/layout.js";

const demoText = readFileSync(
  join(__dirname, "..", "..", "data", "demo_network.json"),
  "utf-8",
);

describe("parseNetwork", () => {
  it("accepts the demo network", () => {
    const doc = parseNetwork(demoText);
    expect(doc.n_nodes).toBe(6);
    expect(doc.edges).toHaveLength(7);
    expect(doc.edges.filter((e) => e.u !== undefined)).toHaveLength(4);
  });

  it("rejects malformed documents with a message", () => {
    expect(() => parseNetwork("{nope")).toThrow(SchemaError);
    expect(() => parseNetwork('{"edges": []}')).toThrow(/n_nodes/);
    expect(() =>
      parseNetwork('{"n_nodes": 2, "edges": [{"src": 0, "dst": 5, "p": 0.5}]}'),
    ).toThrow(/outside/);
    expect(() =>
      parseNetwork('{"n_nodes": 2, "edges": [{"src": 0, "dst": 1, "p": 1.5}]}'),
    ).toThrow(/propagation/);
  });
});

describe("uncertain-edge bookkeeping", () => {
  const doc = parseNetwork(demoText);

  it("indexes uncertain edges by load order", () => {
    const indices = [...uncertainIndices(doc).values()];
    expect(indices).toEqual([0, 1, 2, 3]);
  });

  it("theta lists out-going uncertain edges of the executed set", () => {
    expect(thetaEdges(doc, [1, 2])).toEqual([1, 2]);
    expect(thetaEdges(doc, [3])).toEqual([]);
    expect(thetaEdges(doc, [0, 1, 2, 3, 4, 5])).toEqual([0, 1, 2, 3]);
  });

  it("checklist tracks the current executed set and keeps marks", () => {
    const checklist = buildChecklist(doc, [1, 2]);
    expect(checklist.map((c) => c.edgeIndex)).toEqual([1, 2]);
    expect(checklist.every((c) => c.mark === "unknown")).toBe(true);
    const marks = new Map([[1, "absent" as const]]);
    const again = buildChecklist(doc, [1], marks);
    expect(again).toHaveLength(1);
    expect(again[0].mark).toBe("absent");
  });
});

function freshView(): SessionView {
  const doc = parseNetwork(demoText);
  return {
    sessionId: "s",
    k: 2,
    tHorizon: 3,
    round: 1,
    exhausted: false,
    network: doc,
    recommendation: [1, 2],
    expectedReward: 1.5,
    executed: [],
    checklist: [],
    timeline: [],
    influenced: new Set(),
  };
}

describe("executed-set editing", () => {
  it("enables submission only at exactly K nodes", () => {
    const view = freshView();
    expect(submitEnabled(view)).toBe(false);
    toggleExecuted(view, 1);
    expect(submitEnabled(view)).toBe(false);
    toggleExecuted(view, 2);
    expect(submitEnabled(view)).toBe(true);
    toggleExecuted(view, 4); // over K: ignored
    expect(view.executed).toEqual([1, 2]);
    toggleExecuted(view, 1); // deselect
    expect(view.executed).toEqual([2]);
    expect(submitEnabled(view)).toBe(false);
  });

  it("recomputes the checklist when the executed set changes", () => {
    const view = freshView();
    toggleExecuted(view, 1);
    expect(view.checklist.map((c) => c.edgeIndex)).toEqual([1]);
    toggleExecuted(view, 2);
    expect(view.checklist.map((c) => c.edgeIndex)).toEqual([1, 2]);
    view.checklist[0].mark = "exists";
    toggleExecuted(view, 2); // deselect 2; mark on edge 1 survives
    expect(view.checklist.map((c) => c.edgeIndex)).toEqual([1]);
    expect(view.checklist[0].mark).toBe("exists");
  });

  it("omits unknown marks from the posted observations", () => {
    const view = freshView();
    toggleExecuted(view, 1);
    toggleExecuted(view, 2);
    view.checklist[0].mark = "absent";
    expect(observationsToPost(view)).toEqual([{ edge_index: 1, exists: false }]);
  });
});

describe("layout", () => {
  const doc = parseNetwork(demoText);

  it("is deterministic per session seed", () => {
    const a = computeLayout(doc, "session-1");
    const b = computeLayout(doc, "session-1");
    expect(a).toEqual(b);
    const c = computeLayout(doc, "session-2");
    expect(a).not.toEqual(c);
  });

  it("keeps every node inside the viewport", () => {
    const pts = computeLayout(doc, "session-1");
    expect(pts).toHaveLength(6);
    for (const p of pts) {
      expect(p.x).toBeGreaterThanOrEqual(20);
      expect(p.x).toBeLessThanOrEqual(620);
      expect(p.y).toBeGreaterThanOrEqual(20);
      expect(p.y).toBeLessThanOrEqual(400);
    }
  });
});
