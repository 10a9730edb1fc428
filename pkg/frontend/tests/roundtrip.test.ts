// End-to-end console flows against a live planning service.

import { beforeEach, describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { mountConsole, type ConsoleApp } from "../src/main.js";
import { thetaEdges } from "../src/model.js";

const BASE = `http://127.0.0.1:${process.env.DIME_TEST_PORT ?? 8977}`;
const demoText = readFileSync(
  join(__dirname, "..", "..", "data", "demo_network.json"),
  "utf-8",
);

function q<T extends Element>(app: ConsoleApp, selector: string): T {
  const found = app.root.querySelector(selector);
  if (!found) throw new Error(`missing element: ${selector}`);
  return found as T;
}

async function startSession(k = 2, t = 3, l = 1): Promise<ConsoleApp> {
  document.body.innerHTML = "";
  const root = document.createElement("div");
  document.body.appendChild(root);
  const app = mountConsole(root, BASE);
  expect(app.loadNetworkText(demoText)).not.toBeNull();
  await app.createSession(k, t, l, "heal");
  expect(app.view).not.toBeNull();
  return app;
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("console round-trip", () => {
  it("renders the demo network with dashed uncertain edges", async () => {
    const app = await startSession();
    const nodes = app.root.querySelectorAll("circle.node");
    expect(nodes).toHaveLength(6);
    const dashed = app.root.querySelectorAll("line.edge.uncertain");
    expect(dashed).toHaveLength(4);
    const solid = app.root.querySelectorAll("line.edge.certain");
    expect(solid).toHaveLength(3);
    const labels = [...app.root.querySelectorAll("text.edge-u-label")];
    expect(labels.map((l) => l.textContent)).toContain("u=0.6");
  });

  it("accepts the recommendation, records an absent edge, advances rounds", async () => {
    const app = await startSession();
    const view = app.view!;
    const rec = view.recommendation!;
    expect(rec).toHaveLength(2);
    // recommended nodes are highlighted in the graph
    for (const v of rec) {
      expect(
        q(app, `circle.node.recommended[data-node="${v}"]`),
      ).toBeTruthy();
    }

    q<HTMLButtonElement>(app, "#accept-recommendation").dispatchEvent(
      new Event("click"),
    );
    expect(app.view!.executed).toEqual([...rec].sort((a, b) => a - b));
    // checklist exactly tracks the executed set's uncertain out-edges
    const expectTheta = thetaEdges(app.view!.network, app.view!.executed);
    const rows = [...app.root.querySelectorAll(".checklist-row")];
    expect(rows.map((r) => Number((r as HTMLElement).dataset.edgeIndex))).toEqual(
      expectTheta,
    );
    expect(expectTheta.length).toBeGreaterThan(0);

    // mark the first revealed edge as absent
    const target = app.view!.checklist[0];
    app.setMark(target.edgeIndex, "absent");
    const removedPair = { src: target.src, dst: target.dst };

    const submit = q<HTMLButtonElement>(app, "#submit-round");
    expect(submit.disabled).toBe(false);
    const result = await app.submitRound();
    expect(result?.round).toBe(2);

    // the absent edge is gone from the rendered graph
    const survivors = [...app.root.querySelectorAll("line.edge")].map((l) => ({
      src: Number((l as SVGElement).getAttribute("data-src")),
      dst: Number((l as SVGElement).getAttribute("data-dst")),
    }));
    expect(survivors).not.toContainEqual(removedPair);
    expect(app.root.querySelectorAll("line.edge")).toHaveLength(6);

    // round advanced and the round-2 recommendation matches the service
    expect(q(app, "#round-label").textContent).toContain("Round 2");
    const serverRec = await (
      await fetch(`${BASE}/sessions/${view.sessionId}/recommendation`)
    ).json();
    expect(app.view!.recommendation).toEqual(serverRec.action);
    expect(q(app, "#recommendation-text").textContent).toContain(
      `[${serverRec.action.join(", ")}]`,
    );

    // executed nodes are re-colored as influenced
    for (const v of rec) {
      expect(q(app, `circle.node.influenced[data-node="${v}"]`)).toBeTruthy();
    }
    expect(app.root.querySelectorAll("#timeline .timeline-row")).toHaveLength(1);
  });

  it("flags a deviation and recomputes the checklist before submission", async () => {
    const app = await startSession();
    const view = app.view!;
    const rec = [...view.recommendation!];
    app.acceptRecommendation();

    // swap one recommended node for a different one
    const replacement = [0, 1, 2, 3, 4, 5].find((v) => !rec.includes(v))!;
    app.toggleNode(rec[0]);
    app.toggleNode(replacement);
    const executed = [...app.view!.executed];
    expect(executed).toHaveLength(2);
    expect(executed).not.toEqual([...rec].sort((a, b) => a - b));

    // checklist recomputed to the *executed* set before submit
    const rows = [...app.root.querySelectorAll(".checklist-row")];
    expect(rows.map((r) => Number((r as HTMLElement).dataset.edgeIndex))).toEqual(
      thetaEdges(app.view!.network, executed),
    );

    const result = await app.submitRound();
    expect(result?.deviated).toBe(true);

    const snapshot = await (
      await fetch(`${BASE}/sessions/${view.sessionId}`)
    ).json();
    expect(snapshot.history).toHaveLength(1);
    expect(snapshot.history[0].deviated).toBe(true);
    expect(snapshot.history[0].executed).toEqual(executed);
    // timeline mirrors server history after refresh
    expect(app.root.querySelectorAll("#timeline .timeline-row")).toHaveLength(1);
    expect(q(app, "#timeline .timeline-row").textContent).toContain("deviation");
  });

  it("shows the summary view once the session is exhausted", async () => {
    const app = await startSession(2, 1, 1);
    app.acceptRecommendation();
    await app.submitRound();
    expect(app.view!.exhausted).toBe(true);
    expect(q(app, "#round-label").textContent).toContain("complete");
    const summary = q<HTMLParagraphElement>(app, "#summary");
    expect(summary.hidden).toBe(false);
    expect(summary.textContent).toContain("2 participants");
  });

  it("surfaces server validation errors inline", async () => {
    document.body.innerHTML = "";
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = mountConsole(root, BASE);
    expect(app.loadNetworkText("{broken")).toBeNull();
    const error = q<HTMLParagraphElement>(app, "#setup-error");
    expect(error.hidden).toBe(false);

    expect(app.loadNetworkText(demoText)).not.toBeNull();
    expect(error.hidden).toBe(true);
    await app.createSession(7, 3, 1); // K > N -> 422 surfaced inline
    expect(app.view).toBeNull();
    expect(error.hidden).toBe(false);
    expect(error.textContent).toMatch(/K=7/);
  });
});
