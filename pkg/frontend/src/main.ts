// Console app: load a network, run the per-round recommend/execute loop
// against the planning service, and keep the picture in sync with the
// server's view of the session.

import { ApiClient, ApiError, type ExecutionResult } from "./api.js";
import {
  buildChecklist,
  observationsToPost,
  parseNetwork,
  SchemaError,
  type NetworkDoc,
  type ObservationMark,
  type SessionView,
  submitEnabled,
  toggleExecuted,
} from "./model.js";
import { computeLayout, type Point } from "./layout.js";
import { renderChecklist, renderGraph, renderTimeline } from "./render.js";

export interface ConsoleApp {
  readonly view: SessionView | null;
  loadNetworkText(text: string): NetworkDoc | null;
  createSession(k: number, t: number, l: number, mode?: "heal" | "heal_t"): Promise<void>;
  acceptRecommendation(): void;
  toggleNode(node: number): void;
  setMark(edgeIndex: number, mark: ObservationMark): void;
  submitRound(): Promise<ExecutionResult | null>;
  refresh(): Promise<void>;
  root: HTMLElement;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className?: string, id?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (id) node.id = id;
  return node;
}

export function mountConsole(root: HTMLElement, apiBase: string): ConsoleApp {
  const api = new ApiClient(apiBase);

  root.innerHTML = `
    <section id="setup-panel">
      <h1>Intervention planning console</h1>
      <textarea id="network-input" rows="8" placeholder="paste network JSON"></textarea>
      <input type="file" id="network-file" accept="application/json">
      <label>K <input id="param-k" type="number" value="2" min="1"></label>
      <label>T <input id="param-t" type="number" value="3" min="1"></label>
      <label>L <input id="param-l" type="number" value="1" min="0"></label>
      <label>mode
        <select id="param-mode">
          <option value="heal" selected>heal (K partitions)</option>
          <option value="heal_t">heal_t (T partitions)</option>
        </select>
      </label>
      <button id="create-session">Start session</button>
      <p id="setup-error" class="error" hidden></p>
    </section>
    <section id="session-panel" hidden>
      <h2 id="round-label"></h2>
      <svg id="graph" width="640" height="420" viewBox="0 0 640 420"></svg>
      <div id="recommendation-box">
        <span id="recommendation-text"></span>
        <button id="accept-recommendation">Accept recommendation</button>
      </div>
      <p>Attendees (click nodes to edit): <span id="executed-text"></span></p>
      <h3>Resolved friendships of the attendees</h3>
      <div id="checklist"></div>
      <button id="submit-round" disabled>Record round</button>
      <p id="session-error" class="error" hidden></p>
      <h3>Rounds so far</h3>
      <ul id="timeline"></ul>
      <p id="summary" hidden></p>
    </section>
  `;

  const byId = <T extends HTMLElement>(id: string) =>
    root.querySelector(`#${id}`) as T;
  const setupError = byId<HTMLParagraphElement>("setup-error");
  const sessionError = byId<HTMLParagraphElement>("session-error");
  const graph = root.querySelector("#graph") as SVGSVGElement;

  let networkDoc: NetworkDoc | null = null;
  let view: SessionView | null = null;
  let layout: Point[] = [];

  function showError(target: HTMLParagraphElement, message: string | null): void {
    target.hidden = message === null;
    target.textContent = message ?? "";
  }

  function influencedNodes(): Set<number> {
    const out = new Set<number>();
    if (view) {
      for (const entry of view.timeline) {
        for (const v of entry.executed) out.add(v);
      }
    }
    return out;
  }

  function redraw(): void {
    if (!view) return;
    byId<HTMLHeadingElement>("round-label").textContent =
      view.exhausted
        ? `Session complete (${view.tHorizon} rounds)`
        : `Round ${view.round} of ${view.tHorizon}`;
    view.influenced = influencedNodes();
    renderGraph(graph, view.network, layout, view, { onNodeClick: app.toggleNode });
    byId<HTMLSpanElement>("recommendation-text").textContent = view.recommendation
      ? `Recommended: [${view.recommendation.join(", ")}]` +
        (view.expectedReward !== null
          ? ` (expected reward ${view.expectedReward.toFixed(2)})`
          : "")
      : "";
    byId<HTMLSpanElement>("executed-text").textContent =
      `[${view.executed.join(", ")}] (need ${view.k})`;
    renderChecklist(byId("checklist"), view.network, view.checklist, app.setMark);
    renderTimeline(byId("timeline"), view.timeline);
    byId<HTMLButtonElement>("submit-round").disabled = !submitEnabled(view);
    const summary = byId<HTMLParagraphElement>("summary");
    summary.hidden = !view.exhausted;
    if (view.exhausted) {
      summary.textContent =
        `All ${view.tHorizon} rounds recorded; ` +
        `${influencedNodes().size} participants are certainly influenced.`;
    }
  }

  const app: ConsoleApp = {
    get view() {
      return view;
    },
    root,

    loadNetworkText(text: string): NetworkDoc | null {
      try {
        networkDoc = parseNetwork(text);
        showError(setupError, null);
        return networkDoc;
      } catch (err) {
        networkDoc = null;
        showError(setupError, (err as SchemaError).message);
        return null;
      }
    },

    async createSession(k, t, l, mode = "heal") {
      if (!networkDoc) {
        showError(setupError, "load a network file first");
        return;
      }
      try {
        const created = await api.createSession({
          network: networkDoc, K: k, T: t, L: l, mode,
        });
        view = {
          sessionId: created.session_id,
          k, tHorizon: t,
          round: created.round,
          exhausted: false,
          network: networkDoc,
          recommendation: null,
          expectedReward: null,
          executed: [],
          checklist: [],
          timeline: [],
          influenced: new Set(),
        };
        layout = computeLayout(networkDoc, created.session_id);
        byId<HTMLElement>("setup-panel").hidden = true;
        byId<HTMLElement>("session-panel").hidden = false;
        await fetchRecommendation();
        redraw();
      } catch (err) {
        showError(setupError, err instanceof ApiError ? err.message : String(err));
      }
    },

    acceptRecommendation() {
      if (!view || !view.recommendation) return;
      view.executed = [...view.recommendation];
      view.checklist = buildChecklist(view.network, view.executed);
      redraw();
    },

    toggleNode(node: number) {
      if (!view || view.exhausted) return;
      toggleExecuted(view, node);
      redraw();
    },

    setMark(edgeIndex: number, mark: ObservationMark) {
      if (!view) return;
      const item = view.checklist.find((c) => c.edgeIndex === edgeIndex);
      if (item) item.mark = mark;
      redraw();
    },

    async submitRound(): Promise<ExecutionResult | null> {
      if (!view || !submitEnabled(view)) return null;
      try {
        const result = await api.execute(view.sessionId, {
          executed: [...view.executed],
          observations: observationsToPost(view),
          round: view.round,
        });
        showError(sessionError, null);
        await app.refresh();
        return result;
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          await app.refresh();
          return null;
        }
        showError(sessionError, err instanceof ApiError ? err.message : String(err));
        return null;
      }
    },

    async refresh() {
      if (!view) return;
      const snap = await api.snapshot(view.sessionId);
      view.network = snap.network;
      view.round = snap.round;
      view.exhausted = snap.exhausted;
      view.timeline = snap.history.map((h) => ({
        round: h.round,
        recommended: h.recommended,
        executed: h.executed,
        deviated: h.deviated,
        observations: h.observations,
      }));
      view.executed = [];
      view.checklist = [];
      view.recommendation = null;
      view.expectedReward = null;
      if (!view.exhausted) {
        await fetchRecommendation();
      }
      redraw();
    },
  };

  async function fetchRecommendation(): Promise<void> {
    if (!view) return;
    try {
      const rec = await api.recommendation(view.sessionId);
      view.recommendation = rec.action;
      view.expectedReward = rec.expected_reward;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        view.exhausted = true;
        return;
      }
      throw err;
    }
  }

  byId<HTMLTextAreaElement>("network-input").addEventListener("change", (ev) => {
    app.loadNetworkText((ev.target as HTMLTextAreaElement).value);
  });
  byId<HTMLInputElement>("network-file").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) app.loadNetworkText(await file.text());
  });
  byId<HTMLButtonElement>("create-session").addEventListener("click", () => {
    const k = Number(byId<HTMLInputElement>("param-k").value);
    const t = Number(byId<HTMLInputElement>("param-t").value);
    const l = Number(byId<HTMLInputElement>("param-l").value);
    const mode = byId<HTMLSelectElement>("param-mode").value as "heal" | "heal_t";
    void app.createSession(k, t, l, mode);
  });
  byId<HTMLButtonElement>("accept-recommendation").addEventListener("click", () =>
    app.acceptRecommendation(),
  );
  byId<HTMLButtonElement>("submit-round").addEventListener("click", () =>
    void app.submitRound(),
  );

  return app;
}
