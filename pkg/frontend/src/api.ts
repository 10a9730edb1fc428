// Typed client for the planning-session HTTP API.

import type { NetworkDoc } from "./model.js";

export interface CreateSessionBody {
  network: NetworkDoc;
  K: number;
  T: number;
  L: number;
  mode?: "heal" | "heal_t";
  seed?: number;
  config?: { delta?: number; nsim?: number; ucb_c?: number; aggregation?: string };
}

export interface RecommendationBody {
  round: number;
  action: number[];
  provenance: { partition: number; node: number }[];
  expected_reward: number;
}

export interface ExecutionBody {
  executed: number[];
  observations: { edge_index: number; exists: boolean }[];
  round?: number;
}

export interface ExecutionResult {
  round: number;
  exhausted: boolean;
  updated_uncertain_edge_count: number;
  deviated: boolean;
}

export interface SnapshotBody {
  session_id: string;
  round: number;
  exhausted: boolean;
  params: { K: number; T: number; L: number; mode: string };
  network: NetworkDoc;
  history: {
    round: number;
    recommended: number[] | null;
    executed: number[];
    observations: { edge_index: number; exists: boolean }[];
    deviated: boolean;
  }[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function unwrap<T>(resp: Response): Promise<T> {
  if (resp.ok) {
    return (await resp.json()) as T;
  }
  let code = "error";
  let message = resp.statusText;
  try {
    const body = await resp.json();
    code = body.code ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiError(resp.status, code, message);
}

export class ApiClient {
  constructor(private base: string) {}

  async createSession(body: CreateSessionBody): Promise<{ session_id: string; round: number }> {
    return unwrap(await fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }));
  }

  async recommendation(sessionId: string): Promise<RecommendationBody> {
    return unwrap(await fetch(`${this.base}/sessions/${sessionId}/recommendation`));
  }

  async execute(sessionId: string, body: ExecutionBody): Promise<ExecutionResult> {
    return unwrap(await fetch(`${this.base}/sessions/${sessionId}/execution`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }));
  }

  async snapshot(sessionId: string): Promise<SnapshotBody> {
    return unwrap(await fetch(`${this.base}/sessions/${sessionId}`));
  }
}
