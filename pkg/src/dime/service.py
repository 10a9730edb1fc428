"""JSON-over-HTTP session service wrapping the planning loop.

One resource per planning session.  Sessions are journaled to append-only
JSONL files under the data directory, so a restarted service can replay
any session from disk.  Within a session, executions serialize through a
lock and recommendations are computed once per round; concurrent posts
for the same round get a 409.
"""
from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import heal
from .network import EdgeObservation, NetworkError, load_network, network_document
from .pomdp import ActionSet
from .tasp import PlanningError, TaspConfig


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


@dataclass
class SessionRuntime:
    session: heal.PlanSession
    journal_path: Path
    created_at: str
    updated_at: str
    lock: threading.Lock = field(default_factory=threading.Lock)


def _config_doc(config: TaspConfig) -> dict:
    return {
        "delta": config.delta,
        "nsim": config.nsim,
        "ucb_c": config.ucb_c,
        "aggregation": config.aggregation,
    }


def _parse_config(doc: dict | None) -> TaspConfig:
    doc = doc or {}
    return TaspConfig(
        delta=int(doc.get("delta", 20)),
        nsim=int(doc.get("nsim", 1024)),
        ucb_c=float(doc.get("ucb_c", 1.414)),
        aggregation=str(doc.get("aggregation", "sample_mean")),
    )


def _recommendation_doc(rec: heal.Recommendation) -> dict:
    return {
        "round": rec.round_index,
        "action": list(rec.action.nodes),
        "provenance": [{"partition": p, "node": v} for p, v in rec.provenance],
        "expected_reward": rec.expected_reward,
    }


def _snapshot_doc(runtime: SessionRuntime, session_id: str) -> dict:
    s = runtime.session
    return {
        "session_id": session_id,
        "round": s.t,
        "exhausted": s.exhausted,
        "params": {"K": s.k, "T": s.t_horizon, "L": s.length, "mode": s.mode},
        "seed": s.master_seed,
        "config": _config_doc(s.config),
        "network": network_document(s.network),
        "uncertain_origin": list(s.uncertain_origin),
        "history": [
            {
                "round": i + 1,
                "recommended": list(r.recommended.nodes) if r.recommended else None,
                "executed": list(r.executed.nodes),
                "observations": [
                    {"edge_index": idx, "exists": exists} for idx, exists in r.observation.observed
                ],
                "index_map": {str(old): new for old, new in sorted(r.index_map.items())},
                "deviated": r.deviated,
            }
            for i, r in enumerate(s.history.rounds)
        ],
        "created_at": runtime.created_at,
        "updated_at": runtime.updated_at,
    }


class SessionStore:
    """In-memory registry backed by append-only journals."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionRuntime] = {}
        self._registry_lock = threading.Lock()

    def create(self, doc: dict) -> tuple[str, SessionRuntime]:
        net = load_network(doc["network"])
        config = _parse_config(doc.get("config"))
        seed = int(doc.get("seed", 0))
        mode = str(doc.get("mode", heal.MODE_HEAL))
        session = heal.start_session(
            net,
            k=int(doc["K"]),
            t_horizon=int(doc["T"]),
            length=int(doc["L"]),
            mode=mode,
            config=config,
            seed=seed,
        )
        session_id = uuid.uuid4().hex
        now = _now()
        runtime = SessionRuntime(
            session=session,
            journal_path=self.data_dir / f"{session_id}.jsonl",
            created_at=now,
            updated_at=now,
        )
        record = {
            "type": "create",
            "session_id": session_id,
            "network": doc["network"],
            "K": session.k,
            "T": session.t_horizon,
            "L": session.length,
            "mode": mode,
            "seed": seed,
            "config": _config_doc(config),
            "at": now,
        }
        with open(runtime.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")
        with self._registry_lock:
            self._sessions[session_id] = runtime
        return session_id, runtime

    def get(self, session_id: str) -> SessionRuntime | None:
        with self._registry_lock:
            runtime = self._sessions.get(session_id)
        if runtime is not None:
            return runtime
        return self._restore(session_id)

    def _restore(self, session_id: str) -> SessionRuntime | None:
        if not session_id.isalnum():
            return None
        path = self.data_dir / f"{session_id}.jsonl"
        if not path.exists():
            return None
        records = [
            json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line
        ]
        if not records or records[0].get("type") != "create":
            return None
        head = records[0]
        session = heal.start_session(
            load_network(head["network"]),
            k=head["K"], t_horizon=head["T"], length=head["L"],
            mode=head["mode"], config=_parse_config(head.get("config")),
            seed=head["seed"],
        )
        updated = head["at"]
        for record in records[1:]:
            if record.get("type") != "execution":
                continue
            rec_doc = record.get("recommendation")
            if rec_doc is not None:
                session._pending = heal.Recommendation(
                    round_index=rec_doc["round"],
                    action=ActionSet(rec_doc["action"]),
                    provenance=tuple(
                        (entry["partition"], entry["node"]) for entry in rec_doc["provenance"]
                    ),
                    expected_reward=rec_doc["expected_reward"],
                )
            heal.record_execution(
                session,
                ActionSet(record["executed"]),
                [
                    EdgeObservation(o["edge_index"], o["exists"])
                    for o in record["observations"]
                ],
            )
            updated = record["at"]
        runtime = SessionRuntime(
            session=session, journal_path=path,
            created_at=head["at"], updated_at=updated,
        )
        with self._registry_lock:
            self._sessions.setdefault(session_id, runtime)
            return self._sessions[session_id]

    def journal_execution(self, runtime: SessionRuntime, record: dict) -> None:
        with open(runtime.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")


def create_app(
    data_dir: Path | str = "./sessions",
    budget_ms: int = 10000,
    static_dir: Path | str | None = None,
) -> FastAPI:
    """Build the service app; ``static_dir`` optionally serves the console."""
    store = SessionStore(Path(data_dir))
    budget_s = budget_ms / 1000.0
    app = FastAPI(title="dime session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/sessions")
    async def create_session(request: Request):
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            return _error(400, "bad_json", f"request body is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            return _error(400, "bad_request", "body must be a JSON object")
        for key in ("network", "K", "T", "L"):
            if key not in doc:
                return _error(400, "missing_field", f"missing required field: {key}")
        try:
            session_id, runtime = store.create(doc)
        except (NetworkError, ValueError) as exc:
            if isinstance(exc, PlanningError):
                return _error(422, "unprocessable", str(exc))
            return _error(400, "invalid", str(exc))
        return JSONResponse(
            status_code=201,
            content={"session_id": session_id, "round": runtime.session.t},
        )

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        runtime = store.get(session_id)
        if runtime is None:
            return _error(404, "not_found", f"unknown session: {session_id}")
        with runtime.lock:
            return JSONResponse(_snapshot_doc(runtime, session_id))

    @app.get("/sessions/{session_id}/recommendation")
    def get_recommendation(session_id: str):
        runtime = store.get(session_id)
        if runtime is None:
            return _error(404, "not_found", f"unknown session: {session_id}")
        with runtime.lock:
            if runtime.session.exhausted:
                return _error(409, "exhausted", "session has used all its rounds")
            rec = heal.recommend(runtime.session, budget_s=budget_s)
            return JSONResponse(_recommendation_doc(rec))

    @app.post("/sessions/{session_id}/execution")
    async def post_execution(session_id: str, request: Request):
        runtime = store.get(session_id)
        if runtime is None:
            return _error(404, "not_found", f"unknown session: {session_id}")
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            return _error(400, "bad_json", f"request body is not valid JSON: {exc}")
        if not isinstance(doc.get("executed"), list):
            return _error(400, "bad_request", "executed must be a list of node ids")
        observations_doc = doc.get("observations", [])
        with runtime.lock:
            session = runtime.session
            if session.exhausted:
                return _error(409, "exhausted", "session has used all its rounds")
            if "round" in doc and int(doc["round"]) != session.t:
                return _error(
                    409, "conflict",
                    f"execution targets round {doc['round']} but the session is at {session.t}",
                )
            pending = session._pending
            try:
                executed = ActionSet(doc["executed"])
                observations = [
                    EdgeObservation(int(o["edge_index"]), bool(o["exists"]))
                    for o in observations_doc
                ]
                heal.record_execution(session, executed, observations)
            except (NetworkError, ValueError, KeyError, TypeError) as exc:
                return _error(400, "invalid", str(exc))
            now = _now()
            runtime.updated_at = now
            store.journal_execution(
                runtime,
                {
                    "type": "execution",
                    "executed": list(executed.nodes),
                    "observations": [
                        {"edge_index": o.uncertain_edge_index, "exists": o.exists}
                        for o in observations
                    ],
                    "recommendation": _recommendation_doc(pending) if pending else None,
                    "at": now,
                },
            )
            return JSONResponse(
                {
                    "round": session.t,
                    "exhausted": session.exhausted,
                    "updated_uncertain_edge_count": session.network.n_uncertain,
                    "deviated": session.history.rounds[-1].deviated,
                }
            )

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/app", StaticFiles(directory=str(static_dir), html=True), name="console")
    return app
