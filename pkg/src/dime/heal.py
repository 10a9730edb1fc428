"""Top-layer planner and online session loop.

Two planning modes over the bottom-layer solver:

* ``heal``: partition the network into K parts once at session start;
  every round asks the solver for 1 node from each part.
* ``heal_t``: partition into T parts; round t takes all K nodes from
  part t.

A session advances through record_execution: the executed action (which
may deviate from the recommendation) and the resolved uncertain edges are
folded into the network, and the part subnetworks are refreshed under the
fixed node assignment.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from . import tasp
from .diffusion import diffuse_steps
from .network import (
    EdgeObservation,
    InstantiatedNetwork,
    UncertainNetwork,
    apply_observations,
    sample_instantiation,
)
from .partitioner import Partitioning, SubnetworkView, induced_subnetwork, partition
from .pomdp import ActionSet, HistoryRound, ObservationValue, SessionHistory, observation_edges
from .seeding import NS_EPISODE, NS_GROUND_TRUTH, NS_NETWORK_GEN, NS_PLANNING, child_rng, stable_digest
from .tasp import PlanningError, ReplayContext, TaspConfig

MODE_HEAL = "heal"
MODE_HEAL_T = "heal_t"


class SessionExhaustedError(RuntimeError):
    """All T rounds already executed."""


@dataclass(frozen=True)
class Recommendation:
    round_index: int
    action: ActionSet  # global node ids
    provenance: tuple[tuple[int, int], ...]  # (partition index, global node id)
    expected_reward: float


@dataclass
class PlanSession:
    """Mutable state of one T-round planning session."""

    network: UncertainNetwork          # reflects all recorded observations
    base_network: UncertainNetwork
    k: int
    t_horizon: int
    length: int
    mode: str
    config: TaspConfig
    master_seed: int
    partitioning: Partitioning
    subviews: list[SubnetworkView]
    history: SessionHistory
    t: int = 1
    uncertain_origin: tuple[int, ...] = ()
    chosen_round: dict[int, int] = field(default_factory=dict)  # node -> round last chosen
    recommendation_cache: dict | None = None
    _pending: Recommendation | None = None

    @property
    def exhausted(self) -> bool:
        return self.t > self.t_horizon

    def chosen_nodes(self) -> set[int]:
        return set(self.chosen_round)


def start_session(
    net: UncertainNetwork,
    k: int,
    t_horizon: int,
    length: int,
    mode: str = MODE_HEAL,
    config: TaspConfig | None = None,
    seed: int = 0,
    recommendation_cache: dict | None = None,
) -> PlanSession:
    """Partition the network and open a session at round 1."""
    if mode not in (MODE_HEAL, MODE_HEAL_T):
        raise PlanningError(f"unknown mode: {mode}")
    if k < 1 or t_horizon < 1 or length < 0:
        raise PlanningError(f"bad parameters K={k}, T={t_horizon}, L={length}")
    if k > net.n_nodes:
        raise PlanningError(f"K={k} exceeds network size {net.n_nodes}")
    n_parts = k if mode == MODE_HEAL else t_horizon
    if n_parts > net.n_nodes:
        raise PlanningError(
            f"cannot split {net.n_nodes} nodes into {n_parts} parts (mode={mode})"
        )
    config = config or TaspConfig()
    parts = partition(net, n_parts, rng=child_rng(seed, NS_NETWORK_GEN, 0))
    subviews = [induced_subnetwork(net, parts, i) for i in range(n_parts)]
    return PlanSession(
        network=net,
        base_network=net,
        k=k,
        t_horizon=t_horizon,
        length=length,
        mode=mode,
        config=config,
        master_seed=seed,
        partitioning=parts,
        subviews=subviews,
        history=SessionHistory(base_network=net),
        uncertain_origin=tuple(range(net.n_uncertain)),
        recommendation_cache=recommendation_cache,
    )


def _history_key(session: PlanSession) -> tuple:
    rounds = tuple(
        (r.executed.nodes, tuple(r.observation.observed)) for r in session.history.rounds
    )
    return (session.mode, session.master_seed, session.t, stable_digest(rounds))


def _local_replay(session: PlanSession, view: SubnetworkView) -> ReplayContext:
    local = {g: i for i, g in enumerate(view.nodes)}
    executed = tuple(
        tuple(sorted(local[v] for v in r.executed if v in local))
        for r in session.history.rounds
    )
    return ReplayContext(executed=executed, length=session.length)


def _least_recently_chosen(session: PlanSession, nodes) -> int:
    return min(nodes, key=lambda v: (session.chosen_round.get(v, -1), v))


def recommend(session: PlanSession, budget_s: float | None = None) -> Recommendation:
    """Compute (or reuse) this round's recommendation.

    Deterministic given (seed, history): the planning stream is keyed by
    the session seed, the round and a digest of the executed/observed
    history, so identical sessions always produce identical advice.
    """
    if session.exhausted:
        raise SessionExhaustedError(f"session is exhausted after {session.t_horizon} rounds")
    if session._pending is not None:
        return session._pending
    key = _history_key(session)
    if session.recommendation_cache is not None and key in session.recommendation_cache:
        session._pending = session.recommendation_cache[key]
        return session._pending

    t_remaining = session.t_horizon - session.t + 1
    chosen = session.chosen_nodes()
    provenance: list[tuple[int, int]] = []
    expected = 0.0

    if session.mode == MODE_HEAL:
        nodes: list[int] = []
        for i, view in enumerate(session.subviews):
            unchosen = [
                local for local, g in enumerate(view.nodes) if g not in chosen
            ]
            if not unchosen:
                g = _least_recently_chosen(session, view.nodes)
                provenance.append((i, g))
                nodes.append(g)
                continue
            rng = child_rng(session.master_seed, NS_PLANNING, session.t, key[-1], i)
            result = tasp.solve_with_value(
                view.network, 1, t_remaining, session.length, session.config, rng,
                history=_local_replay(session, view), allowed=unchosen,
                budget_s=budget_s,
            )
            g = view.nodes[result.action.nodes[0]]
            provenance.append((i, g))
            nodes.append(g)
            expected += result.expected_reward
        action = ActionSet(nodes)
    else:
        view = session.subviews[session.t - 1]
        if len(view.nodes) < session.k:
            raise PlanningError(
                f"partition {session.t - 1} has {len(view.nodes)} nodes < K={session.k}"
            )
        unchosen = [local for local, g in enumerate(view.nodes) if g not in chosen]
        allowed = list(unchosen)
        while len(allowed) < session.k:  # top up from least recently chosen
            pool = [
                local for local, g in enumerate(view.nodes) if local not in allowed
            ]
            pick = min(
                pool,
                key=lambda local: (session.chosen_round.get(view.nodes[local], -1), local),
            )
            allowed.append(pick)
        rng = child_rng(session.master_seed, NS_PLANNING, session.t, key[-1], 0)
        result = tasp.solve_with_value(
            view.network, session.k, t_remaining, session.length, session.config, rng,
            history=_local_replay(session, view), allowed=sorted(allowed),
            budget_s=budget_s,
        )
        globals_ = [view.nodes[local] for local in result.action]
        provenance = [(session.t - 1, g) for g in sorted(globals_)]
        action = ActionSet(globals_)
        expected = result.expected_reward

    rec = Recommendation(
        round_index=session.t,
        action=action,
        provenance=tuple(provenance),
        expected_reward=expected,
    )
    session._pending = rec
    if session.recommendation_cache is not None:
        session.recommendation_cache[key] = rec
    return rec


def record_execution(
    session: PlanSession,
    executed: ActionSet,
    observations: list[EdgeObservation],
) -> PlanSession:
    """Advance the session: log the round, fold observations in, re-index.

    ``executed`` may deviate from the recommendation; all later planning
    replays the executed reality.  Observation indices outside the
    executed action's 1-hop uncertain edges are accepted with a warning
    (information is information), invalid indices raise.
    """
    if session.exhausted:
        raise SessionExhaustedError(f"session is exhausted after {session.t_horizon} rounds")
    executed.validate(session.k, session.network.n_nodes)
    expected_idx = set(observation_edges(executed, session.network))
    got_idx = {o.uncertain_edge_index for o in observations}
    if got_idx != expected_idx:
        logging.getLogger(__name__).warning(
            "round %d: observed edges %s differ from the executed action's "
            "out-going uncertain edges %s",
            session.t, sorted(got_idx), sorted(expected_idx),
        )
    update = apply_observations(session.network, observations)
    observed = tuple(
        sorted((o.uncertain_edge_index, o.exists) for o in observations)
    )
    recommended = session._pending.action if session._pending is not None else None
    session.history.rounds.append(
        HistoryRound(
            recommended=recommended,
            executed=executed,
            observation=ObservationValue(observed=observed),
            index_map=update.index_map,
        )
    )
    origin = session.uncertain_origin
    session.uncertain_origin = tuple(
        origin[old] for old in sorted(update.index_map, key=update.index_map.get)
    )
    for v in executed:
        session.chosen_round[v] = session.t
    session.network = update.network
    session.subviews = [
        induced_subnetwork(update.network, session.partitioning, i)
        for i in range(session.partitioning.k)
    ]
    session.t += 1
    session._pending = None
    return session


# -- closed-loop policy evaluation ---------------------------------------


@dataclass(frozen=True)
class RoundLog:
    round_index: int
    recommended: tuple[int, ...]
    executed: tuple[int, ...]
    observed: tuple[tuple[int, bool], ...]  # base-network uncertain indices
    cumulative_influenced: int


@dataclass(frozen=True)
class EpisodeResult:
    final_influenced: int
    indirect_influence: int
    rounds: tuple[RoundLog, ...]


def episode_log_csv(result: EpisodeResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "recommended", "executed", "observed_edges", "cumulative_influenced"])
    for r in result.rounds:
        writer.writerow([
            r.round_index,
            " ".join(map(str, r.recommended)),
            " ".join(map(str, r.executed)),
            " ".join(f"{i}:{int(x)}" for i, x in r.observed),
            r.cumulative_influenced,
        ])
    return buf.getvalue()


def run_policy(
    net: UncertainNetwork,
    k: int,
    t_horizon: int,
    length: int,
    mode: str = MODE_HEAL,
    config: TaspConfig | None = None,
    seed: int = 0,
    ground_truth: InstantiatedNetwork | None = None,
    deviations: int = 0,
    recommendation_cache: dict | None = None,
    episode_index: int = 0,
) -> EpisodeResult:
    """One closed-loop episode: recommend, execute, observe, diffuse, repeat.

    The ground truth (a determinization of ``net``) drives observations and
    the between-round cascade.  ``deviations`` rounds, drawn at random,
    execute a uniformly random action instead of the recommendation.
    """
    gt = ground_truth or sample_instantiation(
        net, child_rng(seed, NS_GROUND_TRUTH, episode_index)
    )
    episode_rng = child_rng(seed, NS_EPISODE, episode_index)
    session = start_session(
        net, k, t_horizon, length, mode=mode, config=config, seed=seed,
        recommendation_cache=recommendation_cache,
    )
    deviate_rounds: set[int] = set()
    if deviations:
        deviate_rounds = {
            int(r) + 1
            for r in episode_rng.choice(t_horizon, size=min(deviations, t_horizon), replace=False)
        }

    w = np.zeros(net.n_nodes, dtype=bool)
    logs: list[RoundLog] = []
    for t in range(1, t_horizon + 1):
        rec = recommend(session)
        if t in deviate_rounds:
            executed = ActionSet(
                episode_rng.choice(net.n_nodes, size=k, replace=False).tolist()
            )
        else:
            executed = rec.action
        theta = observation_edges(executed, session.network)
        origin = session.uncertain_origin
        observations = [
            EdgeObservation(i, bool((gt.kept >> origin[i]) & 1)) for i in theta
        ]
        observed_base = tuple((origin[i], bool((gt.kept >> origin[i]) & 1)) for i in theta)
        record_execution(session, executed, observations)

        for v in executed:
            w[v] = True
        w = diffuse_steps(gt, w, length, episode_rng)
        logs.append(
            RoundLog(
                round_index=t,
                recommended=rec.action.nodes,
                executed=executed.nodes,
                observed=observed_base,
                cumulative_influenced=int(w.sum()),
            )
        )
    final = int(w.sum())
    return EpisodeResult(
        final_influenced=final,
        indirect_influence=final - k * t_horizon,
        rounds=tuple(logs),
    )
