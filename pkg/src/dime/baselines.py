"""Comparison strategies sharing the planner's session interface.

Every strategy consumes the same per-round loop: choose K nodes, learn
the resolved uncertain edges out of the executed action, repeat.  The
greedy baseline runs lazy-evaluation marginal-gain selection on the
certainty-equivalent network (uncertain edges collapsed to certain ones
with p' = p * u), re-planned each round on the observation-updated
network and excluding already chosen nodes.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import heal as heal_mod
from .diffusion import diffuse_batch_inplace, diffuse_steps
from .heal import EpisodeResult, RoundLog
from .network import (
    EdgeObservation,
    InstantiatedNetwork,
    UncertainNetwork,
    apply_observations,
    certainty_equivalent,
)
from .pomdp import ActionSet, observation_edges
from .seeding import NS_STRATEGY, child_rng
from .tasp import TaspConfig

STRATEGY_IDS = ("heal", "heal_t", "greedy", "degree", "random")

DEFAULT_GREEDY_BUDGET = 1000


class Strategy(Protocol):
    """Per-round chooser over the shared observation/deviation interface."""

    def choose(self) -> ActionSet: ...

    def notify(self, executed: ActionSet, observations: list[EdgeObservation]) -> None: ...


def greedy_select(
    certain_net: UncertainNetwork,
    k: int,
    t_remaining: int,
    length: int,
    already_chosen: set[int],
    mc_budget: int,
    rng: np.random.Generator,
    horizon_steps: int | None = None,
) -> ActionSet:
    """Iterative marginal-gain selection with a lazy re-evaluation queue.

    Spread of a candidate set is the Monte-Carlo mean influenced count
    after ``horizon_steps`` cascade steps (default: the whole remaining
    campaign, t_remaining * length), seeded by the candidate set plus
    everything already chosen in past rounds.
    """
    if certain_net.n_uncertain:
        raise ValueError("greedy_select needs a certainty-equivalent network")
    n = certain_net.n_nodes
    candidates = [v for v in range(n) if v not in already_chosen]
    if k > len(candidates):
        raise ValueError(f"K={k} exceeds {len(candidates)} unchosen nodes")
    inst = InstantiatedNetwork(certain_net, kept=0)
    horizon = horizon_steps if horizon_steps is not None else t_remaining * length

    def spread(seed_nodes: list[int]) -> float:
        if not seed_nodes:
            return 0.0
        w = np.zeros((mc_budget, n), dtype=bool)
        w[:, seed_nodes] = True
        diffuse_batch_inplace(inst, w, horizon, rng)
        return float(w.sum(axis=1).mean())

    base_nodes = sorted(already_chosen)
    chosen: list[int] = []
    base_value = spread(base_nodes)
    # (negated stale upper bound, node, round-it-was-scored)
    queue = [(-(float("inf")), v, -1) for v in candidates]
    heapq.heapify(queue)
    for step in range(k):
        while True:
            neg_gain, v, scored = heapq.heappop(queue)
            if scored == step:
                chosen.append(v)
                base_value += -neg_gain
                break
            gain = spread(base_nodes + chosen + [v]) - base_value
            heapq.heappush(queue, (-gain, v, step))
    return ActionSet(chosen)


def degree_select(net: UncertainNetwork, k: int, already_chosen: set[int]) -> ActionSet:
    """Top-K unchosen nodes by out-degree, ties broken by lowest id."""
    candidates = [v for v in range(net.n_nodes) if v not in already_chosen]
    if k > len(candidates):
        raise ValueError(f"K={k} exceeds {len(candidates)} unchosen nodes")
    deg = net.out_degree
    ranked = sorted(candidates, key=lambda v: (-deg[v], v))
    return ActionSet(ranked[:k])


def random_select(net: UncertainNetwork, k: int, rng: np.random.Generator) -> ActionSet:
    """Uniform K-subset of all nodes."""
    if k > net.n_nodes:
        raise ValueError(f"K={k} exceeds network size {net.n_nodes}")
    return ActionSet(rng.choice(net.n_nodes, size=k, replace=False).tolist())


# -- stateful per-episode strategy objects --------------------------------


@dataclass
class HealStrategy:
    session: heal_mod.PlanSession

    def choose(self) -> ActionSet:
        return heal_mod.recommend(self.session).action

    def notify(self, executed: ActionSet, observations: list[EdgeObservation]) -> None:
        heal_mod.record_execution(self.session, executed, observations)


@dataclass
class GreedyStrategy:
    network: UncertainNetwork
    k: int
    t_horizon: int
    length: int
    mc_budget: int
    rng: np.random.Generator
    t: int = 1
    chosen: set[int] = field(default_factory=set)

    def choose(self) -> ActionSet:
        t_remaining = self.t_horizon - self.t + 1
        pool = self.network.n_nodes - len(self.chosen)
        chosen = self.chosen if pool >= self.k else set()
        return greedy_select(
            certainty_equivalent(self.network), self.k, t_remaining, self.length,
            chosen, self.mc_budget, self.rng,
        )

    def notify(self, executed: ActionSet, observations: list[EdgeObservation]) -> None:
        self.network = apply_observations(self.network, observations).network
        self.chosen.update(executed)
        self.t += 1


@dataclass
class DegreeStrategy:
    network: UncertainNetwork
    k: int
    chosen: set[int] = field(default_factory=set)

    def choose(self) -> ActionSet:
        pool = self.network.n_nodes - len(self.chosen)
        return degree_select(self.network, self.k, self.chosen if pool >= self.k else set())

    def notify(self, executed: ActionSet, observations: list[EdgeObservation]) -> None:
        self.network = apply_observations(self.network, observations).network
        self.chosen.update(executed)


@dataclass
class RandomStrategy:
    network: UncertainNetwork
    k: int
    rng: np.random.Generator
    chosen: set[int] = field(default_factory=set)

    def choose(self) -> ActionSet:
        pool = [v for v in range(self.network.n_nodes) if v not in self.chosen]
        if len(pool) >= self.k:
            picked = self.rng.choice(len(pool), size=self.k, replace=False)
            return ActionSet([pool[int(i)] for i in picked])
        return random_select(self.network, self.k, self.rng)

    def notify(self, executed: ActionSet, observations: list[EdgeObservation]) -> None:
        self.network = apply_observations(self.network, observations).network
        self.chosen.update(executed)


def make_strategy(
    strategy_id: str,
    net: UncertainNetwork,
    k: int,
    t_horizon: int,
    length: int,
    seed: int,
    tasp_config: TaspConfig | None = None,
    greedy_budget: int = DEFAULT_GREEDY_BUDGET,
    recommendation_cache: dict | None = None,
) -> Strategy:
    """Build a fresh per-episode strategy object."""
    if strategy_id in ("heal", "heal_t"):
        mode = heal_mod.MODE_HEAL if strategy_id == "heal" else heal_mod.MODE_HEAL_T
        session = heal_mod.start_session(
            net, k, t_horizon, length, mode=mode, config=tasp_config, seed=seed,
            recommendation_cache=recommendation_cache,
        )
        return HealStrategy(session=session)
    if strategy_id == "greedy":
        return GreedyStrategy(
            network=net, k=k, t_horizon=t_horizon, length=length,
            mc_budget=greedy_budget, rng=child_rng(seed, NS_STRATEGY, 1),
        )
    if strategy_id == "degree":
        return DegreeStrategy(network=net, k=k)
    if strategy_id == "random":
        return RandomStrategy(network=net, k=k, rng=child_rng(seed, NS_STRATEGY, 2))
    raise ValueError(f"unknown strategy id: {strategy_id}")


def simulate_episode(
    strategy: Strategy,
    net: UncertainNetwork,
    ground_truth: InstantiatedNetwork,
    k: int,
    t_horizon: int,
    length: int,
    rng: np.random.Generator,
    deviations: int = 0,
) -> EpisodeResult:
    """Closed loop driving any strategy against one ground-truth network."""
    current = net
    origin = tuple(range(net.n_uncertain))
    w = np.zeros(net.n_nodes, dtype=bool)
    deviate_rounds: set[int] = set()
    if deviations:
        deviate_rounds = {
            int(r) + 1
            for r in rng.choice(t_horizon, size=min(deviations, t_horizon), replace=False)
        }
    logs: list[RoundLog] = []
    for t in range(1, t_horizon + 1):
        recommended = strategy.choose()
        if t in deviate_rounds:
            executed = ActionSet(rng.choice(net.n_nodes, size=k, replace=False).tolist())
        else:
            executed = recommended
        theta = observation_edges(executed, current)
        observations = [
            EdgeObservation(i, bool((ground_truth.kept >> origin[i]) & 1)) for i in theta
        ]
        observed_base = tuple(
            (origin[i], bool((ground_truth.kept >> origin[i]) & 1)) for i in theta
        )
        strategy.notify(executed, observations)
        update = apply_observations(current, observations)
        current = update.network
        origin = tuple(
            origin[old] for old in sorted(update.index_map, key=update.index_map.get)
        )
        for v in executed:
            w[v] = True
        # fixed draw count per step so paired runs sharing a generator see
        # identical coins (variance reduction across strategies)
        w = diffuse_steps(ground_truth, w, length, rng, stop_early=False)
        logs.append(
            RoundLog(
                round_index=t,
                recommended=recommended.nodes,
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
