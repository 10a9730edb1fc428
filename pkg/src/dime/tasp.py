"""Bottom-layer solver: a determinization ensemble searched by UCB1 trees.

For one planning call the solver draws an ensemble of determinizations of
the uncertain network, evaluates the long-term reward of candidate
K-node actions on each determinization with a K-level UCB1 search tree,
aggregates the per-determinization reward lists into one expected reward
per action, and returns the argmax action.

The tree is canonical: children are restricted to node ids greater than
the last id on the root path, so every K-subset owns exactly one leaf and
the branching factor stays linear in the node count.  An internal node's
running average covers every simulated action that extends its sorted
prefix.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._kernels import simulate_rounds_kernel, ucb_pick_kernel
from .diffusion import diffuse_steps
from .network import InstantiatedNetwork, UncertainNetwork, sample_instantiation
from .pomdp import ActionSet


class PlanningError(ValueError):
    """Invalid planning call (e.g. K exceeds the action space)."""


AGGREGATION_MODES = {
    "sample_mean": "sample_mean",
    "mean": "sample_mean",
    "probability_weighted": "probability_weighted",
    "weighted": "probability_weighted",
}


@dataclass(frozen=True)
class TaspConfig:
    """Knobs of the bottom-layer solver."""

    delta: int = 20               # determinization ensemble size
    nsim: int = 1024              # UCB1 simulations per determinization
    ucb_c: float = 1.414          # exploration constant
    rollout: str = "uniform"      # rollout policy id
    aggregation: str = "sample_mean"

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.nsim < 1:
            raise ValueError("nsim must be >= 1")
        if self.ucb_c <= 0:
            raise ValueError("ucb_c must be > 0")
        if self.aggregation not in AGGREGATION_MODES:
            raise ValueError(f"unknown aggregation mode: {self.aggregation}")
        if self.rollout != "uniform":
            raise ValueError(f"unknown rollout policy: {self.rollout}")

    def canonical_aggregation(self) -> str:
        return AGGREGATION_MODES[self.aggregation]


@dataclass(frozen=True)
class ReplayContext:
    """Session context a simulation needs to sample a start state.

    ``executed`` holds the node sets executed in past rounds (ids local to
    the network being planned on); the start influence state is sampled by
    replaying them with ``length`` cascade steps after each round.
    """

    executed: tuple[tuple[int, ...], ...] = ()
    length: int = 1


class TreeNode:
    """One interior node of the K-level tree.

    Child statistics (visit counts and running average rewards) are stored
    in arrays indexed by child position; child ids are the candidate node
    ids in ascending order.
    """

    __slots__ = ("depth", "prefix", "child_ids", "counts", "means", "children", "visits", "_ptr")

    def __init__(self, depth: int, prefix: tuple[int, ...], child_ids: np.ndarray):
        self.depth = depth
        self.prefix = prefix
        self.child_ids = child_ids
        self.counts = np.zeros(child_ids.size, dtype=np.int64)
        self.means = np.zeros(child_ids.size, dtype=float)
        self.children: dict[int, TreeNode] = {}
        self.visits = 0
        self._ptr = 0  # first possibly-unvisited child position


class KLevelTree:
    """Depth-K search tree over ascending combinations of an allowed node list."""

    def __init__(self, allowed: Sequence[int], k: int, reward_scale: float):
        allowed = sorted(int(v) for v in allowed)
        if len(set(allowed)) != len(allowed):
            raise PlanningError("allowed node ids must be distinct")
        if k < 1 or k > len(allowed):
            raise PlanningError(f"need 1 <= K <= {len(allowed)}, got K={k}")
        self.allowed = np.array(allowed, dtype=np.int64)
        self.k = k
        self.reward_scale = max(1.0, float(reward_scale))
        self.root = TreeNode(0, (), self._child_ids(-1, 0))

    def _child_ids(self, last_pos: int, depth: int) -> np.ndarray:
        # leave room for the remaining k-depth-1 ascending picks
        lo = last_pos + 1
        hi = self.allowed.size - (self.k - depth - 1)
        return np.arange(lo, hi, dtype=np.int64)

    def child(self, node: TreeNode, pos_index: int) -> TreeNode:
        child_pos = int(node.child_ids[pos_index])
        found = node.children.get(pos_index)
        if found is None:
            found = TreeNode(
                node.depth + 1,
                node.prefix + (child_pos,),
                self._child_ids(child_pos, node.depth + 1),
            )
            node.children[pos_index] = found
        return found

    def action_of(self, positions: Sequence[int]) -> ActionSet:
        return ActionSet(self.allowed[list(positions)].tolist())

    def leaf_values(self) -> dict[tuple[int, ...], float]:
        """Rewards of every visited leaf, keyed by the K-node action."""
        out: dict[tuple[int, ...], float] = {}
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.depth == self.k - 1:
                for i in np.flatnonzero(node.counts):
                    positions = node.prefix + (int(node.child_ids[i]),)
                    out[tuple(self.allowed[list(positions)].tolist())] = float(node.means[i])
            else:
                stack.extend(node.children.values())
        return out


def _find_positions(tree: KLevelTree, c: float) -> tuple[list[int], list[tuple[TreeNode, int]]]:
    node = tree.root
    path: list[tuple[TreeNode, int]] = []
    positions: list[int] = []
    for _ in range(tree.k):
        counts = node.counts
        while node._ptr < counts.size and counts[node._ptr] > 0:
            node._ptr += 1
        if node._ptr < counts.size:
            pick = node._ptr
        else:
            pick = int(ucb_pick_kernel(node.means, counts, node.visits, c, tree.reward_scale))
        path.append((node, pick))
        positions.append(int(node.child_ids[pick]))
        if node.depth + 1 < tree.k:
            node = tree.child(node, pick)
    return positions, path


def find_step(tree: KLevelTree, c: float) -> tuple[ActionSet, list[tuple[TreeNode, int]]]:
    """Descend root-to-leaf picking one child per level by UCB1.

    Unvisited children are taken first (lowest id first); otherwise the
    child maximizing normalized mean reward plus the exploration bonus.
    Returns the K-node action and the (node, child position) path for the
    matching update.
    """
    positions, path = _find_positions(tree, c)
    return tree.action_of(positions), path


def update_step(tree: KLevelTree, reward: float, action: ActionSet) -> None:
    """Fold one simulated reward into every node on the action's root path."""
    positions = []
    for v in action:
        where = np.searchsorted(tree.allowed, v)
        if where >= tree.allowed.size or tree.allowed[where] != v:
            raise PlanningError(f"action node {v} not in the tree's allowed set")
        positions.append(int(where))
    node = tree.root
    path = []
    for pos in positions:
        i = int(np.searchsorted(node.child_ids, pos))
        if i >= node.child_ids.size or node.child_ids[i] != pos:
            raise PlanningError(f"action {tuple(action)} does not match a leaf path")
        path.append((node, i))
        if node.depth + 1 < tree.k:
            node = tree.child(node, i)
    _apply_update(tree, path, reward)


def _apply_update(tree: KLevelTree, path: list[tuple[TreeNode, int]], reward: float) -> None:
    # a node's own visit count equals its slot count at the parent; both
    # are maintained here because UCB reads ln(visits) at the node itself
    tree.root.visits += 1
    for node, i in path:
        node.counts[i] += 1
        node.means[i] += (reward - node.means[i]) / node.counts[i]
        if node.depth > 0:
            node.visits += 1


_EMPTY_FLAT = np.empty(0, dtype=np.int64)
_EMPTY_OFF = np.zeros(1, dtype=np.int64)


def _replay_arrays(history: ReplayContext | None) -> tuple[np.ndarray, np.ndarray]:
    if history is None or not history.executed:
        return _EMPTY_FLAT, _EMPTY_OFF
    flat: list[int] = []
    off = [0]
    for executed in history.executed:
        flat.extend(executed)
        off.append(len(flat))
    return np.array(flat, dtype=np.int64), np.array(off, dtype=np.int64)


def _rollout_actions(
    n: int, k: int, rounds: int, count: int, rng: np.random.Generator
) -> np.ndarray:
    """(count, rounds, k) uniform K-subsets; distinct nodes within a round."""
    if rounds == 0:
        return np.zeros((count, 0, k), dtype=np.int64)
    if k == 1:
        return rng.integers(0, n, size=(count, rounds, 1), dtype=np.int64)
    scores = rng.random((count * rounds, n))
    picks = np.argpartition(scores, k - 1, axis=1)[:, :k].astype(np.int64)
    return picks.reshape(count, rounds, k)


def _run_simulation(
    inst: InstantiatedNetwork,
    replay_flat: np.ndarray,
    replay_off: np.ndarray,
    action: np.ndarray,
    rollouts: np.ndarray,
    length: int,
    rng: np.random.Generator,
) -> float:
    esrc, edst, ep = inst.edge_arrays
    n_rounds = (replay_off.size - 1) + 1 + rollouts.shape[0]
    uniforms = rng.random((n_rounds * length, esrc.size))
    return simulate_rounds_kernel(
        inst.n_nodes, esrc, edst, ep, uniforms,
        replay_flat, replay_off, action, rollouts, length,
    )


def replay_start_state(
    inst: InstantiatedNetwork, history: ReplayContext | None, rng: np.random.Generator
) -> np.ndarray:
    """Sample a start influence mask by replaying past executed actions."""
    w = np.zeros(inst.n_nodes, dtype=bool)
    if history is None:
        return w
    for executed in history.executed:
        for v in executed:
            w[v] = True
        w = diffuse_steps(inst, w, history.length, rng)
    return w


def simulate_step(
    inst: InstantiatedNetwork,
    action: ActionSet,
    t_remaining: int,
    length: int,
    rng: np.random.Generator,
    history: ReplayContext | None = None,
) -> float:
    """Long-term reward sample: the action now, uniform rollouts afterwards.

    The start state is sampled by replaying the session's executed actions
    on this determinization; the remaining rounds use the uniform rollout
    policy.  The reward telescopes to the influenced-count gain from the
    action's round to the horizon.
    """
    if t_remaining < 1:
        raise PlanningError("t_remaining must be >= 1")
    k = len(action)
    replay_flat, replay_off = _replay_arrays(history)
    rollouts = _rollout_actions(inst.n_nodes, k, t_remaining - 1, 1, rng)[0]
    return _run_simulation(
        inst, replay_flat, replay_off,
        np.array(tuple(action), dtype=np.int64), rollouts, length, rng,
    )


def evaluate(
    inst: InstantiatedNetwork,
    k: int,
    t_remaining: int,
    length: int,
    nsim: int,
    rng: np.random.Generator,
    history: ReplayContext | None = None,
    ucb_c: float = 1.414,
    allowed: Sequence[int] | None = None,
    on_simulation: Callable[[ActionSet, float], None] | None = None,
) -> dict[tuple[int, ...], float]:
    """Estimate long-term rewards of K-node actions on one determinization.

    Runs ``nsim`` find/simulate/update iterations on a fresh tree and
    returns the visited-leaf reward list.
    """
    if t_remaining < 1:
        raise PlanningError("t_remaining must be >= 1")
    n = inst.n_nodes
    if allowed is None:
        allowed = range(n)
    tree = KLevelTree(allowed, k, reward_scale=n)
    replay_flat, replay_off = _replay_arrays(history)
    rollouts = _rollout_actions(n, k, t_remaining - 1, nsim, rng)

    for i in range(nsim):
        positions, path = _find_positions(tree, ucb_c)
        action = tree.allowed[positions]
        reward = _run_simulation(
            inst, replay_flat, replay_off, action, rollouts[i], length, rng
        )
        _apply_update(tree, path, reward)
        if on_simulation is not None:
            on_simulation(ActionSet(action.tolist()), reward)
    return tree.leaf_values()


def aggregate(
    alphas: Sequence[tuple[dict[tuple[int, ...], float], float]],
    mode: str = "sample_mean",
) -> dict[tuple[int, ...], float]:
    """Combine per-determinization reward lists into expected rewards.

    ``sample_mean`` averages each action's estimates over the lists that
    contain it (determinizations are already drawn from the edge priors).
    ``probability_weighted`` weights by the determinization probabilities,
    normalized over the lists containing the action.
    """
    mode = AGGREGATION_MODES.get(mode)
    if mode is None:
        raise ValueError("unknown aggregation mode")
    if not alphas or all(not alpha for alpha, _ in alphas):
        raise ValueError("no estimated actions to aggregate")
    out: dict[tuple[int, ...], float] = {}
    actions = sorted({a for alpha, _ in alphas for a in alpha})
    if mode == "sample_mean":
        for a in actions:
            vals = [alpha[a] for alpha, _ in alphas if a in alpha]
            out[a] = float(np.mean(vals))
    else:
        for a in actions:
            pairs = [(lp, alpha[a]) for alpha, lp in alphas if a in alpha]
            top = max(lp for lp, _ in pairs)
            weights = [math.exp(lp - top) for lp, _ in pairs]
            total = sum(weights)
            out[a] = sum(wt * val for wt, (_, val) in zip(weights, pairs)) / total
    return out


@dataclass(frozen=True)
class TaspResult:
    action: ActionSet
    expected_reward: float
    rewards: dict[tuple[int, ...], float]


def solve_with_value(
    net: UncertainNetwork,
    k: int,
    t_remaining: int,
    length: int,
    config: TaspConfig,
    rng: np.random.Generator,
    history: ReplayContext | None = None,
    allowed: Sequence[int] | None = None,
    on_simulation: Callable[[ActionSet, float], None] | None = None,
    budget_s: float | None = None,
) -> TaspResult:
    """Full solver pass returning the chosen action and its estimate."""
    if k > net.n_nodes:
        raise PlanningError(f"K={k} exceeds network size {net.n_nodes}")
    started = time.monotonic()
    rngs = rng.spawn(config.delta)
    alphas: list[tuple[dict[tuple[int, ...], float], float]] = []
    for d in range(config.delta):
        inst = sample_instantiation(net, rngs[d])
        alpha = evaluate(
            inst, k, t_remaining, length, config.nsim, rngs[d],
            history=history, ucb_c=config.ucb_c, allowed=allowed,
            on_simulation=on_simulation,
        )
        alphas.append((alpha, inst.log_probability))
        if budget_s is not None and time.monotonic() - started > budget_s and d + 1 < config.delta:
            break
    rewards = aggregate(alphas, config.canonical_aggregation())
    best = min(rewards.items(), key=lambda kv: (-kv[1], kv[0]))
    return TaspResult(action=ActionSet(best[0]), expected_reward=best[1], rewards=rewards)


def tasp_solve(
    net: UncertainNetwork,
    k: int,
    t_remaining: int,
    length: int,
    config: TaspConfig,
    rng: np.random.Generator,
    history: ReplayContext | None = None,
    allowed: Sequence[int] | None = None,
    budget_s: float | None = None,
) -> ActionSet:
    """Best K-node action for the current round (ties: lowest node ids)."""
    return solve_with_value(
        net, k, t_remaining, length, config, rng,
        history=history, allowed=allowed, budget_s=budget_s,
    ).action
