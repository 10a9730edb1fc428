"""Exact optimal-policy oracle and hardness-construction checks.

The brute-force oracle enumerates, for tiny instances, every adaptive
policy: it maximizes over actions and takes exact expectations over edge
observations and cascade outcomes at every level.  Influence status stays
unobserved between rounds, so policies branch only on edge observations.

The two verification routines rebuild the counterexample networks behind
the value-of-information bound (a hidden star hub caps any algorithm at
an expected reward of 2 - 1/n against a full-information optimum of n)
and the diminishing-returns failure (a 4-node path where the marginal
gain of an extra pick is larger under the larger observation set).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple

from .diffusion import (
    InstanceTooLargeError,
    exact_expected_influence,
    expected_count_after_steps,
    one_step_outcomes,
)
from .network import (
    Edge,
    EdgeObservation,
    UncertainNetwork,
    apply_observations,
    instantiation_for,
)
from .pomdp import ActionSet, observation_edges

# Admission caps for the adaptive-policy enumeration.
MAX_NODES_BRUTE = 8
MAX_UNCERTAIN_BRUTE = 3
MAX_ROUNDS_BRUTE = 2
MAX_K_BRUTE = 2


@dataclass(frozen=True)
class PolicyValue:
    value: float
    optimal_first_actions: tuple[ActionSet, ...]


def brute_force_policy_value(
    net: UncertainNetwork, k: int, t_horizon: int, length: int
) -> PolicyValue:
    """Exact value of the optimal adaptive T-round policy on a tiny instance."""
    if net.n_nodes > MAX_NODES_BRUTE:
        raise InstanceTooLargeError(f"{net.n_nodes} nodes > cap {MAX_NODES_BRUTE}")
    if net.n_uncertain > MAX_UNCERTAIN_BRUTE:
        raise InstanceTooLargeError(f"{net.n_uncertain} uncertain edges > cap {MAX_UNCERTAIN_BRUTE}")
    if t_horizon > MAX_ROUNDS_BRUTE:
        raise InstanceTooLargeError(f"T={t_horizon} > cap {MAX_ROUNDS_BRUTE}")
    if k > MAX_K_BRUTE:
        raise InstanceTooLargeError(f"K={k} > cap {MAX_K_BRUTE}")
    if k > net.n_nodes:
        raise ValueError(f"K={k} exceeds network size {net.n_nodes}")

    actions = [tuple(c) for c in combinations(range(net.n_nodes), k)]
    action_masks = {a: _mask(a) for a in actions}
    theta = {a: observation_edges(ActionSet(a), net) for a in actions}

    # branches: (kept mask, prior prob, influence-mask distribution)
    branches = []
    for kept in range(1 << net.n_uncertain):
        prob = 1.0
        for i, e in enumerate(net.uncertain_edges):
            prob *= e.u if (kept >> i) & 1 else (1.0 - e.u)
        if prob > 0.0:
            branches.append((kept, prob, {0: 1.0}))
    memos: dict[int, dict] = {kept: {} for kept, _, _ in branches}

    def last_round_value(branch_list, amask) -> float:
        total = 0.0
        for kept, prob, dist in branch_list:
            inst = instantiation_for(net, kept)
            memo = memos[kept]
            for w, pr in dist.items():
                total += prob * pr * expected_count_after_steps(inst, w | amask, length, memo)
        return total

    def evolve(kept: int, dist: dict[int, float], amask: int) -> dict[int, float]:
        inst = instantiation_for(net, kept)
        cur: dict[int, float] = {}
        for w, pr in dist.items():
            w2 = w | amask
            cur[w2] = cur.get(w2, 0.0) + pr
        for _ in range(length):
            step: dict[int, float] = {}
            for w, pr in cur.items():
                for w2, p2 in one_step_outcomes(inst.in_edges_by_target, w):
                    step[w2] = step.get(w2, 0.0) + pr * p2
            cur = step
        return cur

    def best(branch_list, t: int) -> tuple[float, list[tuple[int, ...]]]:
        top, argmax = None, []
        for a in actions:
            amask = action_masks[a]
            if t == t_horizon:
                value = last_round_value(branch_list, amask)
            else:
                groups: dict[tuple, list] = {}
                for kept, prob, dist in branch_list:
                    signature = tuple((kept >> i) & 1 for i in theta[a])
                    groups.setdefault(signature, []).append(
                        (kept, prob, evolve(kept, dist, amask))
                    )
                value = sum(best(group, t + 1)[0] for group in groups.values())
            if top is None or value > top + 1e-12:
                top, argmax = value, [a]
            elif abs(value - top) <= 1e-12:
                argmax.append(a)
        return top, argmax

    value, argmax = best(branches, 1)
    return PolicyValue(
        value=value,
        optimal_first_actions=tuple(ActionSet(a) for a in argmax),
    )


def _mask(nodes) -> int:
    m = 0
    for v in nodes:
        m |= 1 << v
    return m


# -- hardness-construction checks ----------------------------------------


def star_ground_truth(n: int, p: float = 1.0) -> UncertainNetwork:
    """Hub node 0 with certain p-edges to the n-1 leaves."""
    if n < 2:
        raise ValueError("need n >= 2")
    return UncertainNetwork(
        n_nodes=n, edges=[Edge(src=0, dst=i, p=p) for i in range(1, n)]
    )


def verify_hidden_hub_bound(n: int) -> tuple[float, float]:
    """Value of a blind uniform single pick on a hidden star vs. knowing it.

    Against a star ground truth (hub + n-1 leaves, p=1, one round, one
    step) a uniformly random pick earns (1/n)*n + ((n-1)/n)*1 = 2 - 1/n in
    expectation, while the full-information optimum always picks the hub
    and earns n.  Both values are computed by exact enumeration.
    """
    star = star_ground_truth(n)
    per_seed = [
        exact_expected_influence(star, [ActionSet([v])], 1, 1) for v in range(n)
    ]
    random_value = sum(per_seed) / n
    opt_full = exact_expected_influence(star, [ActionSet([0])], 1, 1)
    return random_value, opt_full


class MarginalGainCheck(NamedTuple):
    marginal_large_obs: float   # extra pick after observing both outer edges
    marginal_small_obs: float   # extra pick after observing the first edge only
    value_with_pick_large: float
    value_without_pick_large: float
    value_with_pick_small: float
    value_without_pick_small: float


def path_counterexample(epsilon: float) -> UncertainNetwork:
    """Directed 4-node path with u = (1-eps, eps, eps) and p = 1."""
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must be in (0, 1)")
    return UncertainNetwork(
        n_nodes=4,
        edges=[
            Edge(src=0, dst=1, p=1.0, u=1.0 - epsilon),
            Edge(src=1, dst=2, p=1.0, u=epsilon),
            Edge(src=2, dst=3, p=1.0, u=epsilon),
        ],
    )


def verify_submodularity_violation(epsilon: float) -> MarginalGainCheck:
    """Diminishing returns fail on the 4-node path: eps > eps^2 marginals.

    With two cascade steps, the marginal value of additionally picking the
    second node is eps under the larger observation set (first and third
    edges known to exist) but only eps^2 under the smaller one (first edge
    known to exist).  All four values come from exact enumeration; the
    comparison uses the exact conditioning of the underlying arithmetic,
    where the "without" value under the larger set keeps the first edge
    uncertain.
    """
    net = path_counterexample(epsilon)
    steps = 2

    cond_first = apply_observations(net, [EdgeObservation(0, True)]).network
    with_small = exact_expected_influence(cond_first, [ActionSet([0, 1])], 1, steps)
    without_small = exact_expected_influence(cond_first, [ActionSet([0])], 1, steps)

    cond_both = apply_observations(
        net, [EdgeObservation(0, True), EdgeObservation(2, True)]
    ).network
    with_large = exact_expected_influence(cond_both, [ActionSet([0, 1, 2])], 1, steps)
    cond_third = apply_observations(net, [EdgeObservation(2, True)]).network
    without_large = exact_expected_influence(cond_third, [ActionSet([0, 2])], 1, steps)

    result = MarginalGainCheck(
        marginal_large_obs=with_large - without_large,
        marginal_small_obs=with_small - without_small,
        value_with_pick_large=with_large,
        value_without_pick_large=without_large,
        value_with_pick_small=with_small,
        value_without_pick_small=without_small,
    )
    if not result.marginal_large_obs > result.marginal_small_obs:
        raise AssertionError(
            "expected the larger observation set to carry the larger marginal: "
            f"{result.marginal_large_obs} vs {result.marginal_small_obs}"
        )
    return result
