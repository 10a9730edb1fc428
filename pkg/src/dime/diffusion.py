"""Influence diffusion: multi-chance cascade, generative model, exact oracle.

The cascade is the retry variant of independent cascade: at every time
step, each influenced node attempts to influence every currently
un-influenced out-neighbour with the edge's propagation probability.
Failed attempts are retried in later steps; influenced nodes stay
influenced forever, which makes "retry until success" behaviourally
identical to "stop attempting a neighbour once it is influenced".

Two evaluation routes are provided and deliberately kept independent:
Monte-Carlo simulation (coin flips per edge per step) and an exact
enumerator that sweeps edge-existence outcomes and per-step influence
outcomes, for instances small enough to enumerate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .network import InstantiatedNetwork, UncertainNetwork, instantiation_for
from .pomdp import ActionSet, ObservationValue, PomdpState, observation_edges


class InstanceTooLargeError(ValueError):
    """Exact enumeration was asked for an instance beyond its caps."""


# Exact-oracle admission caps: full enumeration must stay ~16M weighted
# terms in the worst case.
MAX_UNCERTAIN_EXACT = 12
MAX_COIN_EVENTS_EXACT = 24


# -- bitmask/array helpers ----------------------------------------------


def nodes_to_mask(nodes: Iterable[int], n: int) -> np.ndarray:
    w = np.zeros(n, dtype=bool)
    for v in nodes:
        w[v] = True
    return w


def mask_to_int(w: np.ndarray) -> int:
    out = 0
    for v in np.flatnonzero(w):
        out |= 1 << int(v)
    return out


def int_to_mask(w: int, n: int) -> np.ndarray:
    arr = np.zeros(n, dtype=bool)
    v = 0
    while w:
        if w & 1:
            arr[v] = True
        w >>= 1
        v += 1
    return arr


# -- Monte-Carlo simulation ----------------------------------------------


def diffuse_one_step(
    inst: InstantiatedNetwork, w: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One synchronous cascade step; returns a new influence mask.

    Every edge from an influenced source to an un-influenced target (as of
    the step start) fires independently with its propagation probability.
    """
    out = w.copy()
    _step_inplace(out, *inst.edge_arrays, rng)
    return out


def diffuse_steps(
    inst: InstantiatedNetwork,
    w: np.ndarray,
    steps: int,
    rng: np.random.Generator,
    stop_early: bool = True,
) -> np.ndarray:
    """``steps`` sequential cascade steps.

    With ``stop_early`` the loop exits once no edge is active (the mask can
    never change again).  ``stop_early=False`` draws exactly one uniform
    per edge per step regardless, which keeps coin streams aligned across
    runs that share a generator (common-random-number pairing).
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    out = w.copy()
    esrc, edst, ep = inst.edge_arrays
    for _ in range(steps):
        if stop_early:
            if not _step_inplace(out, esrc, edst, ep, rng):
                break
        else:
            _step_synced(out, esrc, edst, ep, rng)
    return out


def _step_inplace(
    w: np.ndarray, esrc: np.ndarray, edst: np.ndarray, ep: np.ndarray,
    rng: np.random.Generator,
) -> bool:
    """Mutate ``w`` by one step; False when no edge was active (w is final)."""
    if esrc.size == 0:
        return False
    active = w[esrc] & ~w[edst]
    if not active.any():
        return False
    hit = active & (rng.random(ep.size) < ep)
    targets = edst[hit]
    if targets.size:
        w[targets] = True
    return True


def _step_synced(
    w: np.ndarray, esrc: np.ndarray, edst: np.ndarray, ep: np.ndarray,
    rng: np.random.Generator,
) -> None:
    """One step consuming one uniform per edge unconditionally."""
    if esrc.size == 0:
        return
    coins = rng.random(ep.size) < ep
    hit = w[esrc] & ~w[edst] & coins
    targets = edst[hit]
    if targets.size:
        w[targets] = True


def diffuse_batch_inplace(
    inst: InstantiatedNetwork, w: np.ndarray, steps: int, rng: np.random.Generator
) -> np.ndarray:
    """Run ``steps`` cascade steps on a (batch, n_nodes) matrix of masks.

    Row ``i`` evolves exactly like an independent simulation with its own
    coins; batching only amortizes the numpy dispatch overhead.
    """
    esrc, edst, ep, seg, udst = inst.edge_arrays_by_dst
    if esrc.size == 0:
        return w
    b = w.shape[0]
    for _ in range(steps):
        active = w[:, esrc] & ~w[:, edst]
        if not active.any():
            break
        hit = active & (rng.random((b, ep.size)) < ep)
        w[:, udst] |= np.logical_or.reduceat(hit, seg, axis=1)
    return w


@dataclass(frozen=True)
class GenerativeSample:
    """One draw from the transition/observation/reward generative model."""

    next_state: PomdpState
    observation: ObservationValue
    reward: int


def generative_step(
    net: UncertainNetwork,
    state: PomdpState,
    action: ActionSet,
    length: int,
    rng: np.random.Generator,
    k: int | None = None,
) -> GenerativeSample:
    """Sample (next state, observation, reward) for taking ``action``.

    The acted-on nodes become influenced with certainty, the F-values of
    their outgoing uncertain edges are revealed, and the cascade then runs
    ``length`` steps on the edges that exist under ``state.f``.
    """
    if k is not None and len(action) != k:
        raise ValueError(f"action size {len(action)} != K={k}")
    inst = instantiation_for(net, state.f)
    n = net.n_nodes
    w = int_to_mask(state.w, n)
    prev_count = int(w.sum())
    for v in action:
        w[v] = True
    w = diffuse_steps(inst, w, length, rng)

    observed = tuple(
        (i, bool((state.f >> i) & 1)) for i in observation_edges(action, net)
    )
    next_state = PomdpState(w=mask_to_int(w), f=state.f)
    return GenerativeSample(
        next_state=next_state,
        observation=ObservationValue(observed=observed),
        reward=int(w.sum()) - prev_count,
    )


# -- exact enumeration ----------------------------------------------------


def _check_exact_caps(net: UncertainNetwork, t: int, length: int) -> None:
    if net.n_uncertain > MAX_UNCERTAIN_EXACT:
        raise InstanceTooLargeError(
            f"{net.n_uncertain} uncertain edges > cap {MAX_UNCERTAIN_EXACT}"
        )
    n_stochastic = sum(1 for e in net.edges if 0.0 < e.p < 1.0)
    events = n_stochastic * t * length
    if events > MAX_COIN_EVENTS_EXACT:
        raise InstanceTooLargeError(
            f"{n_stochastic} stochastic edges x {t} rounds x {length} steps "
            f"= {events} coin events > cap {MAX_COIN_EVENTS_EXACT}"
        )


def one_step_outcomes(
    in_edges_by_target: dict[int, list[tuple[int, float]]], w: int
) -> list[tuple[int, float]]:
    """Exact distribution of the influence mask after one cascade step.

    Per-edge coins are independent and each coin affects a single target,
    so each candidate target is influenced independently with probability
    1 - prod(1 - p) over its active incoming edges.
    """
    candidates: list[tuple[int, float]] = []
    for target, sources in in_edges_by_target.items():
        if (w >> target) & 1:
            continue
        fail = 1.0
        live = False
        for src, p in sources:
            if (w >> src) & 1:
                live = True
                fail *= 1.0 - p
        if live and fail < 1.0:
            candidates.append((target, 1.0 - fail))
    outcomes = [(w, 1.0)]
    for target, q in candidates:
        bit = 1 << target
        grown: list[tuple[int, float]] = []
        for mask, prob in outcomes:
            if q >= 1.0:
                grown.append((mask | bit, prob))
            else:
                grown.append((mask | bit, prob * q))
                grown.append((mask, prob * (1.0 - q)))
        outcomes = grown
    return outcomes


def distribution_after_steps(
    inst: InstantiatedNetwork, w: int, steps: int
) -> dict[int, float]:
    """Exact influence-mask distribution after ``steps`` cascade steps."""
    by_target = inst.in_edges_by_target
    dist = {w: 1.0}
    for _ in range(steps):
        grown: dict[int, float] = {}
        changed = False
        for mask, prob in dist.items():
            for mask2, p2 in one_step_outcomes(by_target, mask):
                if mask2 != mask:
                    changed = True
                grown[mask2] = grown.get(mask2, 0.0) + prob * p2
        dist = grown
        if not changed:
            break
    return dist


def expected_count_after_steps(
    inst: InstantiatedNetwork, w: int, steps: int, memo: dict[tuple[int, int], float]
) -> float:
    """Exact expected influenced count after ``steps`` steps from mask ``w``."""
    key = (w, steps)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if steps == 0:
        value = float(w.bit_count())
    else:
        outcomes = one_step_outcomes(inst.in_edges_by_target, w)
        if len(outcomes) == 1 and outcomes[0][0] == w:
            value = float(w.bit_count())  # fixed point: no active edges
        else:
            value = sum(
                prob * expected_count_after_steps(inst, mask, steps - 1, memo)
                for mask, prob in outcomes
            )
    memo[key] = value
    return value


def _instantiation_probability(net: UncertainNetwork, kept: int) -> float:
    prob = 1.0
    for i, e in enumerate(net.uncertain_edges):
        prob *= e.u if (kept >> i) & 1 else (1.0 - e.u)
    return prob


def exact_expected_influence(
    net: UncertainNetwork,
    fixed_actions: Sequence[ActionSet | Sequence[int]],
    t: int,
    length: int,
) -> float:
    """Exact expected final influenced count for a fixed action schedule.

    Enumerates every uncertain-edge existence outcome and, inside each,
    every per-step influence outcome, weighting by their probabilities.
    Only admissible for instances within the enumeration caps.
    """
    if len(fixed_actions) != t:
        raise ValueError(f"{len(fixed_actions)} actions given for {t} rounds")
    _check_exact_caps(net, t, length)
    action_masks = []
    for a in fixed_actions:
        mask = 0
        for v in a:
            if not (0 <= v < net.n_nodes):
                raise ValueError(f"action node {v} out of range")
            mask |= 1 << v
        action_masks.append(mask)

    total = 0.0
    m = net.n_uncertain
    for kept in range(1 << m):
        prob = _instantiation_probability(net, kept)
        if prob == 0.0:
            continue
        inst = instantiation_for(net, kept)
        memo: dict[tuple[int, int], float] = {}
        total += prob * _expected_final(inst, action_masks, length, memo)
    return total


def _expected_final(
    inst: InstantiatedNetwork, action_masks: list[int], length: int,
    exp_memo: dict[tuple[int, int], float],
) -> float:
    """Expected final count for fixed actions on one instantiation."""
    dist = {0: 1.0}
    for r, amask in enumerate(action_masks):
        seeded: dict[int, float] = {}
        for w, pr in dist.items():
            w2 = w | amask
            seeded[w2] = seeded.get(w2, 0.0) + pr
        if r == len(action_masks) - 1:
            return sum(
                pr * expected_count_after_steps(inst, w, length, exp_memo)
                for w, pr in seeded.items()
            )
        for _ in range(length):
            step: dict[int, float] = {}
            for w, pr in seeded.items():
                for w2, p2 in one_step_outcomes(inst.in_edges_by_target, w):
                    step[w2] = step.get(w2, 0.0) + pr * p2
            seeded = step
        dist = seeded
    return sum(pr * w.bit_count() for w, pr in dist.items())
