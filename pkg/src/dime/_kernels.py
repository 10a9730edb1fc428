"""Compiled inner loops for the solver's Monte-Carlo simulations.

The kernel consumes pre-drawn uniforms (one row per potential cascade
step) so all randomness stays on the caller's PCG64 stream; runs are
reproducible regardless of how much of the pre-drawn block a simulation
actually uses.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def simulate_rounds_kernel(
    n: int,
    esrc: np.ndarray,      # (M,) int64 edge sources
    edst: np.ndarray,      # (M,) int64 edge targets
    ep: np.ndarray,        # (M,) float64 propagation probabilities
    uniforms: np.ndarray,  # (R*L, M) float64, one row per potential step
    replay_flat: np.ndarray,  # int64 concatenated past-round node sets
    replay_off: np.ndarray,   # int64 offsets, len = n_replay + 1
    action: np.ndarray,       # (k,) int64 current-round action
    rollouts: np.ndarray,     # (R - n_replay - 1, k) int64 future actions
    length: int,
) -> float:
    """One full-episode influence simulation; returns the long-term reward.

    Rounds run in order: replayed past rounds, the evaluated action, then
    the rollout actions, each followed by ``length`` synchronous cascade
    steps over the existing edges.  The reward is the influenced-count
    gain from the evaluated action's round onward.
    """
    w = np.zeros(n, np.bool_)
    m = esrc.size
    buf = np.empty(m, np.int64)
    n_replay = replay_off.size - 1
    n_rounds = n_replay + 1 + rollouts.shape[0]
    count = 0
    base = 0
    step = 0
    for r in range(n_rounds):
        if r == n_replay:
            base = count
        if r < n_replay:
            for i in range(replay_off[r], replay_off[r + 1]):
                v = replay_flat[i]
                if not w[v]:
                    w[v] = True
                    count += 1
        elif r == n_replay:
            for i in range(action.size):
                v = action[i]
                if not w[v]:
                    w[v] = True
                    count += 1
        else:
            row = r - n_replay - 1
            for i in range(rollouts.shape[1]):
                v = rollouts[row, i]
                if not w[v]:
                    w[v] = True
                    count += 1
        if count == n:
            step += length
            continue
        for l in range(length):
            hits = 0
            active = False
            for e in range(m):
                if w[esrc[e]] and not w[edst[e]]:
                    active = True
                    if uniforms[step, e] < ep[e]:
                        buf[hits] = edst[e]
                        hits += 1
            step += 1
            for i in range(hits):
                v = buf[i]
                if not w[v]:
                    w[v] = True
                    count += 1
            if not active or count == n:
                step += length - 1 - l
                break
    return float(count - base)


@njit(cache=True)
def ucb_pick_kernel(
    means: np.ndarray, counts: np.ndarray, visits: int, c: float, scale: float
) -> int:
    """Argmax of normalized mean + exploration bonus (first max wins)."""
    log_n = np.log(max(visits, 1))
    best = -1
    best_score = -1e300
    for i in range(means.size):
        score = means[i] / scale + c * np.sqrt(log_n / counts[i])
        if score > best_score:
            best_score = score
            best = i
    return best
