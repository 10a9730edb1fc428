"""Formal planning objects shared by the solver and the session loop.

States pair a node-influence bitmask W with an uncertain-edge existence
bitmask F.  Actions are fixed-size node subsets.  Observations reveal the
F bits of the uncertain edges leaving the acted-on nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import UncertainNetwork


class MonotonicityError(ValueError):
    """Influence flags may never clear."""


@dataclass(frozen=True)
class PomdpState:
    """Pair of bitmasks: W over nodes (influenced), F over uncertain edges."""

    w: int
    f: int

    def influenced_count(self) -> int:
        return self.w.bit_count()


@dataclass(frozen=True, order=True)
class ActionSet:
    """Canonical (sorted, distinct) subset of nodes chosen in one round."""

    nodes: tuple[int, ...]

    def __init__(self, nodes: Sequence[int]):
        ordered = tuple(sorted(int(v) for v in nodes))
        if len(set(ordered)) != len(ordered):
            raise ValueError(f"action nodes must be distinct: {nodes}")
        object.__setattr__(self, "nodes", ordered)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def __contains__(self, v: int) -> bool:
        return v in self.nodes

    def validate(self, k: int, n_nodes: int) -> None:
        if len(self.nodes) != k:
            raise ValueError(f"action must have exactly {k} nodes, got {len(self.nodes)}")
        if self.nodes and (self.nodes[0] < 0 or self.nodes[-1] >= n_nodes):
            raise ValueError(f"action node out of range for n={n_nodes}: {self.nodes}")


@dataclass(frozen=True)
class ObservationValue:
    """F-values of the uncertain edges revealed by an executed action."""

    observed: tuple[tuple[int, bool], ...]  # (uncertain_edge_index, exists), ascending

    def __post_init__(self):
        idx = [i for i, _ in self.observed]
        if idx != sorted(set(idx)):
            raise ValueError("observation indices must be distinct and ascending")

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.observed)


@dataclass(frozen=True)
class HistoryRound:
    """One completed round: what was advised, what happened, what was seen.

    ``index_map`` records how surviving uncertain-edge indices were
    renumbered when this round's observations were folded in, keyed by
    the pre-round index space.
    """

    recommended: ActionSet | None
    executed: ActionSet
    observation: ObservationValue
    index_map: dict[int, int]

    @property
    def deviated(self) -> bool:
        return self.recommended is not None and self.executed != self.recommended


@dataclass
class SessionHistory:
    """Ordered record of rounds against a fixed base network."""

    base_network: UncertainNetwork
    rounds: list[HistoryRound] = field(default_factory=list)

    def executed_actions(self) -> list[ActionSet]:
        return [r.executed for r in self.rounds]

    def __len__(self) -> int:
        return len(self.rounds)


@dataclass(frozen=True)
class InitialBelief:
    """All nodes un-influenced; F bits independent Bernoulli(u(e))."""

    network: UncertainNetwork


def observation_edges(action: ActionSet, net: UncertainNetwork) -> tuple[int, ...]:
    """Uncertain-edge indices revealed by acting on ``action``.

    Exactly the uncertain edges whose *source* is an acted-on node;
    incoming uncertain edges stay hidden.
    """
    out: list[int] = []
    for v in action:
        out.extend(net.out_uncertain.get(v, ()))
    return tuple(sorted(out))


def reward(prev: PomdpState, next_state: PomdpState) -> int:
    """Number of newly influenced nodes between consecutive states."""
    if prev.w & ~next_state.w:
        raise MonotonicityError("influence flags cleared between states")
    return next_state.influenced_count() - prev.influenced_count()


def sample_initial_state(belief: InitialBelief, rng: np.random.Generator) -> PomdpState:
    """Draw a start state: W = 0, each F bit Bernoulli(u)."""
    net = belief.network
    m = net.n_uncertain
    if m == 0:
        return PomdpState(w=0, f=0)
    bits = rng.random(m) < net.u_values
    f = 0
    for i in range(m):
        if bits[i]:
            f |= 1 << i
    return PomdpState(w=0, f=f)
