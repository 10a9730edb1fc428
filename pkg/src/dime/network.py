"""Uncertain social-network data model.

A network over ``n_nodes`` people carries two kinds of directed edges:
certain ones (the friendship is known to exist) and uncertain ones that
exist only with probability ``u``.  Every edge also carries a per-step
propagation probability ``p``.  Uncertain edges are indexed contiguously
``0..len(E_u)-1`` in load order; that index is the stable handle used by
observations, beliefs and determinizations.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class NetworkError(ValueError):
    """Malformed network document or invalid network operation."""


@dataclass(frozen=True)
class Edge:
    """Directed edge; ``u is None`` means the edge certainly exists."""

    src: int
    dst: int
    p: float
    u: float | None = None

    def __post_init__(self):
        if self.src == self.dst:
            raise NetworkError(f"self-loop at node {self.src}")
        if not (0.0 <= self.p <= 1.0):
            raise NetworkError(f"propagation probability out of range: p={self.p}")
        if self.u is not None and not (0.0 < self.u < 1.0):
            raise NetworkError(f"existence probability out of range: u={self.u}")

    @property
    def certain(self) -> bool:
        return self.u is None


@dataclass(frozen=True)
class EdgeObservation:
    """Resolved state of one uncertain edge, by uncertain-edge index."""

    uncertain_edge_index: int
    exists: bool


class UncertainNetwork:
    """Immutable directed graph with certain and uncertain edges."""

    def __init__(self, n_nodes: int, edges: Sequence[Edge], labels: dict[int, str] | None = None):
        if n_nodes < 0:
            raise NetworkError("n_nodes must be non-negative")
        seen: set[tuple[int, int]] = set()
        for e in edges:
            if not (0 <= e.src < n_nodes) or not (0 <= e.dst < n_nodes):
                raise NetworkError(f"edge ({e.src},{e.dst}) references node >= n_nodes={n_nodes}")
            if (e.src, e.dst) in seen:
                raise NetworkError(f"duplicate edge ({e.src},{e.dst})")
            seen.add((e.src, e.dst))
        if labels:
            for i in labels:
                if not (0 <= i < n_nodes):
                    raise NetworkError(f"label for unknown node {i}")
        self.n_nodes = int(n_nodes)
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.labels = dict(labels) if labels else None

    # -- derived views -------------------------------------------------

    @cached_property
    def certain_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.certain)

    @cached_property
    def uncertain_edges(self) -> tuple[Edge, ...]:
        """Uncertain edges in index order (load order)."""
        return tuple(e for e in self.edges if not e.certain)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_uncertain(self) -> int:
        return len(self.uncertain_edges)

    @cached_property
    def u_values(self) -> np.ndarray:
        return np.array([e.u for e in self.uncertain_edges], dtype=float)

    @cached_property
    def out_uncertain(self) -> dict[int, tuple[int, ...]]:
        """Map node -> indices of its outgoing uncertain edges."""
        out: dict[int, list[int]] = {}
        for i, e in enumerate(self.uncertain_edges):
            out.setdefault(e.src, []).append(i)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def out_degree(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=int)
        for e in self.edges:
            deg[e.src] += 1
        return deg

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, UncertainNetwork)
            and self.n_nodes == other.n_nodes
            and self.edges == other.edges
            and self.labels == other.labels
        )

    def __repr__(self) -> str:
        return (
            f"UncertainNetwork(n_nodes={self.n_nodes}, certain={len(self.certain_edges)}, "
            f"uncertain={self.n_uncertain})"
        )


class InstantiatedNetwork:
    """A determinization: every uncertain edge resolved kept or absent.

    ``kept`` is an integer bitmask over the base network's uncertain-edge
    indices.  The instantiation has no uncertain edges of its own; its
    edge set is E_c plus the kept members of E_u.
    """

    def __init__(self, base: UncertainNetwork, kept: int):
        if kept < 0 or kept >> base.n_uncertain:
            raise NetworkError("kept bitmask wider than the uncertain edge set")
        self.base = base
        self.kept = int(kept)

    @cached_property
    def log_probability(self) -> float:
        return instantiation_log_probability(self.base, self.kept)

    @property
    def n_nodes(self) -> int:
        return self.base.n_nodes

    @cached_property
    def existing_edges(self) -> tuple[Edge, ...]:
        kept_unc = [e for i, e in enumerate(self.base.uncertain_edges) if (self.kept >> i) & 1]
        return self.base.certain_edges + tuple(kept_unc)

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(src, dst, p) arrays over existing edges, in deterministic order."""
        es = self.existing_edges
        src = np.array([e.src for e in es], dtype=np.int64)
        dst = np.array([e.dst for e in es], dtype=np.int64)
        p = np.array([e.p for e in es], dtype=float)
        return src, dst, p

    @cached_property
    def edge_arrays_by_dst(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(src, dst, p, segment_starts, unique_dsts) with edges grouped by dst.

        Grouping lets batched simulation OR all hits on a target with one
        ``reduceat`` instead of a scatter with duplicate indices.
        """
        src, dst, p = self.edge_arrays
        order = np.argsort(dst, kind="stable")
        src_s, dst_s, p_s = src[order], dst[order], p[order]
        if dst_s.size:
            starts = np.flatnonzero(np.r_[True, dst_s[1:] != dst_s[:-1]])
            udst = dst_s[starts]
        else:
            starts = np.empty(0, dtype=np.int64)
            udst = np.empty(0, dtype=np.int64)
        return src_s, dst_s, p_s, starts, udst

    @cached_property
    def in_edges_by_target(self) -> dict[int, list[tuple[int, float]]]:
        """Map target node -> [(source, p)] over existing edges."""
        by_t: dict[int, list[tuple[int, float]]] = {}
        for e in self.existing_edges:
            by_t.setdefault(e.dst, []).append((e.src, e.p))
        return by_t

    def __repr__(self) -> str:
        return f"InstantiatedNetwork(kept={self.kept:b}, logp={self.log_probability:.4f})"


def instantiation_for(net: UncertainNetwork, kept: int) -> InstantiatedNetwork:
    """Memoized instantiation lookup (caches derived edge arrays per mask)."""
    cache: dict[int, InstantiatedNetwork] = net.__dict__.setdefault("_instantiation_cache", {})
    inst = cache.get(kept)
    if inst is None:
        if len(cache) >= 512:
            cache.clear()
        inst = cache[kept] = InstantiatedNetwork(net, kept)
    return inst


class ObservationUpdate(NamedTuple):
    """Result of folding edge observations into a network."""

    network: UncertainNetwork
    index_map: dict[int, int]  # old uncertain index -> new index, survivors only


# -- serialization -----------------------------------------------------


def load_network(document: bytes | str | dict) -> UncertainNetwork:
    """Parse a network JSON document and enforce all model invariants.

    ``u`` equal to 1.0 promotes the edge to certain; ``u`` equal to 0.0
    drops it (a warning reports how many were dropped).
    """
    if isinstance(document, (bytes, str)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise NetworkError(f"invalid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise NetworkError("network document must be a JSON object")
    if "n_nodes" not in doc:
        raise NetworkError("missing n_nodes")
    n_nodes = doc["n_nodes"]
    if not isinstance(n_nodes, int) or isinstance(n_nodes, bool) or n_nodes < 0:
        raise NetworkError(f"n_nodes must be a non-negative integer, got {n_nodes!r}")
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        raise NetworkError("edges must be a list")

    labels: dict[int, str] = {}
    for node in doc.get("nodes", []) or []:
        if not isinstance(node, dict) or "id" not in node:
            raise NetworkError(f"bad node entry: {node!r}")
        if "label" in node and node["label"] is not None:
            labels[int(node["id"])] = str(node["label"])

    edges: list[Edge] = []
    dropped = 0
    for raw in raw_edges:
        if not isinstance(raw, dict):
            raise NetworkError(f"bad edge entry: {raw!r}")
        try:
            src, dst, p = int(raw["src"]), int(raw["dst"]), float(raw["p"])
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkError(f"bad edge entry {raw!r}: {exc}") from exc
        u = raw.get("u")
        if u is not None:
            u = float(u)
            if not (0.0 <= u <= 1.0):
                raise NetworkError(f"existence probability out of range: u={u}")
            if u == 0.0:
                dropped += 1
                continue
            if u == 1.0:
                u = None  # certainty: promote
        edges.append(Edge(src=src, dst=dst, p=p, u=u))
    if dropped:
        warnings.warn(f"dropped {dropped} uncertain edge(s) with u=0", stacklevel=2)
    return UncertainNetwork(n_nodes=n_nodes, edges=edges, labels=labels or None)


def network_document(net: UncertainNetwork) -> dict:
    """Inverse of :func:`load_network`; round-trips exactly."""
    doc: dict = {"n_nodes": net.n_nodes}
    if net.labels:
        doc["nodes"] = [{"id": i, "label": net.labels[i]} for i in sorted(net.labels)]
    doc["edges"] = [
        {"src": e.src, "dst": e.dst, "p": e.p} | ({} if e.certain else {"u": e.u})
        for e in net.edges
    ]
    return doc


def network_json(net: UncertainNetwork) -> str:
    return json.dumps(network_document(net))


def network_csv(net: UncertainNetwork) -> str:
    """CSV export mirroring the JSON edge columns (u blank for certain)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["src", "dst", "p", "u"])
    for e in net.edges:
        writer.writerow([e.src, e.dst, repr(e.p), "" if e.certain else repr(e.u)])
    return buf.getvalue()


def network_from_csv(text: str, n_nodes: int) -> UncertainNetwork:
    reader = csv.DictReader(io.StringIO(text))
    edges = []
    for row in reader:
        u = row.get("u") or None
        edges.append(
            Edge(src=int(row["src"]), dst=int(row["dst"]), p=float(row["p"]),
                 u=float(u) if u is not None else None)
        )
    return UncertainNetwork(n_nodes=n_nodes, edges=edges)


# -- operations --------------------------------------------------------


def threshold_filter(
    candidate_edges: Iterable[tuple[int, int, float, float]], tau: float
) -> list[Edge]:
    """Keep candidate ``(src, dst, u, p)`` links whose u exceeds ``tau``.

    Used when ingesting inferred missing-friendship probabilities: only
    sufficiently likely links enter the network, as uncertain edges.
    """
    if not (0.0 <= tau <= 1.0):
        raise NetworkError(f"tau out of range: {tau}")
    return [
        Edge(src=src, dst=dst, p=p, u=u)
        for (src, dst, u, p) in candidate_edges
        if u > tau
    ]


def sample_instantiation(net: UncertainNetwork, rng: np.random.Generator) -> InstantiatedNetwork:
    """Resolve each uncertain edge independently: kept with probability u."""
    m = net.n_uncertain
    if m == 0:
        return InstantiatedNetwork(net, kept=0)
    keep = rng.random(m) < net.u_values
    kept = 0
    for i in range(m):
        if keep[i]:
            kept |= 1 << i
    return InstantiatedNetwork(net, kept=kept)


def instantiation_log_probability(net: UncertainNetwork, kept: int) -> float:
    """Exact log-probability of a determinization under the edge priors."""
    if kept < 0 or kept >> net.n_uncertain:
        raise NetworkError("kept bitmask wider than the uncertain edge set")
    logp = 0.0
    for i, e in enumerate(net.uncertain_edges):
        logp += math.log(e.u) if (kept >> i) & 1 else math.log1p(-e.u)
    return logp


def apply_observations(
    net: UncertainNetwork, observations: Sequence[EdgeObservation]
) -> ObservationUpdate:
    """Fold resolved uncertain edges into the network.

    Edges observed to exist become certain (same p); edges observed to be
    absent are deleted.  Surviving uncertain edges are re-indexed, and the
    old->new map is returned so previously recorded observations stay
    interpretable.
    """
    seen: set[int] = set()
    for obs in observations:
        if not (0 <= obs.uncertain_edge_index < net.n_uncertain):
            raise NetworkError(f"uncertain edge index out of range: {obs.uncertain_edge_index}")
        if obs.uncertain_edge_index in seen:
            raise NetworkError(f"duplicate observation for edge {obs.uncertain_edge_index}")
        seen.add(obs.uncertain_edge_index)
    resolved = {obs.uncertain_edge_index: obs.exists for obs in observations}

    new_edges: list[Edge] = []
    index_map: dict[int, int] = {}
    next_index = 0
    unc_index = 0
    for e in net.edges:
        if e.certain:
            new_edges.append(e)
            continue
        i = unc_index
        unc_index += 1
        if i in resolved:
            if resolved[i]:
                new_edges.append(Edge(src=e.src, dst=e.dst, p=e.p, u=None))
            continue
        index_map[i] = next_index
        next_index += 1
        new_edges.append(e)
    updated = UncertainNetwork(n_nodes=net.n_nodes, edges=new_edges, labels=net.labels)
    return ObservationUpdate(network=updated, index_map=index_map)


def certainty_equivalent(net: UncertainNetwork) -> UncertainNetwork:
    """Replace each uncertain edge by a certain edge with p' = p * u."""
    edges = [
        e if e.certain else Edge(src=e.src, dst=e.dst, p=e.p * e.u, u=None)
        for e in net.edges
    ]
    return UncertainNetwork(n_nodes=net.n_nodes, edges=edges, labels=net.labels)


# -- synthetic generation ----------------------------------------------


def generate_watts_strogatz(
    n: int, k: int, beta: float, rng: np.random.Generator, p: float = 0.1
) -> UncertainNetwork:
    """Small-world ring-lattice-with-rewiring generator.

    Each node starts connected to ``k // 2`` neighbours on each side.  For
    odd ``k`` the remaining half-tie is realized by linking every
    even-indexed node to the node ``n // 2`` positions ahead, which keeps
    the average degree at k without double-creating ties (see README for
    the convention).  Every undirected tie is then rewired with
    probability ``beta`` (far endpoint replaced by a uniform non-duplicate
    non-self node) and finally emitted as two directed certain edges with
    propagation probability ``p``.
    """
    if n <= k:
        raise NetworkError(f"need n > k, got n={n}, k={k}")
    if k < 1:
        raise NetworkError("k must be >= 1")
    if not (0.0 <= beta <= 1.0):
        raise NetworkError(f"beta out of range: {beta}")

    ties: set[tuple[int, int]] = set()

    def norm(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    for i in range(n):
        for j in range(1, k // 2 + 1):
            ties.add(norm(i, (i + j) % n))
    if k % 2 == 1:
        for i in range(0, n, 2):
            ties.add(norm(i, (i + n // 2) % n))

    tie_list = sorted(ties)
    current = set(tie_list)
    for (a, b) in tie_list:
        if rng.random() < beta:
            current.discard((a, b))
            new = (a, b)
            for _ in range(10 * n):  # rejection sample a fresh endpoint
                c = int(rng.integers(n))
                if c != a and norm(a, c) not in current:
                    new = norm(a, c)
                    break
            current.add(new)
    final = sorted(current)

    edges = []
    for (a, b) in final:
        edges.append(Edge(src=a, dst=b, p=p))
        edges.append(Edge(src=b, dst=a, p=p))
    return UncertainNetwork(n_nodes=n, edges=edges)


def decorate_uniform(
    net: UncertainNetwork,
    p: float,
    u: float,
    uncertain_fraction: float,
    rng: np.random.Generator,
) -> UncertainNetwork:
    """Set p on every edge and mark a random fraction of edges uncertain with u."""
    if not (0.0 <= uncertain_fraction <= 1.0):
        raise NetworkError(f"uncertain_fraction out of range: {uncertain_fraction}")
    m = net.n_edges
    n_uncertain = int(round(uncertain_fraction * m))
    chosen = set(rng.choice(m, size=n_uncertain, replace=False).tolist()) if n_uncertain else set()
    edges = [
        Edge(src=e.src, dst=e.dst, p=p, u=u if i in chosen else None)
        for i, e in enumerate(net.edges)
    ]
    return UncertainNetwork(n_nodes=net.n_nodes, edges=edges, labels=net.labels)
