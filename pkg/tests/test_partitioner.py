import itertools

import numpy as np
import pytest

from dime.network import Edge, NetworkError, UncertainNetwork, decorate_uniform, generate_watts_strogatz
from dime.partitioner import (
    cut_weight,
    edge_partition_weight,
    induced_subnetwork,
    partition,
    random_balanced_assignment,
)
from dime.seeding import make_rng


def undirected(n, pairs, p=0.5):
    edges = []
    for a, b in pairs:
        edges.append(Edge(a, b, p))
        edges.append(Edge(b, a, p))
    return UncertainNetwork(n, edges)


def two_triangles():
    return undirected(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])


def test_partition_weights():
    assert edge_partition_weight(Edge(0, 1, 0.3)) == 1.0
    assert edge_partition_weight(Edge(0, 1, 0.3, u=0.7)) == 0.7


def test_disconnected_optimum():
    net = two_triangles()
    parts = partition(net, 2, rng=make_rng(0))
    assert sorted(map(sorted, parts.part_nodes)) == [[0, 1, 2], [3, 4, 5]]
    assert cut_weight(net, parts.assignment) == 0.0


def test_path_split_matches_brute_force():
    net = undirected(4, [(0, 1), (1, 2), (2, 3)])
    parts = partition(net, 2, imbalance=0.0, rng=make_rng(1))
    got = cut_weight(net, parts.assignment)

    best = min(
        cut_weight(net, assign)
        for assign in itertools.product([0, 1], repeat=4)
        if 0 < sum(assign) < 4 and max(sum(assign), 4 - sum(assign)) <= 2
    )
    assert best == pytest.approx(2.0)  # one undirected edge = weight 2
    assert got == pytest.approx(best)


def test_k_one_and_validation():
    net = two_triangles()
    parts = partition(net, 1, rng=make_rng(0))
    assert set(parts.assignment) == {0}
    assert cut_weight(net, parts.assignment) == 0.0
    with pytest.raises(NetworkError):
        partition(net, 7, rng=make_rng(0))


def test_balance_and_nonempty_on_ws_graphs():
    rng = make_rng(10)
    for seed in range(25):
        net = generate_watts_strogatz(60, 6, 0.1, make_rng(seed))
        net = decorate_uniform(net, 0.1, 0.6, 0.3, rng)
        for k in (2, 4, 7):
            parts = partition(net, k, rng=make_rng(seed + 1000 * k))
            sizes = [len(p) for p in parts.part_nodes]
            assert min(sizes) >= 1
            assert max(sizes) <= parts.capacity()


def test_beats_random_assignment_on_average():
    deltas = []
    for seed in range(30):
        net = decorate_uniform(
            generate_watts_strogatz(60, 6, 0.1, make_rng(seed)),
            0.1, 0.6, 0.3, make_rng(seed + 500),
        )
        parts = partition(net, 4, rng=make_rng(seed))
        rand_cut = cut_weight(net, random_balanced_assignment(60, 4, make_rng(seed + 99)))
        deltas.append(rand_cut - cut_weight(net, parts.assignment))
    assert np.mean(deltas) > 0


def test_deterministic_given_seed():
    net = decorate_uniform(
        generate_watts_strogatz(40, 6, 0.1, make_rng(3)), 0.1, 0.6, 0.3, make_rng(4)
    )
    a = partition(net, 3, rng=make_rng(5))
    b = partition(net, 3, rng=make_rng(5))
    assert a.assignment == b.assignment


def test_induced_subnetwork_roundtrip(demo_network):
    parts = partition(demo_network, 1, rng=make_rng(0))
    view = induced_subnetwork(demo_network, parts, 0)
    assert view.network == demo_network
    assert view.nodes == tuple(range(6))


def test_induced_subnetwork_triangles():
    net = two_triangles()
    parts = partition(net, 2, rng=make_rng(0))
    views = [induced_subnetwork(net, parts, i) for i in range(2)]
    for view in views:
        assert view.network.n_nodes == 3
        assert view.network.n_edges == 6  # 3 undirected ties


def test_edge_conservation_across_parts(demo_network):
    parts = partition(demo_network, 2, rng=make_rng(2))
    internal = sum(
        induced_subnetwork(demo_network, parts, i).network.n_edges for i in range(2)
    )
    cut_edges = sum(
        1 for e in demo_network.edges if parts.assignment[e.src] != parts.assignment[e.dst]
    )
    assert internal + cut_edges == demo_network.n_edges


def test_induced_subnetwork_uncertain_order(demo_network):
    parts = partition(demo_network, 2, rng=make_rng(2))
    for i in range(2):
        view = induced_subnetwork(demo_network, parts, i)
        local_us = [e.u for e in view.network.uncertain_edges]
        global_pairs = [
            (view.nodes[e.src], view.nodes[e.dst]) for e in view.network.uncertain_edges
        ]
        global_order = [
            (e.src, e.dst) for e in demo_network.uncertain_edges
            if (e.src, e.dst) in set(global_pairs)
        ]
        assert global_pairs == global_order
        assert all(u is not None for u in local_us)
