import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dime.network import (
    Edge,
    EdgeObservation,
    NetworkError,
    UncertainNetwork,
    apply_observations,
    certainty_equivalent,
    decorate_uniform,
    generate_watts_strogatz,
    instantiation_log_probability,
    load_network,
    network_csv,
    network_document,
    network_from_csv,
    network_json,
    sample_instantiation,
    threshold_filter,
)
from dime.seeding import make_rng


def test_load_empty_document():
    net = load_network({"n_nodes": 0, "edges": []})
    assert net.n_nodes == 0
    assert net.n_edges == 0


def test_load_demo_network(demo_network):
    assert demo_network.n_nodes == 6
    assert demo_network.n_edges == 7
    assert len(demo_network.certain_edges) == 3
    assert demo_network.n_uncertain == 4
    assert demo_network.labels[0] == "A"


def test_load_rejects_out_of_range_p():
    doc = {"n_nodes": 2, "edges": [{"src": 0, "dst": 1, "p": 1.3}]}
    with pytest.raises(NetworkError):
        load_network(doc)


def test_load_rejects_duplicates_and_bad_ids():
    with pytest.raises(NetworkError, match="duplicate"):
        load_network({"n_nodes": 2, "edges": [
            {"src": 0, "dst": 1, "p": 0.5}, {"src": 0, "dst": 1, "p": 0.2}]})
    with pytest.raises(NetworkError, match="n_nodes"):
        load_network({"n_nodes": 2, "edges": [{"src": 0, "dst": 5, "p": 0.5}]})
    with pytest.raises(NetworkError):
        load_network(b"{not json")


def test_load_normalizes_degenerate_u():
    doc = {"n_nodes": 3, "edges": [
        {"src": 0, "dst": 1, "p": 0.5, "u": 1.0},
        {"src": 1, "dst": 2, "p": 0.5, "u": 0.0},
    ]}
    with pytest.warns(UserWarning, match="dropped 1"):
        net = load_network(doc)
    assert net.n_edges == 1
    assert net.edges[0].certain


def test_roundtrip_demo(demo_network, demo_document):
    assert network_document(demo_network) == demo_document
    again = load_network(network_json(demo_network))
    assert again == demo_network


edge_strategy = st.builds(
    lambda src, dst, p, u: (src, dst, p, u),
    st.integers(0, 9), st.integers(0, 9),
    st.floats(0, 1, allow_nan=False),
    st.one_of(st.none(), st.floats(0.01, 0.99, allow_nan=False)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(edge_strategy, max_size=25))
def test_roundtrip_random_networks(raw_edges):
    edges = []
    seen = set()
    for src, dst, p, u in raw_edges:
        if src == dst or (src, dst) in seen:
            continue
        seen.add((src, dst))
        edges.append(Edge(src=src, dst=dst, p=p, u=u))
    net = UncertainNetwork(n_nodes=10, edges=edges)
    assert load_network(network_json(net)) == net
    again = network_from_csv(network_csv(net), n_nodes=10)
    assert again.edges == net.edges
    # uncertain ordering is preserved exactly
    assert [e.u for e in again.uncertain_edges] == [e.u for e in net.uncertain_edges]


def test_threshold_filter_basics():
    cands = [(0, 1, 0.2, 0.5), (1, 2, 0.6, 0.5), (2, 3, 0.9, 0.5)]
    kept = threshold_filter(cands, 0.5)
    assert [e.u for e in kept] == [0.6, 0.9]
    assert all(not e.certain for e in kept)
    assert threshold_filter(cands, 1.0) == []
    assert len(threshold_filter(cands, 0.0)) == 3


def test_sample_instantiation_frequency():
    net = UncertainNetwork(2, [Edge(0, 1, 0.5, u=0.6)])
    rng = make_rng(7)
    keeps = sum(sample_instantiation(net, rng).kept & 1 for _ in range(10_000))
    assert 0.58 <= keeps / 10_000 <= 0.62


def test_sample_instantiation_near_certain_edge():
    net = UncertainNetwork(2, [Edge(0, 1, 0.5, u=1 - 1e-12)])
    rng = make_rng(8)
    keeps = sum(sample_instantiation(net, rng).kept & 1 for _ in range(10_000))
    assert keeps >= 9_999


def test_sample_instantiation_no_uncertainty():
    net = UncertainNetwork(2, [Edge(0, 1, 0.5)])
    inst = sample_instantiation(net, make_rng(0))
    assert inst.kept == 0
    assert inst.log_probability == 0.0
    assert inst.existing_edges == net.edges


def test_per_edge_keep_frequency_bound():
    us = [0.1, 0.35, 0.6, 0.9]
    net = UncertainNetwork(
        5, [Edge(i, (i + 1) % 5, 0.5, u=u) for i, u in enumerate(us)]
    )
    rng = make_rng(3)
    samples = 4000
    counts = np.zeros(4)
    for _ in range(samples):
        kept = sample_instantiation(net, rng).kept
        for i in range(4):
            counts[i] += (kept >> i) & 1
    for i, u in enumerate(us):
        assert abs(counts[i] / samples - u) <= 4 * math.sqrt(u * (1 - u) / samples)


def test_instantiation_log_probability():
    net = UncertainNetwork(3, [Edge(0, 1, 0.5, u=0.6), Edge(1, 2, 0.5, u=0.6)])
    assert instantiation_log_probability(net, 0b11) == pytest.approx(math.log(0.36))
    assert instantiation_log_probability(net, 0b00) == pytest.approx(math.log(0.16))
    one = UncertainNetwork(2, [Edge(0, 1, 0.5, u=0.6)])
    assert instantiation_log_probability(one, 0b0) == pytest.approx(math.log(0.4))
    empty = UncertainNetwork(2, [Edge(0, 1, 0.5)])
    assert instantiation_log_probability(empty, 0) == 0.0


def test_apply_observations_demo(demo_network):
    # resolve edge number 4 (uncertain index 1) as present, number 5 (index 2) absent
    update = apply_observations(
        demo_network,
        [EdgeObservation(1, True), EdgeObservation(2, False)],
    )
    net = update.network
    assert len(net.certain_edges) == 4
    assert net.n_uncertain == 2
    assert update.index_map == {0: 0, 3: 1}
    # p values never change
    assert {(e.src, e.dst, e.p) for e in net.edges} <= {
        (e.src, e.dst, e.p) for e in demo_network.edges
    }


def test_apply_observations_identity_and_exhaustion(demo_network):
    same = apply_observations(demo_network, [])
    assert same.network == demo_network
    assert same.index_map == {0: 0, 1: 1, 2: 2, 3: 3}

    all_absent = apply_observations(
        demo_network, [EdgeObservation(i, False) for i in range(4)]
    )
    assert all_absent.network.n_uncertain == 0
    assert all_absent.network.n_edges == 3


def test_apply_observations_errors(demo_network):
    with pytest.raises(NetworkError, match="duplicate"):
        apply_observations(
            demo_network, [EdgeObservation(1, True), EdgeObservation(1, False)]
        )
    with pytest.raises(NetworkError, match="out of range"):
        apply_observations(demo_network, [EdgeObservation(9, True)])


def test_certainty_equivalent(demo_network):
    ce = certainty_equivalent(demo_network)
    assert ce.n_uncertain == 0
    assert ce.n_edges == demo_network.n_edges
    assert ce.n_nodes == demo_network.n_nodes
    by_pair = {(e.src, e.dst): e for e in ce.edges}
    for e in demo_network.edges:
        expected = e.p if e.certain else e.p * e.u
        assert by_pair[(e.src, e.dst)].p == pytest.approx(expected)


def test_watts_strogatz_ring_lattice():
    net = generate_watts_strogatz(10, 4, 0.0, make_rng(0))
    deg = net.out_degree
    assert all(d == 4 for d in deg)


def test_watts_strogatz_validation():
    with pytest.raises(NetworkError):
        generate_watts_strogatz(4, 6, 0.1, make_rng(0))
    with pytest.raises(NetworkError):
        generate_watts_strogatz(10, 4, 1.5, make_rng(0))


def _connected(net: UncertainNetwork) -> bool:
    adj = {v: set() for v in range(net.n_nodes)}
    for e in net.edges:
        adj[e.src].add(e.dst)
        adj[e.dst].add(e.src)
    seen = {0}
    frontier = [0]
    while frontier:
        v = frontier.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                frontier.append(u)
    return len(seen) == net.n_nodes


def test_watts_strogatz_connectivity():
    connected = sum(
        _connected(generate_watts_strogatz(60, 6, 0.1, make_rng(seed)))
        for seed in range(100)
    )
    assert connected >= 95


def test_decorate_uniform():
    rng = make_rng(5)
    net = generate_watts_strogatz(20, 4, 0.1, rng)
    dec = decorate_uniform(net, p=0.1, u=0.6, uncertain_fraction=0.3, rng=rng)
    assert dec.n_edges == net.n_edges
    assert all(e.p == 0.1 for e in dec.edges)
    assert dec.n_uncertain == round(0.3 * net.n_edges)
    assert all(e.u == 0.6 for e in dec.uncertain_edges)
    none = decorate_uniform(net, p=0.2, u=0.5, uncertain_fraction=0.0, rng=rng)
    assert none.n_uncertain == 0


def test_edge_validation():
    with pytest.raises(NetworkError):
        Edge(0, 0, 0.5)
    with pytest.raises(NetworkError):
        Edge(0, 1, 0.5, u=1.0)
    with pytest.raises(NetworkError):
        Edge(0, 1, -0.1)
