import itertools
import math

import numpy as np
import pytest

from dime.diffusion import (
    InstanceTooLargeError,
    diffuse_one_step,
    diffuse_steps,
    exact_expected_influence,
    generative_step,
    nodes_to_mask,
)
from dime.network import Edge, InstantiatedNetwork, UncertainNetwork
from dime.pomdp import ActionSet, InitialBelief, PomdpState, sample_initial_state
from dime.seeding import make_rng


def certain_net(n, pairs, p=1.0):
    return UncertainNetwork(n, [Edge(a, b, p) for a, b in pairs])


def inst_of(net):
    return InstantiatedNetwork(net, kept=(1 << net.n_uncertain) - 1)


def test_one_step_fixed_point():
    net = certain_net(3, [(0, 1), (1, 2)])
    inst = inst_of(net)
    w = np.ones(3, dtype=bool)
    out = diffuse_one_step(inst, w, make_rng(0))
    assert out.all()


def test_one_step_deterministic_edge():
    inst = inst_of(certain_net(2, [(0, 1)], p=1.0))
    w = nodes_to_mask([0], 2)
    out = diffuse_one_step(inst, w, make_rng(0))
    assert out.tolist() == [True, True]


def test_one_step_binomial_frequency():
    inst = inst_of(certain_net(2, [(0, 1)], p=0.5))
    rng = make_rng(9)
    w = nodes_to_mask([0], 2)
    hits = sum(diffuse_one_step(inst, w, rng)[1] for _ in range(10_000))
    assert 0.48 <= hits / 10_000 <= 0.52


def test_multi_step_chains():
    inst = inst_of(certain_net(3, [(0, 1), (1, 2)]))
    w = nodes_to_mask([0], 3)
    assert diffuse_steps(inst, w, 1, make_rng(0)).sum() == 2
    assert diffuse_steps(inst, w, 2, make_rng(0)).sum() == 3
    # two steps cannot traverse three hops
    path4 = inst_of(certain_net(4, [(0, 1), (1, 2), (2, 3)]))
    out = diffuse_steps(path4, nodes_to_mask([0], 4), 2, make_rng(0))
    assert not out[3]
    assert out.sum() == 3


def test_monotone_under_simulation(rng):
    net = certain_net(8, [(i, (i + 3) % 8) for i in range(8)], p=0.4)
    inst = inst_of(net)
    w = nodes_to_mask([0, 5], 8)
    for _ in range(30):
        nxt = diffuse_one_step(inst, w, rng)
        assert (nxt | w).tolist() == nxt.tolist()
        w = nxt


def test_determinism_same_seed():
    net = certain_net(10, [(i, (i + 1) % 10) for i in range(10)], p=0.3)
    inst = inst_of(net)
    w = nodes_to_mask([0], 10)
    a = diffuse_steps(inst, w, 5, make_rng(42))
    b = diffuse_steps(inst, w, 5, make_rng(42))
    assert a.tolist() == b.tolist()


# -- generative model ------------------------------------------------------


def test_generative_saturation(demo_network):
    state = PomdpState(w=0, f=0b1010)
    action = ActionSet(range(6))
    sample = generative_step(demo_network, state, action, 1, make_rng(0))
    assert sample.reward == 6
    assert sample.next_state.influenced_count() == 6
    # every uncertain edge leaves some node, so all are observed
    assert sample.observation.indices() == (0, 1, 2, 3)
    assert [x for _, x in sample.observation.observed] == [False, True, False, True]


def test_generative_demo_observation(demo_network):
    state = PomdpState(w=0, f=0b0110)
    sample = generative_step(demo_network, state, ActionSet([1, 2]), 1, make_rng(1))
    assert sample.observation.indices() == (1, 2)


def test_generative_no_edges_reward():
    net = UncertainNetwork(5, [])
    state = PomdpState(w=0, f=0)
    sample = generative_step(net, state, ActionSet([0, 3]), 4, make_rng(0), k=2)
    assert sample.reward == 2
    with pytest.raises(ValueError, match="K"):
        generative_step(net, state, ActionSet([0]), 1, make_rng(0), k=2)


def test_initial_belief_sampling(demo_network):
    belief = InitialBelief(demo_network)
    rng = make_rng(4)
    count_first = 0
    for _ in range(10_000):
        s = sample_initial_state(belief, rng)
        assert s.influenced_count() == 0
        count_first += s.f & 1
    assert 0.58 <= count_first / 10_000 <= 0.62


# -- exact oracle -----------------------------------------------------------


def path_with_uncertainty(eps):
    return UncertainNetwork(4, [
        Edge(0, 1, 1.0, u=1.0 - eps),
        Edge(1, 2, 1.0, u=eps),
        Edge(2, 3, 1.0, u=eps),
    ])


def conditioned_on_first(eps):
    # first edge resolved to exist: certain edge, two uncertain remain
    return UncertainNetwork(4, [
        Edge(0, 1, 1.0),
        Edge(1, 2, 1.0, u=eps),
        Edge(2, 3, 1.0, u=eps),
    ])


def test_exact_path_conditioned_values():
    eps = 0.01
    net = conditioned_on_first(eps)
    assert exact_expected_influence(net, [ActionSet([0, 1])], 1, 2) == pytest.approx(
        2 + eps + eps**2, abs=1e-12
    )
    assert exact_expected_influence(net, [ActionSet([0])], 1, 2) == pytest.approx(
        2 + eps, abs=1e-12
    )


def test_exact_no_spread_when_p_zero():
    net = certain_net(5, [(0, 1), (1, 2)], p=0.0)
    got = exact_expected_influence(net, [ActionSet([0, 3])], 1, 3)
    assert got == pytest.approx(2.0)


def test_exact_caps_and_validation():
    big_unc = UncertainNetwork(
        20, [Edge(0, i, 1.0, u=0.5) for i in range(1, 15)]
    )
    with pytest.raises(InstanceTooLargeError):
        exact_expected_influence(big_unc, [ActionSet([0])], 1, 1)
    stochastic = certain_net(10, [(i, (i + 1) % 10) for i in range(10)], p=0.5)
    with pytest.raises(InstanceTooLargeError):
        exact_expected_influence(stochastic, [ActionSet([0])] * 3, 3, 1)
    with pytest.raises(ValueError, match="rounds"):
        exact_expected_influence(stochastic, [ActionSet([0])], 2, 1)


def test_exact_against_hand_computation():
    # two parallel edges into one target, p = 0.5 each, one step:
    # P(influenced) = 1 - 0.25
    net = certain_net(3, [(0, 2), (1, 2)], p=0.5)
    got = exact_expected_influence(net, [ActionSet([0, 1])], 1, 1)
    assert got == pytest.approx(2 + 0.75)
    # retry over two steps: 1 - (1-0.5)^2 per source, both sources
    got2 = exact_expected_influence(net, [ActionSet([0, 1])], 1, 2)
    assert got2 == pytest.approx(2 + (1 - 0.25**2))


# -- retry-variant equivalence ---------------------------------------------
#
# Two independently coded exact enumerators:
#   A: every influencer keeps a per-edge "succeeded" flag and stops
#      attempting that edge after its own success;
#   B: every influenced node attempts every currently un-influenced
#      out-neighbour each step.
# Influenced nodes never revert, so the final-state distributions must be
# identical.


def _enumerate_A(edges, ps, n, w0, steps):
    """Formulation A: per-edge done flags, attempts gated by own success."""
    def go(w, done, steps_left, memo):
        if steps_left == 0:
            return {w: 1.0}
        key = (w, done, steps_left)
        if key in memo:
            return memo[key]
        active = [
            i for i, (src, dst) in enumerate(edges)
            if (w >> src) & 1 and not (done >> i) & 1
        ]
        if not any(not (w >> edges[i][1]) & 1 for i in active):
            # no live target can ever change: final
            memo[key] = {w: 1.0}
            return memo[key]
        dist: dict[int, float] = {}
        for outcome in itertools.product([0, 1], repeat=len(active)):
            prob = 1.0
            w2, done2 = w, done
            for bit, i in zip(outcome, active):
                p = ps[i]
                if bit:
                    prob *= p
                    done2 |= 1 << i
                    w2 |= 1 << edges[i][1]
                else:
                    prob *= 1.0 - p
            if prob == 0.0:
                continue
            for mask, pr in go(w2, done2, steps_left - 1, memo).items():
                dist[mask] = dist.get(mask, 0.0) + prob * pr
        memo[key] = dist
        return dist

    return go(w0, 0, steps, {})


def _enumerate_B(edges, ps, n, w0, steps):
    """Formulation B: attempts on every un-influenced out-neighbour."""
    def go(w, steps_left, memo):
        if steps_left == 0:
            return {w: 1.0}
        if (w, steps_left) in memo:
            return memo[(w, steps_left)]
        active = [
            i for i, (src, dst) in enumerate(edges)
            if (w >> src) & 1 and not (w >> dst) & 1
        ]
        if not active:
            memo[(w, steps_left)] = {w: 1.0}
            return memo[(w, steps_left)]
        dist: dict[int, float] = {}
        for outcome in itertools.product([0, 1], repeat=len(active)):
            prob = 1.0
            w2 = w
            for bit, i in zip(outcome, active):
                p = ps[i]
                prob *= p if bit else (1.0 - p)
                if bit:
                    w2 |= 1 << edges[i][1]
            if prob == 0.0:
                continue
            for mask, pr in go(w2, steps_left - 1, memo).items():
                dist[mask] = dist.get(mask, 0.0) + prob * pr
        memo[(w, steps_left)] = dist
        return dist

    return go(w0, steps, {})


def _dists_equal(a, b, tol=1e-9):
    keys = set(a) | set(b)
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= tol for k in keys)


def all_digraphs(n):
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    for bits in range(1 << len(pairs)):
        yield [pairs[i] for i in range(len(pairs)) if (bits >> i) & 1]


def test_retry_equivalence_exhaustive_small():
    for n in (2, 3):
        for edges in all_digraphs(n):
            ps = [0.5] * len(edges)
            for steps in (1, 2, 3):
                a = _enumerate_A(edges, ps, n, 1, steps)
                b = _enumerate_B(edges, ps, n, 1, steps)
                assert _dists_equal(a, b), (n, edges, steps)


def test_retry_equivalence_all_four_node_graphs():
    for edges in all_digraphs(4):
        ps = [0.5] * len(edges)
        a = _enumerate_A(edges, ps, 4, 1, 3)
        b = _enumerate_B(edges, ps, 4, 1, 3)
        assert _dists_equal(a, b), edges


def test_retry_equivalence_random_probabilities():
    rng = make_rng(77)
    pairs = [(a, b) for a in range(4) for b in range(4) if a != b]
    for _ in range(40):
        m = int(rng.integers(1, 9))
        idx = rng.choice(len(pairs), size=m, replace=False)
        edges = [pairs[i] for i in sorted(idx)]
        ps = [float(x) for x in rng.random(m)]
        w0 = 1 | (1 << int(rng.integers(4)))
        for steps in (1, 2, 3):
            a = _enumerate_A(edges, ps, 4, w0, steps)
            b = _enumerate_B(edges, ps, 4, w0, steps)
            assert _dists_equal(a, b)


def test_exact_oracle_matches_independent_enumerator():
    # the production oracle groups coins per target; formulation B flips
    # them per edge -- same network, same answer
    edges = [(0, 1), (0, 2), (1, 2), (2, 3)]
    ps = [0.3, 0.8, 0.5, 0.9]
    net = UncertainNetwork(4, [Edge(a, b, p) for (a, b), p in zip(edges, ps)])
    for steps in (1, 2, 3):
        dist = _enumerate_B(edges, ps, 4, 0b1, steps)
        expected = sum(pr * bin(mask).count("1") for mask, pr in dist.items())
        got = exact_expected_influence(net, [ActionSet([0])], 1, steps)
        assert got == pytest.approx(expected, abs=1e-12)


# -- Monte-Carlo consistency -------------------------------------------------


def mc_consistency_instances():
    eps = 0.25
    return [
        ("single-edge", UncertainNetwork(2, [Edge(0, 1, 0.5, u=0.6)]),
         [ActionSet([0])], 1, 1),
        ("certain-pair", certain_net(3, [(0, 2), (1, 2)], p=0.5),
         [ActionSet([0, 1])], 1, 2),
        ("uncertain-path", path_with_uncertainty(eps), [ActionSet([0])], 1, 2),
        ("two-round", UncertainNetwork(5, [
            Edge(0, 1, 0.4), Edge(1, 2, 0.7, u=0.5), Edge(2, 3, 1.0), Edge(3, 4, 0.3, u=0.3),
        ]), [ActionSet([0]), ActionSet([2])], 2, 2),
        ("no-edges", UncertainNetwork(4, []), [ActionSet([1, 2])], 1, 3),
    ]


def run_mc_consistency(samples: int, seed: int = 1234) -> None:
    for name, net, actions, t, length in mc_consistency_instances():
        exact = exact_expected_influence(net, actions, t, length)
        rng = make_rng(seed)
        belief = InitialBelief(net)
        totals = np.zeros(samples)
        k = len(actions[0])
        for i in range(samples):
            state = sample_initial_state(belief, rng)
            for action in actions:
                sample = generative_step(net, state, action, length, rng, k=k)
                state = sample.next_state
            totals[i] = state.influenced_count()
        mean = totals.mean()
        se = totals.std(ddof=1) / math.sqrt(samples)
        assert abs(mean - exact) <= max(3 * se, 1e-9), (
            f"{name}: mc={mean:.4f} exact={exact:.4f} se={se:.5f}"
        )


def test_mc_consistency_quick():
    run_mc_consistency(samples=20_000)
