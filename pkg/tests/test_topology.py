import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualauction import topology
from dualauction.errors import ConfigError


def test_er_complete_graph():
    g = topology.generate_er(4, 1.0, seed=3)
    assert g.edge_count == 6


def test_er_zero_probability_repaired_to_spanning_tree():
    g = topology.generate_er(10, 0.0, seed=7)
    assert g.is_connected()
    assert g.edge_count == 9


def test_er_edge_count_binomial():
    g = topology.generate_er(50, 0.2, seed=1)
    mean, sigma = 245, math.sqrt(1225 * 0.2 * 0.8)
    assert abs(g.edge_count - mean) <= 3 * sigma


def test_er_mean_edges_over_seeds():
    counts = [topology.generate_er(50, 0.2, seed=s).edge_count for s in range(1000)]
    # connectivity repair adds at most a handful of edges at this density
    assert abs(sum(counts) / len(counts) - 245) < 1.5


def test_er_rejects_tiny_graph():
    with pytest.raises(ConfigError):
        topology.generate_er(1, 0.5, seed=1)


def test_ba_edge_count():
    g = topology.generate_ba(30, 2, seed=3)
    assert g.edge_count == 3 + 27 * 2


def test_ba_rejects_small_n():
    with pytest.raises(ConfigError):
        topology.generate_ba(5, 4, seed=1)


def test_ba_has_hubs():
    for seed in range(100):
        g = topology.generate_ba(100, 2, seed=seed)
        degrees = sorted(g.degree(u) for u in range(100))
        assert degrees[-1] > degrees[50]


def test_ws_lattice():
    g = topology.generate_ws(10, 2, 0.0, seed=1)
    assert g.edges() == sorted([(i, i + 1) for i in range(9)] + [(0, 9)])
    g = topology.generate_ws(20, 4, 0.0, seed=1)
    assert all(g.degree(u) == 4 for u in range(20))
    assert g.edge_count == 40


def test_ws_rewired_keeps_edges():
    g = topology.generate_ws(50, 4, 0.3, seed=9)
    assert g.edge_count == 100
    assert g.is_connected()


def test_ws_rejects_odd_k():
    with pytest.raises(ConfigError):
        topology.generate_ws(20, 3, 0.1, seed=1)


def test_edge_list_round_trip(tmp_path):
    g = topology.generate_ba(25, 2, seed=4)
    path = tmp_path / "g.txt"
    g.save(path)
    h = topology.Graph.load(path)
    assert h.edges() == g.edges()


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(["ER", "BA", "WS"]), n=st.integers(5, 60), seed=st.integers(0, 10**6))
def test_generators_symmetric_loop_free_reproducible(kind, n, seed):
    g = topology.generate(kind, n, seed)
    for u in range(n):
        assert u not in g.adjacency[u]
        for v in g.adjacency[u]:
            assert u in g.adjacency[v]
    assert g.is_connected()
    assert topology.generate(kind, n, seed).to_edge_list() == g.to_edge_list()


def test_roles_counts_and_hash_power():
    g = topology.generate_er(100, 0.1, seed=1)
    roles = topology.assign_roles(g, 0.2, topology.CostParams(), seed=1)
    full = [r for r in roles.values() if r.is_full]
    assert len(full) == 20
    g20 = topology.generate_er(20, 0.1, seed=1)
    full20 = [r for r in topology.assign_roles(g20, 0.2, topology.CostParams(), seed=2).values() if r.is_full]
    assert len(full20) == 4
    assert all(r.hash_power == 0.25 for r in full20)


def test_single_full_node():
    g = topology.generate_er(5, 0.5, seed=1)
    full = [r for r in topology.assign_roles(g, 0.2, topology.CostParams(), seed=4).values() if r.is_full]
    assert len(full) == 1 and full[0].hash_power == 1.0


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 120), f=st.sampled_from([0.05, 0.1, 0.2, 0.3, 0.5, 0.9]), seed=st.integers(0, 10**6))
def test_roles_invariants(n, f, seed):
    g = topology.generate_er(n, 0.1, seed)
    k = topology.full_node_count(n, f)
    if k >= n:
        return
    roles = topology.assign_roles(g, f, topology.CostParams(relay_std=5.0, validation_std=20.0), seed)
    full = [r for r in roles.values() if r.is_full]
    assert len(full) == math.ceil(round(n * f, 9))
    assert abs(sum(r.hash_power for r in full) - 1.0) <= 1e-12
    assert all(r.relay_cost > 0 for r in roles.values())
    assert all(r.validation_cost > 0 for r in full)


def test_hash_override():
    g = topology.generate_er(20, 0.1, seed=1)
    roles = topology.assign_roles(g, 0.2, topology.CostParams(), seed=1)
    miner = min(u for u, r in roles.items() if r.is_full)
    roles = topology.assign_roles(g, 0.2, topology.CostParams(), seed=1, hash_overrides={miner: 0.4})
    assert roles[miner].hash_power == 0.4
    assert abs(sum(r.hash_power for r in roles.values()) - 1.0) < 1e-12
