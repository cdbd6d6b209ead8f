import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import betweenness_brute
from prefnet import network as nw
from prefnet.distmodel import EdgeDistribution, discretize
from prefnet.network import Network, NetworkError
from prefnet.prefmath import perm_table


def _write(path, text):
    path.write_text("u,v,mu,sigma\n" + text)
    return path


def test_load_triangle(tmp_path):
    net = nw.load_network(_write(tmp_path / "t.csv", "0,1,0.2,0.1\n1,2,0.3,0.1\n2,0,0.1,0.05\n"))
    assert (net.n, net.m) == (3, 3)
    assert (net.edges[:, 0] < net.edges[:, 1]).all()


def test_load_rejects_bad_inputs(tmp_path):
    with pytest.raises(NetworkError, match="self-loop"):
        nw.load_network(_write(tmp_path / "a.csv", "0,0,0.2,0.1\n0,1,0.2,0.1\n"))
    with pytest.raises(NetworkError, match="disconnected"):
        nw.load_network(_write(tmp_path / "b.csv", "0,1,0.2,0.1\n2,3,0.2,0.1\n"))
    with pytest.raises(NetworkError, match="duplicate"):
        nw.load_network(_write(tmp_path / "c.csv", "0,1,0.2,0.1\n1,0,0.2,0.1\n"))
    with pytest.raises(NetworkError):
        nw.load_network(_write(tmp_path / "d.csv", "0,1,1.5,0.1\n"))
    (tmp_path / "e.csv").write_text("a,b\n0,1\n")
    with pytest.raises(NetworkError, match="header"):
        nw.load_network(tmp_path / "e.csv")


def test_giant_component_extraction(tmp_path):
    path = _write(tmp_path / "g.csv", "0,1,0.2,0.1\n1,2,0.2,0.1\n3,4,0.2,0.1\n")
    net = nw.load_network(path, giant_component=True)
    assert (net.n, net.m) == (3, 2)


def test_write_read_round_trip(tmp_path):
    net = nw.generate_synthetic("ba", 30, {"m": 2}, seed=4)
    nw.write_network(net, tmp_path / "n.csv")
    back = nw.load_network(tmp_path / "n.csv")
    assert np.array_equal(back.edges, net.edges)
    assert np.allclose(back.mu, net.mu) and np.allclose(back.sigma, net.sigma)


@pytest.mark.parametrize("model,params", [("ws", {"k": 6}), ("ba", {"m": 3}), ("er", {"avg_degree": 1.5})])
def test_synthetic_networks_connected_and_seeded(model, params):
    a = nw.generate_synthetic(model, 120, params, seed=9)
    b = nw.generate_synthetic(model, 120, params, seed=9)
    assert nw.n_components(a.n, a.edges) == 1
    assert np.array_equal(a.edges, b.edges) and np.array_equal(a.mu, b.mu)


def test_preset_edge_law():
    net = nw.generate_synthetic("ws", 400, {"k": 10}, "facebook-all", seed=1)
    assert net.mu.min() >= 0.02 and net.mu.max() <= 0.6
    assert net.mu.mean() == pytest.approx(0.24, abs=0.01)
    assert net.sigma.min() >= 0.05 and net.sigma.max() <= 0.15
    personal = nw.generate_synthetic("ws", 400, {"k": 10}, "facebook-personal", seed=1)
    social = nw.generate_synthetic("ws", 400, {"k": 10}, "facebook-social", seed=1)
    assert social.mu.mean() < net.mu.mean() < personal.mu.mean()


def test_synthetic_errors():
    with pytest.raises(NetworkError):
        nw.generate_synthetic("ws", 1)
    with pytest.raises(NetworkError):
        nw.generate_synthetic("lattice", 10)
    with pytest.raises(NetworkError):
        nw.generate_synthetic("ws", 10, preset="nope")


def _path_net(n, mu=0.2):
    edges = [(i, i + 1) for i in range(n - 1)]
    mu = np.broadcast_to(mu, len(edges)).astype(float)
    return Network(n, edges, mu, np.full(len(edges), 0.1))


def test_fit_constant_pair():
    net = _path_net(2)
    pt = perm_table(5)
    a = pt.index(np.array([0, 1, 2, 3, 4]))
    b = pt.index(np.array([1, 0, 2, 3, 4]))
    idx = np.array([[a, b]] * 10)
    fit = nw.fit_edges_from_profiles(net, idx, r=5)
    assert fit.mu[0] == pytest.approx(0.1) and fit.sigma[0] == pytest.approx(0.005)


def test_fit_skips_sparse_pairs(caplog):
    net = _path_net(3)
    idx = np.full((10, 3), -1)
    idx[:, :2] = 0
    idx[:3, 2] = 5
    fit = nw.fit_edges_from_profiles(net, idx, r=5)
    assert (fit.mu[1], fit.sigma[1]) == (nw.DEFAULT_EDGE.mu, nw.DEFAULT_EDGE.sigma)
    assert fit.mu[0] == 0.0
    assert "fewer than" in caplog.text


def test_fit_recovers_known_edge():
    dist = discretize(EdgeDistribution(0.3, 0.1), 5)
    rng = np.random.default_rng(2)
    pt = perm_table(5)
    t = 10_000
    a = rng.integers(0, pt.size, t)
    k = rng.choice(11, size=t, p=dist.pmf)
    b = pt.sample_at(a, k, rng)
    fit = nw.fit_edges_from_profiles(_path_net(2), np.stack([a, b], axis=1), r=5)
    assert abs(fit.mu[0] - 0.3) <= 0.02 and abs(fit.sigma[0] - 0.1) <= 0.01


@given(st.permutations(range(12)))
def test_fit_ignores_topic_order(order):
    rng = np.random.default_rng(0)
    idx = rng.integers(0, 120, (12, 4))
    net = Network(4, [(0, 1), (1, 2), (2, 3), (0, 3)], [0.2] * 4, [0.1] * 4)
    a = nw.fit_edges_from_profiles(net, idx, r=5)
    b = nw.fit_edges_from_profiles(net, idx[list(order)], r=5)
    assert np.array_equal(a.mu, b.mu) and np.array_equal(a.sigma, b.sigma)


def test_degree_centrality():
    star = Network(5, [(0, i) for i in range(1, 5)], [0.3] * 4, [0.1] * 4)
    assert nw.degree_centrality_ranking(star, 1) == [0]
    assert sorted(nw.degree_centrality_ranking(star, 5)) == list(range(5))
    # hand sums of 1 - mu; nodes 2 and 3 tie and go by id
    path = _path_net(5, np.array([0.1, 0.3, 0.5, 0.3]))
    assert nw.weighted_degree(path) == pytest.approx([0.9, 1.6, 1.2, 1.2, 0.7])
    assert nw.degree_centrality_ranking(path, 5) == [1, 2, 3, 0, 4]
    with pytest.raises(NetworkError):
        nw.degree_centrality_ranking(path, 0)


def test_betweenness_simple_cases():
    s = nw.betweenness_scores(_path_net(3))
    assert s.tolist() == [0.0, 1.0, 0.0]
    k5 = Network(5, [(i, j) for i in range(5) for j in range(i + 1, 5)], [0.2] * 10, [0.1] * 10)
    assert np.allclose(nw.betweenness_scores(k5), 0.0)
    assert nw.betweenness_ranking(k5, 3) == [0, 1, 2]


@st.composite
def small_graphs(draw):
    n = draw(st.integers(3, 7))
    order = draw(st.permutations(range(n)))
    edges = {tuple(sorted((order[i], order[draw(st.integers(0, i - 1))]))) for i in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=6))
    edges |= {tuple(sorted(e)) for e in extra if e[0] != e[1]}
    edges = sorted(edges)
    mu = [draw(st.sampled_from([0.1, 0.2, 0.3, 0.4])) for _ in edges]
    return n, edges, mu


@given(small_graphs())
def test_betweenness_matches_path_enumeration(g):
    n, edges, mu = g
    net = Network(n, edges, mu, [0.1] * len(edges))
    want = betweenness_brute(n, {e: m for e, m in zip(edges, mu)})
    assert nw.betweenness_scores(net) == pytest.approx(want, abs=1e-9)


def test_network_helpers():
    net = _path_net(4)
    assert net.edge_index()[(1, 2)] == 1
    assert net.to_networkx().number_of_edges() == 3
    moved = net.with_params([0.5] * 3, [0.2] * 3)
    assert moved.mu.tolist() == [0.5] * 3
    with pytest.raises(NetworkError):
        Network(3, [(0, 1)], [0.2], [0.1])
