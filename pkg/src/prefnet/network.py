"""Social graph with per-edge distance distributions.

Edges carry the parent (mu, sigma) of the discrete truncated Gaussian that
models the normalized Kendall-Tau distance between the two endpoints'
preferences.  Networks are immutable once built.
"""

from __future__ import annotations

import csv
import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import distmodel
from ._random import derive_rng, derive_seed
from .distmodel import EdgeDistribution

log = logging.getLogger(__name__)

MIN_TOPICS = 6
DEFAULT_EDGE = EdgeDistribution(0.24, 0.10)


class NetworkError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Network:
    n: int
    edges: np.ndarray   # (m, 2), u < v
    mu: np.ndarray      # (m,)
    sigma: np.ndarray   # (m,)
    neighbors: tuple = field(init=False, repr=False)
    incident: tuple = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        mu = np.asarray(self.mu, dtype=float).ravel()
        sigma = np.asarray(self.sigma, dtype=float).ravel()
        if not (len(edges) == len(mu) == len(sigma)):
            raise NetworkError("edges, mu and sigma must have equal length")
        if self.n < 1:
            raise NetworkError("a network needs at least one node")
        if len(edges) and (edges.min() < 0 or edges.max() >= self.n):
            raise NetworkError(f"node ids must lie in 0..{self.n - 1}")
        if (edges[:, 0] == edges[:, 1]).any():
            u = int(edges[edges[:, 0] == edges[:, 1]][0, 0])
            raise NetworkError(f"self-loop at node {u}")
        edges = np.sort(edges, axis=1)
        keys = edges[:, 0] * self.n + edges[:, 1]
        if len(np.unique(keys)) != len(keys):
            raise NetworkError("duplicate edge")
        if ((mu < 0) | (mu > 1)).any():
            raise NetworkError("edge mu outside [0, 1]")
        if ((sigma < 0) | (sigma > distmodel.SIGMA_CAP + 1e-12)).any():
            raise NetworkError(f"edge sigma outside [0, {distmodel.SIGMA_CAP}]")
        if n_components(self.n, edges) != 1:
            raise NetworkError("network is disconnected")
        for name, arr in (("edges", edges), ("mu", mu), ("sigma", sigma)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        nbrs = [[] for _ in range(self.n)]
        inc = [[] for _ in range(self.n)]
        for e, (u, v) in enumerate(edges):
            nbrs[u].append(v)
            inc[u].append(e)
            nbrs[v].append(u)
            inc[v].append(e)
        object.__setattr__(self, "neighbors", tuple(np.array(x, dtype=np.int64) for x in nbrs))
        object.__setattr__(self, "incident", tuple(np.array(x, dtype=np.int64) for x in inc))

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_distribution(self, e: int) -> EdgeDistribution:
        return EdgeDistribution(float(self.mu[e]), float(self.sigma[e]))

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(u), int(v)): e for e, (u, v) in enumerate(self.edges)}

    def with_params(self, mu, sigma) -> "Network":
        return Network(self.n, self.edges, mu, sigma)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        for (u, v), mu, s in zip(self.edges, self.mu, self.sigma):
            g.add_edge(int(u), int(v), mu=float(mu), sigma=float(s))
        return g


def n_components(n: int, edges: np.ndarray) -> int:
    if n == 1:
        return 1
    edges = np.asarray(edges).reshape(-1, 2)
    a = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    return connected_components(a, directed=False)[0]


def _giant_component(n: int, rows: list) -> tuple[int, list]:
    edges = np.array([(u, v) for u, v, *_ in rows], dtype=np.int64).reshape(-1, 2)
    a = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, labels = connected_components(a, directed=False)
    big = np.bincount(labels).argmax()
    keep = np.flatnonzero(labels == big)
    relabel = {int(old): new for new, old in enumerate(keep)}
    out = [(relabel[u], relabel[v], *rest) for u, v, *rest in rows if u in relabel]
    return len(keep), out


def load_network(path, giant_component: bool = False) -> Network:
    """Read a ``u,v,mu,sigma`` CSV.  Disconnected inputs are rejected unless
    ``giant_component`` is set, in which case the largest component is kept
    and relabeled to contiguous ids."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["u", "v", "mu", "sigma"]:
            raise NetworkError(f"{path}: expected header u,v,mu,sigma")
        for line, row in enumerate(reader, start=2):
            try:
                rows.append((int(row["u"]), int(row["v"]), float(row["mu"]), float(row["sigma"])))
            except (TypeError, ValueError) as exc:
                raise NetworkError(f"{path}:{line}: cannot parse {row}") from exc
    if not rows:
        raise NetworkError(f"{path}: no edges")
    for u, v, *_ in rows:
        if u == v:
            raise NetworkError(f"self-loop at node {u}")
    n = max(max(u, v) for u, v, *_ in rows) + 1
    if giant_component:
        n, rows = _giant_component(n, rows)
    arr = np.array(rows, dtype=float)
    return Network(n, arr[:, :2].astype(np.int64), arr[:, 2], arr[:, 3])


def write_network(net: Network, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "mu", "sigma"])
        for (u, v), mu, s in zip(net.edges, net.mu, net.sigma):
            w.writerow([int(u), int(v), f"{mu:.6g}", f"{s:.6g}"])


# ---------------------------------------------------------------------------
# synthetic networks

@dataclass(frozen=True)
class EdgePreset:
    mu_mean: float
    mu_sd: float
    mu_clip: tuple[float, float] = (0.02, 0.6)
    sigma_range: tuple[float, float] = (0.05, 0.15)
    # all-pairs mean/std of expected distance the preset is meant to produce
    target_mean: float | None = None
    target_sd: float | None = None


# connected-pair mean 0.24 against an all-pairs mean of 0.35; the personal and
# social presets scale the edge law by their all-pairs targets
PRESETS = {
    "facebook-all": EdgePreset(0.24, 0.05, target_mean=0.35, target_sd=0.09),
    "facebook-personal": EdgePreset(0.24 * 0.40 / 0.35, 0.05 * 0.12 / 0.09, target_mean=0.40, target_sd=0.12),
    "facebook-social": EdgePreset(0.24 * 0.30 / 0.35, 0.05 * 0.08 / 0.09, target_mean=0.30, target_sd=0.08),
}

MODEL_ALIASES = {
    "ws": "watts-strogatz",
    "watts-strogatz": "watts-strogatz",
    "ba": "barabasi-albert",
    "barabasi-albert": "barabasi-albert",
    "er": "erdos-renyi-giant",
    "erdos-renyi-giant": "erdos-renyi-giant",
}


def _graph_edges(model: str, n: int, params: dict, seed: int) -> np.ndarray:
    s = derive_seed(seed, "graph", model)
    if model == "watts-strogatz":
        k = int(params.get("k", 14))
        p = float(params.get("p", 0.1))
        if not 2 <= k < n:
            raise NetworkError(f"watts-strogatz needs 2 <= k < n (k={k}, n={n})")
        g = nx.connected_watts_strogatz_graph(n, k, p, tries=1000, seed=s)
    elif model == "barabasi-albert":
        m = int(params.get("m", 7))
        if not 1 <= m < n:
            raise NetworkError(f"barabasi-albert needs 1 <= m < n (m={m}, n={n})")
        g = nx.barabasi_albert_graph(n, m, seed=s)
    elif model == "erdos-renyi-giant":
        avg = float(params.get("avg_degree", 14.5))
        if not 0 < avg <= n - 1:
            raise NetworkError(f"erdos-renyi needs 0 < avg_degree <= n-1 (got {avg})")
        g = nx.fast_gnp_random_graph(n, avg / (n - 1), seed=s)
        rng = derive_rng(seed, "attach")
        comps = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: (-len(c), c[0]))
        giant = comps[0]
        for comp in comps[1:]:
            g.add_edge(comp[int(rng.integers(len(comp)))], giant[int(rng.integers(len(giant)))])
    else:
        raise NetworkError(f"unknown graph model {model!r}")
    return np.array(sorted(tuple(sorted(e)) for e in g.edges()), dtype=np.int64).reshape(-1, 2)


def generate_synthetic(
    model: str,
    n: int,
    params: dict | None = None,
    preset: str = "facebook-all",
    seed: int = 0,
) -> Network:
    """Connected synthetic network with edge parameters drawn from ``preset``.

    ``model`` is one of ``watts-strogatz`` (``k``, ``p``), ``barabasi-albert``
    (``m``) or ``erdos-renyi-giant`` (``avg_degree``); short aliases ws/ba/er
    are accepted.
    """
    if n < 2:
        raise NetworkError("a synthetic network needs n >= 2")
    try:
        model = MODEL_ALIASES[model]
    except KeyError:
        raise NetworkError(f"unknown graph model {model!r}") from None
    try:
        pre = PRESETS[preset]
    except KeyError:
        raise NetworkError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}") from None
    edges = _graph_edges(model, n, params or {}, seed)
    rng = derive_rng(seed, "edge-params", preset)
    mu = np.clip(rng.normal(pre.mu_mean, pre.mu_sd, len(edges)), *pre.mu_clip)
    sigma = rng.uniform(*pre.sigma_range, len(edges))
    return Network(n, edges, np.round(mu, 6), np.round(sigma, 6))


# ---------------------------------------------------------------------------
# fitting from observed profiles

def fit_edges_from_profiles(
    adjacency,
    profiles,
    r: int | None = None,
    min_topics: int = MIN_TOPICS,
    default: EdgeDistribution = DEFAULT_EDGE,
) -> Network:
    """Fit each edge's (mu, sigma) by MLE on its per-topic distance histogram.

    ``adjacency`` is a :class:`Network` or an ``(n, edges)`` pair.
    ``profiles`` is a :class:`~prefnet.spread.TopicProfiles` or an integer
    array ``(topics, n)`` of permutation indices where ``-1`` marks a missing
    response (then ``r`` is required).  Pairs sharing fewer than
    ``min_topics`` answered topics keep ``default``.
    """
    from .prefmath import perm_table

    if isinstance(adjacency, Network):
        n, edges = adjacency.n, adjacency.edges
    else:
        n, edges = adjacency
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    idx = getattr(profiles, "index", profiles)
    r = getattr(profiles, "r", r)
    if r is None:
        raise ValueError("r is required when profiles is a bare array")
    idx = np.asarray(idx)
    pt = perm_table(r)
    c = pt.n_pairs
    mu = np.empty(len(edges))
    sigma = np.empty(len(edges))
    skipped = 0
    for e, (u, v) in enumerate(edges):
        a, b = idx[:, u], idx[:, v]
        both = (a >= 0) & (b >= 0)
        if both.sum() < min_topics:
            mu[e], sigma[e] = default.mu, default.sigma
            skipped += 1
            continue
        hist = np.bincount(pt.distance(a[both], b[both]), minlength=c + 1)
        fit = distmodel.fit_mle(hist, r)
        mu[e], sigma[e] = fit.mu, fit.sigma
    if skipped:
        log.warning("%d of %d pairs had fewer than %d shared topics; kept default %s",
                    skipped, len(edges), min_topics, default)
    return Network(n, edges, mu, sigma)


# ---------------------------------------------------------------------------
# centrality baselines

def _check_k(net: Network, k: int) -> None:
    if not 1 <= k <= net.n:
        raise NetworkError(f"k={k} outside [1, {net.n}]")


def _top_k(scores: np.ndarray, k: int, tol: float = 1e-12) -> list[int]:
    # descending score, ties to the lower id; scores within tol count as tied
    order = sorted(range(len(scores)), key=lambda i: (-round(scores[i] / tol) * tol if tol else -scores[i], i))
    return order[:k]


def weighted_degree(net: Network) -> np.ndarray:
    deg = np.zeros(net.n)
    np.add.at(deg, net.edges[:, 0], 1.0 - net.mu)
    np.add.at(deg, net.edges[:, 1], 1.0 - net.mu)
    return deg


def degree_centrality_ranking(net: Network, k: int) -> list[int]:
    """Top-``k`` nodes by similarity-weighted degree."""
    _check_k(net, k)
    return _top_k(weighted_degree(net), k)


def betweenness_scores(net: Network, tol: float = 1e-9) -> np.ndarray:
    """Freeman betweenness with edge length ``mu`` (Brandes accumulation).

    Path lengths within ``tol`` of each other count as equally short, so
    floating-point sums of grid values do not split genuine ties.  Each
    unordered endpoint pair is counted once.
    """
    cb = np.zeros(net.n)
    nbrs, inc, mu = net.neighbors, net.incident, net.mu
    for s in range(net.n):
        dist = np.full(net.n, np.inf)
        sigma = np.zeros(net.n)
        preds: list[list[int]] = [[] for _ in range(net.n)]
        dist[s] = 0.0
        sigma[s] = 1.0
        order = []
        done = np.zeros(net.n, dtype=bool)
        heap = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if done[u] or d > dist[u] + tol:
                continue
            done[u] = True
            order.append(u)
            for v, e in zip(nbrs[u], inc[u]):
                if done[v]:
                    continue
                alt = dist[u] + mu[e]
                if alt < dist[v] - tol:
                    dist[v] = alt
                    sigma[v] = sigma[u]
                    preds[v] = [u]
                    heapq.heappush(heap, (alt, v))
                elif abs(alt - dist[v]) <= tol:
                    sigma[v] += sigma[u]
                    preds[v].append(u)
        delta = np.zeros(net.n)
        for w in reversed(order):
            for u in preds[w]:
                delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    return cb / 2.0


def betweenness_ranking(net: Network, k: int) -> list[int]:
    _check_k(net, k)
    return _top_k(betweenness_scores(net), k, tol=1e-9)
