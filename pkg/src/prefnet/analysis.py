"""Experiment harness: model validation, robustness probes, error-vs-k runs and app scores."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import distmodel, network, selection, spread
from ._random import derive_rng, derive_seed
from .network import Network
from .prefmath import CapacityError, PreferenceError, footrule_similarity, max_kt, perm_table
from .voting import RuleSpec, aggregate, delta


# ---------------------------------------------------------------------------
# model validation

@dataclass(frozen=True)
class ModelReport:
    model: str
    rms_kl: float
    rms_emd: float
    rms_mean: float
    chi2_fail: float
    pairs: int
    seconds: float = field(compare=False, default=0.0)


def edge_histograms(net: Network, profiles: spread.TopicProfiles) -> np.ndarray:
    """``(m, C+1)`` counts of observed raw distances across topics for every edge."""
    pt = perm_table(profiles.r)
    c = max_kt(profiles.r)
    idx = profiles.index
    d = pt.distance(idx[:, net.edges[:, 0]], idx[:, net.edges[:, 1]]).astype(np.int64)
    flat = d + (c + 1) * np.arange(net.m)[None, :]
    return np.bincount(flat.ravel(), minlength=net.m * (c + 1)).reshape(net.m, c + 1)


def compare_edges(net: Network, hist: np.ndarray, r: int, alpha: float = 0.05, normalized: bool = True):
    """Per-edge KL, EMD, mean gap and chi-square verdict against each edge's model."""
    g = distmodel.grid(r)
    out = []
    for e in range(net.m):
        model = distmodel.discretize(net.edge_distribution(e), r)
        emp = distmodel.DiscreteDist(r, hist[e] / hist[e].sum())
        observed = emp.pmf if normalized else hist[e]
        _, ok = distmodel.chi_square(observed, model, alpha)
        out.append((distmodel.kl_divergence(emp, model), distmodel.emd(emp, model),
                    float(emp.pmf @ g - model.pmf @ g), ok))
    return out


def validate_models(
    net: Network,
    topics: int,
    models: Sequence[str] = ("rpm-ic", "rpm-s", "rpm-d", "rpm-r"),
    r: int = 5,
    seed: int = 0,
    workers: int = 1,
    alpha: float = 0.05,
    normalized: bool = True,
    mode: str = "random",
) -> list[ModelReport]:
    """Simulate each model and measure how well edge distances follow the edge models.

    With ``normalized`` the chi-square statistic is taken on observed
    frequencies rather than raw counts, which keeps the verdict independent of
    the number of topics.
    """
    reports = []
    for model in models:
        start = time.perf_counter()
        cfg = spread.SpreadConfig(model, topics, r, mode, seed)
        prof = spread.simulate(net, cfg, workers)
        rows = compare_edges(net, edge_histograms(net, prof), r, alpha, normalized)
        kl, em, mg, ok = (np.array(col, dtype=float) for col in zip(*rows))
        rms = lambda x: float(np.sqrt(np.mean(x ** 2)))  # noqa: E731
        reports.append(ModelReport(model, rms(kl), rms(em), rms(mg), float(1.0 - ok.mean()), net.m,
                                   time.perf_counter() - start))
    return reports


def validation_csv(reports: Sequence[ModelReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "pairs", "rms_kl", "rms_emd", "rms_mean", "chi2_fail"])
    for rep in reports:
        w.writerow([rep.model, rep.pairs, f"{rep.rms_kl:.6f}", f"{rep.rms_emd:.6f}",
                    f"{rep.rms_mean:.6f}", f"{rep.chi2_fail:.6f}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# expected weak insensitivity

@dataclass(frozen=True)
class InsensitivityCell:
    mu: float
    sigma_fraction: float
    sigma: float
    estimate: float
    stderr: float
    passed: bool


@dataclass(frozen=True)
class WeakInsensitivityReport:
    rule: str
    cells: tuple

    @property
    def pass_fraction(self) -> float:
        return sum(c.passed for c in self.cells) / len(self.cells)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rule", "mu", "sigma_fraction", "sigma", "estimate", "stderr", "passed"])
        for c in self.cells:
            w.writerow([self.rule, f"{c.mu:.4f}", f"{c.sigma_fraction:.2f}", f"{c.sigma:.6f}",
                        f"{c.estimate:.6f}", f"{c.stderr:.6f}", int(c.passed)])
        return buf.getvalue()


def default_mu_grid(r: int) -> np.ndarray:
    return np.arange(max_kt(r) + 1) / max_kt(r)


DEFAULT_SIGMA_FRACTIONS = tuple(np.round(np.arange(1, 11) / 10, 2))


def _perturbations(profile_idx: np.ndarray, dist: distmodel.DiscreteDist, samples: int, rng) -> np.ndarray:
    """``samples`` perturbed copies of a profile; each voter moves by a draw from ``dist``.

    Each voter's draws are stratified over the samples (one uniform per
    equal-probability slice, in random order), which trims Monte-Carlo noise
    without changing the law of any single perturbation.
    """
    pt = perm_table(dist.r)
    n = len(profile_idx)
    strata = np.argsort(rng.random((n, samples)), axis=1)
    u = ((strata + rng.random((n, samples))) / samples).T  # (samples, n)
    k = distmodel.sample_index(np.cumsum(dist.pmf), u)
    offsets = pt.sample_offsets(k, rng)
    return pt.compose(np.broadcast_to(profile_idx, k.shape), offsets)


def _insensitivity_cell(rule: RuleSpec, r: int, base_idx: np.ndarray, mu: float, frac: float,
                        samples: int, seed: int) -> InsensitivityCell:
    pt = perm_table(r)
    base = aggregate(rule, pt.perms[base_idx])
    sigma = frac * distmodel.sigma_max(mu)
    dist = distmodel.matched_dist(mu, sigma, r)
    rng = derive_rng(seed, "insensitivity", str(rule), f"{mu:.6f}", f"{frac:.4f}")
    moved = _perturbations(base_idx, dist, samples, rng)
    errs = np.array([delta(base, aggregate(rule, pt.perms[row])) for row in moved])
    se = float(errs.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    est = float(errs.mean())
    return InsensitivityCell(mu, frac, float(sigma), est, se, est <= mu + 2 * se + 1e-12)


def weak_insensitivity_test(
    rule: RuleSpec | str,
    profile,
    mu_grid: Sequence[float] | None = None,
    sigma_fractions: Sequence[float] = DEFAULT_SIGMA_FRACTIONS,
    samples: int = 500,
    seed: int = 0,
    workers: int = 1,
) -> WeakInsensitivityReport:
    """Estimate the expected aggregate drift when every voter moves by mean ``mu``.

    A cell passes when the estimate is at most ``mu`` plus two standard errors.
    Each voter's perturbation distance follows the grid distribution whose own
    mean is exactly ``mu`` and whose standard deviation is the given fraction
    of the largest attainable one.  Cells draw from their own streams, so the
    report does not depend on ``workers``.
    """
    if isinstance(rule, str):
        rule = RuleSpec.parse(rule)
    prof = np.asarray(profile, dtype=np.int64)
    r = prof.shape[1]
    base_idx = perm_table(r).index(prof)
    mu_grid = default_mu_grid(r) if mu_grid is None else mu_grid
    jobs = [(rule, r, base_idx, float(mu), float(frac), samples, seed) for mu in mu_grid for frac in sigma_fractions]
    if workers <= 1:
        cells = [_insensitivity_cell(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_insensitivity_cell, *zip(*jobs)))
    return WeakInsensitivityReport(str(rule), tuple(cells))


# ---------------------------------------------------------------------------
# error-vs-k experiments

ALGORITHMS = ("greedy-sum", "greedy-min", "greedy-orig", "degree-cen", "between-cen", "random-poll")
WORST_DICTATOR = "random-dictatorship:worst"


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 500
    graph: str = "watts-strogatz"
    graph_params: tuple = ()
    preset: str = "facebook-all"
    network_path: str | None = None
    spread_model: str = "rpm-s"
    spread_mode: str = "random"
    topics: int = 1000
    r: int = 5
    distance: str = "msm-sp"
    rules: tuple = ("plurality",)
    algorithms: tuple = ("greedy-sum", "greedy-min", "degree-cen", "between-cen", "random-poll")
    ks: tuple = tuple(range(1, 51))
    poll_runs: int = 100
    tr_samples: int = spread.TR_SAMPLES
    seed: int = 0
    workers: int = 1
    timings: bool = False

    def __post_init__(self):
        if self.topics < 1:
            raise ValueError("topics must be at least 1")
        if self.distance not in ("msm-sp", "empirical"):
            raise ValueError("distance must be 'msm-sp' or 'empirical'")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
        for rule in self.rules:
            if rule != WORST_DICTATOR:
                RuleSpec.parse(rule)
        if not self.ks or min(self.ks) < 1:
            raise ValueError("k values must be positive")


RESULT_FIELDS = ("algorithm", "rule", "k", "mean_error", "stderr", "runtime_ms", "worst_error")


@dataclass(frozen=True)
class ExperimentData:
    net: Network
    profiles: spread.TopicProfiles
    D: np.ndarray


def empirical_distances(profiles: spread.TopicProfiles) -> np.ndarray:
    pt = perm_table(profiles.r)
    acc = np.zeros((profiles.n, profiles.n))
    for row in profiles.index:
        acc += pt.distance(row[:, None], row[None, :])
    return acc / (len(profiles) * max_kt(profiles.r))


def prepare(cfg: ExperimentConfig) -> ExperimentData:
    if cfg.network_path:
        net = network.load_network(cfg.network_path)
    else:
        net = network.generate_synthetic(cfg.graph, cfg.n, dict(cfg.graph_params), cfg.preset,
                                         derive_seed(cfg.seed, "network"))
    if max(cfg.ks) > net.n:
        raise ValueError(f"k up to {max(cfg.ks)} exceeds n={net.n}")
    scfg = spread.SpreadConfig(cfg.spread_model, cfg.topics, cfg.r, cfg.spread_mode, derive_seed(cfg.seed, "topics"))
    profiles = spread.simulate(net, scfg, cfg.workers)
    if cfg.distance == "msm-sp":
        D = spread.msm_sp(net, spread.build_tr_table(cfg.r, cfg.tr_samples, derive_seed(cfg.seed, "tr")))
    else:
        D = empirical_distances(profiles)
    return ExperimentData(net, profiles, D)


def _ranking(cfg, data, name, kmax):
    if name == "degree-cen":
        return network.degree_centrality_ranking(data.net, kmax)
    return network.betweenness_ranking(data.net, kmax)


def _select(cfg, data, algorithm, k, rng, cache):
    if algorithm in ("greedy-sum", "greedy-min"):
        return selection.greedy_select(algorithm.split("-")[1], data.D, k, rng)
    if algorithm == "greedy-orig":
        return selection.greedy_orig(cfg.rules[0], data.profiles, data.D, k, rng)
    if algorithm in ("degree-cen", "between-cen"):
        if algorithm not in cache:
            cache[algorithm] = _ranking(cfg, data, algorithm, max(cfg.ks))
        return selection.centrality_selection(cache[algorithm][:k], data.D, rng, algorithm)
    return selection.random_poll(data.net.n, k, rng)


class _Evaluator:
    """Topic errors for one selection, with the true-profile aggregates cached."""

    def __init__(self, data: ExperimentData):
        self.data = data
        self.pt = perm_table(data.profiles.r)
        self.c = max_kt(data.profiles.r)
        self.true_cache: dict = {}

    def true_agg(self, rule: RuleSpec, t: int):
        key = (str(rule), t)
        if key not in self.true_cache:
            self.true_cache[key] = aggregate(rule, self.pt.perms[self.data.profiles.index[t]])
        return self.true_cache[key]

    def dictator_matrix(self, sel: selection.SelectionResult) -> np.ndarray:
        """``(topics, n)`` error when each node is the dictator."""
        idx = self.data.profiles.index
        if sel.assignment is not None:
            return self.pt.distance(idx, idx[:, sel.assignment]) / self.c
        members = list(sel.members)
        # a dictator outside the poll is replaced by a uniform poll member
        err = np.zeros(idx.shape)
        for j in members:
            err += self.pt.distance(idx, idx[:, [j]])
        err /= len(members) * self.c
        err[:, members] = 0.0
        return err

    def topic_errors(self, rule: RuleSpec, sel: selection.SelectionResult) -> np.ndarray:
        idx = self.data.profiles.index
        rows = sel.assignment if sel.weighted else list(sel.members)
        return np.array([delta(self.true_agg(rule, t), aggregate(rule, self.pt.perms[idx[t, rows]]))
                         for t in range(len(idx))])


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def _cell(cfg: ExperimentConfig, data: ExperimentData, algorithm: str, k: int, cache=None, ev=None) -> list[dict]:
    """Result rows of every rule for one (algorithm, k)."""
    cache = {} if cache is None else cache
    ev = ev or _Evaluator(data)
    runs = cfg.poll_runs if algorithm == "random-poll" else 1
    per_rule: dict[str, list] = {rule: [] for rule in cfg.rules}
    missing: set = set()
    elapsed = 0.0
    for run in range(runs):
        rng = derive_rng(cfg.seed, "select", algorithm, k, run)
        t0 = time.perf_counter()
        sel = _select(cfg, data, algorithm, k, rng, cache)
        elapsed += time.perf_counter() - t0
        dict_err = None
        for rule in cfg.rules:
            if rule in missing:
                continue
            try:
                if rule == WORST_DICTATOR or rule == "random-dictatorship":
                    if dict_err is None:
                        dict_err = ev.dictator_matrix(sel)
                    if rule == WORST_DICTATOR:
                        per_rule[rule].append((float(dict_err.mean(axis=0).max()), 0.0))
                    else:
                        e = dict_err.mean(axis=1)
                        per_rule[rule].append((float(e.mean()), float(e.std(ddof=1) / math.sqrt(len(e))) if len(e) > 1 else 0.0))
                else:
                    e = ev.topic_errors(RuleSpec.parse(rule), sel)
                    per_rule[rule].append((float(e.mean()), float(e.std(ddof=1) / math.sqrt(len(e))) if len(e) > 1 else 0.0))
            except CapacityError:
                missing.add(rule)
    rows = []
    for rule in cfg.rules:
        base = {"algorithm": algorithm, "rule": rule, "k": k, "runtime_ms": "",
                "mean_error": "", "stderr": "", "worst_error": ""}
        if cfg.timings:
            base["runtime_ms"] = f"{1000 * elapsed / runs:.3f}"
        if rule in missing:
            rows.append(base)
            continue
        vals = np.array(per_rule[rule])
        if runs == 1:
            base.update(mean_error=_fmt(vals[0, 0]), stderr=_fmt(vals[0, 1]))
        else:
            means = vals[:, 0]
            base.update(mean_error=_fmt(means.mean()), stderr=_fmt(means.std(ddof=1) / math.sqrt(runs)),
                        worst_error=_fmt(means.max()))
        rows.append(base)
    return rows


_WORKER_STATE: dict = {}


def _init_worker(cfg, data):
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["data"] = data
    _WORKER_STATE["cache"] = {}
    _WORKER_STATE["ev"] = _Evaluator(data)


def _worker_cell(job):
    s = _WORKER_STATE
    return _cell(s["cfg"], s["data"], job[0], job[1], s["cache"], s["ev"])


def evaluate(cfg: ExperimentConfig, data: ExperimentData) -> list[dict]:
    jobs = [(a, k) for a in cfg.algorithms for k in cfg.ks]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers, initializer=_init_worker, initargs=(cfg, data)) as pool:
            blocks = list(pool.map(_worker_cell, jobs))
    else:
        _init_worker(cfg, data)
        blocks = [_worker_cell(j) for j in jobs]
    rows = [row for block in blocks for row in block]
    order = {a: i for i, a in enumerate(cfg.algorithms)}
    rorder = {r: i for i, r in enumerate(cfg.rules)}
    rows.sort(key=lambda x: (order[x["algorithm"]], rorder[x["rule"]], x["k"]))
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Network, topics and distances from ``cfg``, then errors for every algorithm, rule and k."""
    return evaluate(cfg, prepare(cfg))


def results_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RESULT_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# app scores

def social_centrality(user_prefs, aggregates, counts) -> float:
    """Score out of 10 in steps of 0.5 for how well a user agrees with the population.

    ``user_prefs[t]`` is the user's ranking on topic ``t`` or ``None`` when
    unanswered; only answered topics enter, weighted by their response counts.
    """
    answered = [t for t, p in enumerate(user_prefs) if p is not None]
    if not answered:
        raise ValueError("user answered no topics")
    w = np.array([counts[t] for t in answered], dtype=float)
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("response counts must be positive")
    sims = np.array([footrule_similarity(user_prefs[t], aggregates[t]) for t in answered])
    frac = float(np.clip((w / w.sum()) @ sims, 0.0, 1.0))
    return math.ceil(20.0 * math.sqrt(frac) - 1e-9) / 2.0


def friend_similarity(prefs_i, prefs_j) -> float:
    """Percentage agreement over aligned topics; a topic either side skipped counts as 0."""
    if len(prefs_i) != len(prefs_j):
        raise ValueError("topic lists must be aligned")
    if not prefs_i:
        raise ValueError("no topics")
    total = sum(footrule_similarity(a, b) for a, b in zip(prefs_i, prefs_j) if a is not None and b is not None)
    return 100.0 * total / len(prefs_i)
