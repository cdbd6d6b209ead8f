"""Choosing representatives from a matrix of expected distances.

``D[i, j]`` is the expected normalized distance between nodes ``i`` and ``j``
and ``c = 1 - D`` the matching similarity.  Two monotone submodular
objectives score a set ``S``: the worst-off node's similarity to ``S``
(:func:`rho`) and the total similarity (:func:`psi`).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .prefmath import CapacityError
from .voting import RuleSpec, expected_delta

TIE_TOL = 1e-12
BRUTE_MAX_N = 8


class SelectionError(ValueError):
    pass


def as_distance_matrix(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise SelectionError("distance matrix must be square")
    return D


def _members(S) -> np.ndarray:
    S = np.unique(np.asarray(list(S), dtype=np.int64))
    if len(S) == 0:
        raise SelectionError("representative set must be non-empty")
    return S


def dist_set(S, i: int, D) -> float:
    """Distance from node ``i`` to its closest member of ``S``."""
    S = _members(S)
    if i in S:
        return 0.0
    return float(as_distance_matrix(D)[S, i].min())


def representative(S, i: int, D, rng: np.random.Generator) -> int:
    """Uniform choice among the members of ``S`` closest to ``i`` (``i`` itself if a member)."""
    S = _members(S)
    if i in S:
        return int(i)
    col = as_distance_matrix(D)[S, i]
    best = S[col <= col.min() + TIE_TOL]
    return int(best[0]) if len(best) == 1 else int(rng.choice(best))


def assign_representatives(S, D, rng: np.random.Generator) -> np.ndarray:
    S = _members(S)
    D = as_distance_matrix(D)
    sub = D[S]
    low = sub.min(axis=0)
    out = np.empty(len(D), dtype=np.int64)
    for i in range(len(D)):
        best = S[sub[:, i] <= low[i] + TIE_TOL]
        out[i] = best[0] if len(best) == 1 else rng.choice(best)
    out[S] = S
    return out


def _coverage(S, D) -> np.ndarray:
    S = _members(S)
    c = 1.0 - as_distance_matrix(D)[S].min(axis=0)
    c[S] = 1.0
    return c


def rho(S, D) -> float:
    """Smallest similarity of any node to ``S``."""
    return float(_coverage(S, D).min())


def psi(S, D) -> float:
    """Total similarity of all nodes to ``S``."""
    return float(_coverage(S, D).sum())


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """Selected nodes in insertion order plus who each node is represented by.

    ``weighted`` says whether aggregation should use the profile in which
    every node carries its representative's preference (otherwise the members'
    own preferences, one each).
    """

    members: tuple[int, ...]
    assignment: np.ndarray | None
    weighted: bool = True
    algorithm: str = ""
    weights: dict = field(init=False)

    def __post_init__(self):
        if self.assignment is not None:
            a = np.asarray(self.assignment, dtype=np.int64)
            a.setflags(write=False)
            object.__setattr__(self, "assignment", a)
            counts = np.bincount(a, minlength=max(self.members) + 1)
            w = {m: int(counts[m]) for m in self.members}
        else:
            w = {m: 1 for m in self.members}
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return len(self.members)


def write_selection(result: SelectionResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "node", "weight"])
        for rank, m in enumerate(result.members, start=1):
            w.writerow([rank, m, result.weights[m]])


def read_selection(path) -> list[tuple[int, int]]:
    with open(path, newline="") as fh:
        return [(int(r["node"]), int(r["weight"])) for r in csv.DictReader(fh)]


def _check_k(n: int, k: int) -> None:
    if not 1 <= k <= n:
        raise SelectionError(f"k={k} outside [1, {n}]")


def _argmax_low_id(values: np.ndarray, allowed: np.ndarray) -> int:
    v = np.where(allowed, values, -np.inf)
    return int(np.flatnonzero(v >= v.max() - TIE_TOL)[0])


def greedy_select(objective: str, D, k: int, rng: np.random.Generator) -> SelectionResult:
    """Hill-climb on ``rho`` (``'min'``) or ``psi`` (``'sum'``); ties go to the lower id."""
    if objective not in ("min", "sum"):
        raise SelectionError("objective must be 'min' or 'sum'")
    D = as_distance_matrix(D)
    n = len(D)
    _check_k(n, k)
    sim = 1.0 - D
    np.fill_diagonal(sim, 1.0)
    cur = np.zeros(n)  # similarity to the empty set
    free = np.ones(n, dtype=bool)
    members = []
    for _ in range(k):
        cand = np.maximum(cur[None, :], sim)  # row j: coverage after adding j
        score = cand.min(axis=1) if objective == "min" else cand.sum(axis=1)
        j = _argmax_low_id(score, free)
        members.append(j)
        free[j] = False
        cur = cand[j]
    return SelectionResult(tuple(members), assign_representatives(members, D, rng), True, f"greedy-{objective}")


def greedy_orig(
    rule: RuleSpec | str,
    profiles,
    D,
    k: int,
    rng: np.random.Generator,
) -> SelectionResult:
    """Hill-climb directly on one minus the mean aggregation error over ``profiles``.

    ``profiles`` is a :class:`~prefnet.spread.TopicProfiles` whose topics
    back the objective.  Representative ties use a fixed draw per candidate
    set so that candidates are compared on equal footing.
    """
    from .prefmath import perm_table

    if isinstance(rule, str):
        rule = RuleSpec.parse(rule)
    D = as_distance_matrix(D)
    n = len(D)
    _check_k(n, k)
    perms = perm_table(profiles.r).perms
    topics = [perms[row] for row in profiles.index]
    tie_seed = int(rng.integers(2**31 - 1))
    members: list[int] = []
    for _ in range(k):
        best, best_err = -1, math.inf
        for j in range(n):
            if j in members:
                continue
            trial = members + [j]
            assign = assign_representatives(trial, D, np.random.default_rng([tie_seed, *sorted(trial)]))
            err = float(np.mean([expected_delta(rule, P, P[assign]) for P in topics]))
            if err < best_err - TIE_TOL:
                best, best_err = j, err
        members.append(best)
    return SelectionResult(tuple(members), assign_representatives(members, D, rng), True, "greedy-orig")


def random_poll(n: int, k: int, rng: np.random.Generator) -> SelectionResult:
    """Uniform ``k``-subset; aggregation uses the members' own preferences only."""
    _check_k(n, k)
    members = tuple(int(x) for x in rng.choice(n, size=k, replace=False))
    return SelectionResult(members, None, False, "random-poll")


def centrality_selection(ranking, D, rng: np.random.Generator, name: str) -> SelectionResult:
    """Wrap a centrality top-k list; non-members map to their closest member."""
    members = [int(x) for x in ranking]
    return SelectionResult(tuple(members), assign_representatives(members, D, rng), False, name)


def weighted_profile(result: SelectionResult, profile) -> np.ndarray:
    """Every node's preference replaced by its representative's."""
    if result.assignment is None:
        raise SelectionError("this selection has no representative assignment")
    return np.asarray(profile)[result.assignment]


def unweighted_profile(result: SelectionResult, profile) -> np.ndarray:
    return np.asarray(profile)[list(result.members)]


# ---------------------------------------------------------------------------
# the coalition game over similarities

def similarity(D) -> np.ndarray:
    c = 1.0 - as_distance_matrix(D)
    np.fill_diagonal(c, 0.0)
    return c


def shapley_closed(D) -> np.ndarray:
    """Shapley value of the pairwise-similarity game: half of each node's total similarity."""
    return 0.5 * similarity(D).sum(axis=1)


def coalition_values(D) -> np.ndarray:
    """``nu[mask]`` = total similarity over unordered pairs inside the coalition ``mask``."""
    c = similarity(D)
    n = len(c)
    if n > 20:
        raise CapacityError("coalition table limited to n <= 20")
    nu = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        members = [j for j in range(n) if rest >> j & 1]
        nu[mask] = nu[rest] + c[low, members].sum()
    return nu


def shapley_brute(D) -> np.ndarray:
    """Average marginal contribution over all ``n!`` arrival orders."""
    n = len(as_distance_matrix(D))
    if n > BRUTE_MAX_N:
        raise CapacityError(f"brute-force Shapley limited to n <= {BRUTE_MAX_N}")
    nu = coalition_values(D)
    orders = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    bits = np.left_shift(1, orders)
    after = np.cumsum(bits, axis=1)
    gain = nu[after] - nu[after - bits]
    phi = np.zeros(n)
    np.add.at(phi, orders, gain)
    return phi / len(orders)


@dataclass(frozen=True)
class TUReport:
    n: int
    shapley_error: float    # brute force vs closed form
    efficiency_error: float
    gately: tuple           # propensity to disrupt per player at the Shapley point
    tau_lambda: float
    tau_error: float        # tau value vs closed form
    tol: float

    @property
    def ok(self) -> bool:
        return (
            self.shapley_error <= self.tol
            and self.efficiency_error <= self.tol
            and all(abs(g - 1.0) <= self.tol for g in self.gately)
            and abs(self.tau_lambda - 0.5) <= self.tol
            and self.tau_error <= self.tol
        )


def tu_checks(D, tol: float = 1e-9) -> TUReport:
    """Check that Shapley, Gately and tau solutions coincide for the similarity game."""
    D = as_distance_matrix(D)
    n = len(D)
    if n > BRUTE_MAX_N:
        raise CapacityError(f"brute-force checks limited to n <= {BRUTE_MAX_N}")
    if n < 2:
        raise SelectionError("need at least two players")
    nu = coalition_values(D)
    full = (1 << n) - 1
    phi = shapley_closed(D)
    brute = shapley_brute(D)
    # propensity to disrupt: what the others lose over what i loses by leaving
    gately = []
    for i in range(n):
        others = full & ~(1 << i)
        lose_others = phi.sum() - phi[i] - nu[others]
        lose_self = phi[i] - nu[1 << i]
        gately.append(float(lose_others / lose_self))
    upper = np.array([nu[full] - nu[full & ~(1 << i)] for i in range(n)])
    lower = np.zeros(n)
    for i in range(n):
        best = -math.inf
        for mask in range(1 << n):
            if mask >> i & 1:
                rest = sum(upper[j] for j in range(n) if j != i and mask >> j & 1)
                best = max(best, nu[mask] - rest)
        lower[i] = best
    lam = (nu[full] - lower.sum()) / (upper.sum() - lower.sum())
    tau = lam * upper + (1 - lam) * lower
    return TUReport(
        n,
        float(np.abs(brute - phi).max()),
        float(abs(phi.sum() - nu[full])),
        tuple(gately),
        float(lam),
        float(np.abs(tau - phi).max()),
        tol,
    )


# ---------------------------------------------------------------------------
# property sampler for the two objectives

@dataclass(frozen=True)
class PropertyReport:
    trials: int
    monotone_violations: dict
    submodular_violations: dict

    @property
    def ok(self) -> bool:
        return not any(self.monotone_violations.values()) and not any(self.submodular_violations.values())


def check_objective_properties(trials: int, rng: np.random.Generator, n_max: int = 50,
                               tol: float = 1e-12) -> PropertyReport:
    """Sample ``S ⊆ T`` and ``v ∉ T`` on random distance matrices and count violations.

    Monotone: ``f(S) <= f(T)``.  Submodular: the gain of ``v`` on ``S`` is at
    least its gain on ``T``.  Empty sets score 0.
    """
    objectives = {"rho": rho, "psi": psi}
    mono = dict.fromkeys(objectives, 0)
    sub = dict.fromkeys(objectives, 0)

    def f(name, X, D):
        return objectives[name](X, D) if X else 0.0

    for _ in range(trials):
        n = int(rng.integers(2, n_max + 1))
        D = rng.random((n, n))
        D = (D + D.T) / 2
        np.fill_diagonal(D, 0.0)
        order = rng.permutation(n)
        t = int(rng.integers(0, n))
        s = int(rng.integers(0, t + 1))
        T = [int(x) for x in order[:t]]
        S, v = T[:s], int(order[t])
        for name in objectives:
            fS, fT = f(name, S, D), f(name, T, D)
            if fS > fT + tol:
                mono[name] += 1
            if f(name, S + [v], D) - fS < f(name, T + [v], D) - fT - tol:
                sub[name] += 1
    return PropertyReport(trials, mono, sub)
