"""Aggregation rules as correspondences and the error operator between outputs.

No rule breaks ties.  Rules that induce a weak order (or, for Schulze, a
partial order) over the alternatives return every linear extension of it, so
an output is a set of rankings.  Profiles are ``(n, r)`` integer arrays of
rankings or sequences of preference tuples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .prefmath import CapacityError, PreferenceError, as_preference, max_kt, perm_table

RULES = (
    "plurality",
    "borda",
    "veto",
    "copeland",
    "minmax-po",
    "bucklin",
    "smith",
    "schulze",
    "kemeny",
    "dictatorship",
    "random-dictatorship",
)
DEFAULT_CAP = 10_000
KEMENY_MAX_R = 7


@dataclass(frozen=True)
class RuleSpec:
    rule: str
    dictator: int | None = None
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}; choose from {RULES}")
        if self.cap < 1:
            raise ValueError("extension cap must be at least 1")
        if self.rule == "dictatorship" and (self.dictator is None or self.dictator < 0):
            raise ValueError("dictatorship needs a non-negative dictator id")

    @classmethod
    def parse(cls, text: str, cap: int = DEFAULT_CAP) -> "RuleSpec":
        """``'borda'`` or ``'dictatorship:3'``."""
        name, _, arg = text.strip().partition(":")
        return cls(name, int(arg) if arg else None, cap)

    def __str__(self):
        return f"{self.rule}:{self.dictator}" if self.rule == "dictatorship" else self.rule


@dataclass(frozen=True, eq=False)
class AggregateSet:
    """Non-empty set of rankings, held as sorted unique permutation indices."""

    r: int
    index: np.ndarray

    def __post_init__(self):
        idx = np.unique(np.asarray(self.index, dtype=np.int64).ravel())
        if len(idx) == 0:
            raise PreferenceError("an aggregate set cannot be empty")
        idx.setflags(write=False)
        object.__setattr__(self, "index", idx)

    @classmethod
    def of(cls, preferences) -> "AggregateSet":
        prefs = [as_preference(p) for p in preferences]
        if not prefs:
            raise PreferenceError("an aggregate set cannot be empty")
        r = len(prefs[0])
        if any(len(p) != r for p in prefs):
            raise PreferenceError("aggregate preferences over different alternative sets")
        return cls(r, perm_table(r).index(np.array(prefs)))

    @property
    def preferences(self) -> list[tuple[int, ...]]:
        return [tuple(int(a) for a in p) for p in perm_table(self.r).perms[self.index]]

    def __len__(self):
        return len(self.index)

    def __contains__(self, p) -> bool:
        p = as_preference(p)
        return len(p) == self.r and int(perm_table(self.r).index(np.array(p))) in set(self.index.tolist())

    def __eq__(self, other):
        return isinstance(other, AggregateSet) and self.r == other.r and np.array_equal(self.index, other.index)

    def __hash__(self):
        return hash((self.r, self.index.tobytes()))

    def __repr__(self):
        return f"AggregateSet({self.preferences})"


def as_profile(profile) -> np.ndarray:
    arr = np.asarray(profile, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise PreferenceError("a profile is a non-empty (voters, alternatives) array")
    r = arr.shape[1]
    if r < 2 or not (np.sort(arr, axis=1) == np.arange(r)).all():
        raise PreferenceError("every profile row must be a permutation of 0..r-1")
    return arr


def pairwise_counts(profile: np.ndarray) -> np.ndarray:
    """``N[a, b]`` = number of voters ranking ``a`` above ``b``."""
    pos = np.argsort(profile, axis=1)
    return (pos[:, :, None] < pos[:, None, :]).sum(axis=0)


# ---------------------------------------------------------------------------
# orders to rankings

def _tiers(scores) -> list[list[int]]:
    """Weak order from scores (higher is better); tied alternatives share a tier."""
    keys = list(scores)
    levels = sorted(set(keys), reverse=True)
    return [[a for a, k in enumerate(keys) if k == lv] for lv in levels]


def _extensions_of_tiers(tiers: list[list[int]], cap: int) -> np.ndarray:
    count = math.prod(math.factorial(len(t)) for t in tiers)
    if count > cap:
        raise CapacityError(f"{count} tied rankings exceed the extension cap {cap}")
    rows = [sum(map(list, combo), []) for combo in itertools.product(*(itertools.permutations(t) for t in tiers))]
    return np.array(rows, dtype=np.int64)


def _extensions_of_order(better: np.ndarray, cap: int) -> np.ndarray:
    """All linear extensions of the strict partial order ``better[a, b]`` (a above b)."""
    r = len(better)
    out: list[list[int]] = []
    prefix: list[int] = []
    placed = np.zeros(r, dtype=bool)

    def walk():
        if len(prefix) == r:
            if len(out) >= cap:
                raise CapacityError(f"more than {cap} linear extensions (extension cap)")
            out.append(list(prefix))
            return
        for a in range(r):
            if not placed[a] and not (better[:, a] & ~placed).any():
                placed[a] = True
                prefix.append(a)
                walk()
                prefix.pop()
                placed[a] = False

    walk()
    return np.array(out, dtype=np.int64)


# ---------------------------------------------------------------------------
# rules

def _plurality(p, n, r):
    return np.bincount(p[:, 0], minlength=r)


def _borda(p, n, r):
    pos = np.argsort(p, axis=1)
    return (r - 1 - pos).sum(axis=0)


def _veto(p, n, r):
    return n - np.bincount(p[:, -1], minlength=r)


def _copeland(p, n, r):
    N = pairwise_counts(p)
    return np.sign(N - N.T).sum(axis=1)


def _minmax(p, n, r):
    N = pairwise_counts(p).astype(np.int64)
    np.fill_diagonal(N, -1)
    return -N.max(axis=0)  # smaller worst opposition ranks higher


def _bucklin(p, n, r):
    pos = np.argsort(p, axis=1)
    within = np.stack([(pos < k).sum(axis=0) for k in range(1, r + 1)])  # (depth, alt)
    depth = np.argmax(within * 2 > n, axis=0)
    votes = within[depth, np.arange(r)]
    return [(-int(d), int(v)) for d, v in zip(depth, votes)]


SCORE_RULES = {
    "plurality": _plurality,
    "borda": _borda,
    "veto": _veto,
    "copeland": _copeland,
    "minmax-po": _minmax,
    "bucklin": _bucklin,
}


def _closure(rel: np.ndarray) -> np.ndarray:
    reach = rel.copy()
    for k in range(len(reach)):
        reach |= reach[:, k:k + 1] & reach[k:k + 1, :]
    return reach


def smith_set(N: np.ndarray, alts: Sequence[int]) -> list[int]:
    """Smallest set of ``alts`` whose members all beat every outsider by majority."""
    alts = list(alts)
    sub = N[np.ix_(alts, alts)]
    weak = sub >= sub.T
    reach = _closure(weak)
    return [a for i, a in enumerate(alts) if reach[i].all()]


def smith_tiers(N: np.ndarray) -> list[list[int]]:
    rest = list(range(len(N)))
    tiers = []
    while rest:
        top = smith_set(N, rest)
        tiers.append(top)
        rest = [a for a in rest if a not in top]
    return tiers


def schulze_order(N: np.ndarray) -> np.ndarray:
    """``better[a, b]``: a's strongest beatpath to b beats b's to a."""
    r = len(N)
    d = np.where(N > N.T, N, 0).astype(np.int64)
    np.fill_diagonal(d, 0)
    for k in range(r):
        d = np.maximum(d, np.minimum(d[:, k:k + 1], d[k:k + 1, :]))
        np.fill_diagonal(d, 0)
    return d > d.T


@lru_cache(maxsize=None)
def _before(r: int) -> np.ndarray:
    pos = perm_table(r).positions
    return (pos[:, :, None] < pos[:, None, :]).astype(np.int64)  # (r!, a, b)


def kemeny_scores(profile: np.ndarray) -> np.ndarray:
    """Total Kendall-Tau distance from every ranking (lexicographic order) to the profile."""
    r = profile.shape[1]
    if r > KEMENY_MAX_R:
        raise CapacityError(f"kemeny is exact over r! rankings; r={r} exceeds {KEMENY_MAX_R}")
    N = pairwise_counts(profile)
    return np.einsum("pab,ba->p", _before(r), N)


def aggregate(rule: RuleSpec | str, profile) -> AggregateSet:
    if isinstance(rule, str):
        rule = RuleSpec.parse(rule)
    p = as_profile(profile)
    n, r = p.shape
    pt = perm_table(r) if r <= 8 else None
    if pt is None:
        raise CapacityError("aggregation supports r <= 8")
    name = rule.rule
    if name == "dictatorship":
        if rule.dictator >= n:
            raise PreferenceError(f"dictator {rule.dictator} is not a voter (n={n})")
        return AggregateSet(r, pt.index(p[rule.dictator]))
    if name == "random-dictatorship":
        return AggregateSet(r, pt.index(p))
    if name == "kemeny":
        s = kemeny_scores(p)
        best = np.flatnonzero(s == s.min())
        if len(best) > rule.cap:
            raise CapacityError(f"{len(best)} Kemeny rankings exceed the extension cap {rule.cap}")
        return AggregateSet(r, best)
    if name in SCORE_RULES:
        rows = _extensions_of_tiers(_tiers(SCORE_RULES[name](p, n, r)), rule.cap)
    elif name == "smith":
        rows = _extensions_of_tiers(smith_tiers(pairwise_counts(p)), rule.cap)
    else:  # schulze
        rows = _extensions_of_order(schulze_order(pairwise_counts(p)), rule.cap)
    return AggregateSet(r, pt.index(rows))


# ---------------------------------------------------------------------------
# error between aggregate outputs

def delta(fP: AggregateSet, fR: AggregateSet) -> float:
    """Mean over ``y`` in ``fR`` of the distance from ``y`` to the closest ``x`` in ``fP``."""
    if fP.r != fR.r:
        raise PreferenceError("aggregate sets over different alternative counts")
    pt = perm_table(fP.r)
    d = pt.distance(fP.index[:, None], fR.index[None, :])
    return float(d.min(axis=0).mean() / max_kt(fP.r))


MC_THRESHOLD = 1000


def dictator_errors(true_profile, repr_profile) -> np.ndarray:
    """Per-dictator error: distance between voter i's entry in the two aligned profiles."""
    P, R = as_profile(true_profile), as_profile(repr_profile)
    if P.shape != R.shape:
        raise PreferenceError("random dictatorship compares aligned profiles of equal shape")
    pt = perm_table(P.shape[1])
    return pt.distance(pt.index(P), pt.index(R)) / max_kt(P.shape[1])


def expected_delta(
    rule: RuleSpec | str,
    true_profile,
    repr_profile,
    rng: np.random.Generator | None = None,
    samples: int | None = None,
    worst: bool = False,
) -> float:
    """Error of aggregating ``repr_profile`` instead of ``true_profile``.

    For random dictatorship the two profiles are aligned voter by voter (the
    representative profile gives each voter its representative's ranking) and
    the dictator is uniform over voters.  The average is exact for up to
    ``MC_THRESHOLD`` voters unless ``samples`` is given; ``worst`` takes the
    most dissimilar dictator instead.
    """
    if isinstance(rule, str):
        rule = RuleSpec.parse(rule)
    if rule.rule != "random-dictatorship":
        return delta(aggregate(rule, true_profile), aggregate(rule, repr_profile))
    per = dictator_errors(true_profile, repr_profile)
    if worst:
        return float(per.max())
    if samples is None and len(per) <= MC_THRESHOLD:
        return float(per.mean())
    if rng is None:
        raise ValueError("Monte-Carlo evaluation needs an rng")
    return float(per[rng.integers(0, len(per), samples or 100_000)].mean())
