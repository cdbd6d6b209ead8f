"""Permutation metrics, Mahonian counting and uniform sampling of rankings.

A preference over ``r`` alternatives is a tuple of the ids ``0..r-1`` with
the most preferred alternative first.  Hot loops elsewhere in the package work
on integer *permutation indices* into :func:`perm_table` (lexicographic order)
instead of tuples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Iterator, Sequence

import numpy as np

Preference = tuple[int, ...]

MAX_ENUM_R = 8


class PreferenceError(ValueError):
    """Malformed preference or mismatched alternative sets."""


class CapacityError(RuntimeError):
    """Requested enumeration is larger than the configured guard allows."""


def as_preference(ranking: Sequence[int]) -> Preference:
    p = tuple(int(a) for a in ranking)
    r = len(p)
    if r < 2:
        raise PreferenceError(f"a preference needs at least 2 alternatives, got {r}")
    if sorted(p) != list(range(r)):
        raise PreferenceError(f"{p} is not a permutation of 0..{r - 1}")
    return p


def parse_preference(text: str) -> Preference:
    """Parse the ``'2>0>1'`` text form."""
    try:
        return as_preference(int(tok) for tok in text.strip().split(">"))
    except ValueError as exc:
        if isinstance(exc, PreferenceError):
            raise
        raise PreferenceError(f"cannot parse preference {text!r}") from exc


def format_preference(p: Sequence[int]) -> str:
    return ">".join(str(int(a)) for a in p)


def _check_pair(p: Sequence[int], q: Sequence[int]) -> tuple[Preference, Preference]:
    p, q = as_preference(p), as_preference(q)
    if len(p) != len(q):
        raise PreferenceError(f"preferences over different alternative sets: {p} vs {q}")
    return p, q


def max_kt(r: int) -> int:
    return comb(r, 2)


def kendall_tau(p: Sequence[int], q: Sequence[int]) -> int:
    """Number of alternative pairs ordered oppositely by ``p`` and ``q``."""
    p, q = _check_pair(p, q)
    pos = {a: i for i, a in enumerate(q)}
    seq = [pos[a] for a in p]
    return sum(1 for i, j in itertools.combinations(range(len(seq)), 2) if seq[i] > seq[j])


def norm_kt(p: Sequence[int], q: Sequence[int]) -> float:
    p, q = _check_pair(p, q)
    return kendall_tau(p, q) / max_kt(len(p))


def footrule(p: Sequence[int], q: Sequence[int]) -> float:
    """Normalized Spearman footrule distance.

    The raw footrule sum is divided by its maximum ``2*ceil(r/2)*floor(r/2)``.
    """
    p, q = _check_pair(p, q)
    r = len(p)
    wp = {a: i for i, a in enumerate(p)}
    wq = {a: i for i, a in enumerate(q)}
    raw = sum(abs(wp[a] - wq[a]) for a in range(r))
    return raw / (2 * ((r + 1) // 2) * (r // 2))


def footrule_similarity(p: Sequence[int], q: Sequence[int]) -> float:
    return 1.0 - footrule(p, q)


@lru_cache(maxsize=None)
def mahonian_row(r: int) -> tuple[int, ...]:
    """Counts of permutations of ``r`` items by inversion number, k = 0..C(r,2)."""
    if r < 1:
        raise PreferenceError("r must be positive")
    row = [1]
    for n in range(2, r + 1):
        new = [0] * (len(row) + n - 1)
        for k, c in enumerate(row):
            for j in range(n):
                new[k + j] += c
        row = new
    return tuple(row)


def count_at_distance(r: int, k: int) -> int:
    """Number of preferences at raw Kendall-Tau distance ``k`` from any fixed one."""
    if r < 2:
        raise PreferenceError("r must be at least 2")
    if not 0 <= k <= max_kt(r):
        raise PreferenceError(f"distance {k} out of range [0, {max_kt(r)}] for r={r}")
    return mahonian_row(r)[k]


def _lehmer_from_rng(r: int, k: int, rng: np.random.Generator) -> list[int]:
    # c[i] counts later items smaller than item i, 0 <= c[i] <= r-1-i
    code = []
    remaining = k
    for i in range(r):
        tail = r - 1 - i
        cap = min(tail, remaining)
        weights = np.array(
            [_mahonian(tail, remaining - c) for c in range(cap + 1)], dtype=float
        )
        c = int(rng.choice(cap + 1, p=weights / weights.sum()))
        code.append(c)
        remaining -= c
    return code


def _mahonian(m: int, k: int) -> int:
    if m == 0:
        return 1 if k == 0 else 0
    row = mahonian_row(m)
    return row[k] if 0 <= k < len(row) else 0


def _perm_from_lehmer(code: Sequence[int]) -> list[int]:
    pool = list(range(len(code)))
    return [pool.pop(c) for c in code]


def sample_at_distance(p: Sequence[int], k: int, rng: np.random.Generator) -> Preference:
    """Uniform draw among preferences at raw Kendall-Tau distance ``k`` from ``p``."""
    p = as_preference(p)
    r = len(p)
    if not 0 <= k <= max_kt(r):
        raise PreferenceError(f"distance {k} out of range [0, {max_kt(r)}] for r={r}")
    x = _perm_from_lehmer(_lehmer_from_rng(r, k, rng))
    # relabel: inversions of x are exactly the pairs p and p∘x disagree on
    return tuple(p[i] for i in x)


def all_preferences(r: int) -> Iterator[Preference]:
    if r < 2:
        raise PreferenceError("r must be at least 2")
    if r > MAX_ENUM_R:
        raise CapacityError(f"refusing to enumerate {r}! preferences (r > {MAX_ENUM_R})")
    return itertools.permutations(range(r))


@dataclass(frozen=True, eq=False)
class PermTable:
    """Lookup tables over all ``r!`` permutations in lexicographic order.

    ``kt`` (pairwise raw distances) is only materialized for r <= 7.
    """

    r: int
    perms: np.ndarray        # (r!, r) rankings
    positions: np.ndarray    # (r!, r) position of each alternative
    inversions: np.ndarray   # (r!,) raw distance from the identity ranking
    buckets: tuple           # buckets[k] -> indices with `inversions == k`
    kt: np.ndarray | None
    comp: np.ndarray | None = None  # comp[p, x] = index of p[x], r <= 6 only

    @property
    def size(self) -> int:
        return len(self.perms)

    @property
    def n_pairs(self) -> int:
        return max_kt(self.r)

    def index(self, rankings: np.ndarray) -> np.ndarray:
        """Lexicographic rank of each row of ``rankings`` (vectorized Lehmer code)."""
        x = np.asarray(rankings, dtype=np.int64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        r = self.r
        idx = np.zeros(len(x), dtype=np.int64)
        for i in range(r):
            smaller_later = (x[:, i + 1:] < x[:, i:i + 1]).sum(axis=1)
            idx += smaller_later * factorial(r - 1 - i)
        return idx[0] if single else idx

    def distance(self, a, b) -> np.ndarray:
        """Raw Kendall-Tau distance between permutation indices (broadcasting)."""
        if self.kt is not None:
            return self.kt[a, b]
        pa = self.positions[np.asarray(a)]
        pb = self.positions[np.asarray(b)]
        out = 0
        for i, j in itertools.combinations(range(self.r), 2):
            out = out + ((pa[..., i] < pa[..., j]) != (pb[..., i] < pb[..., j]))
        return np.asarray(out)

    def compose(self, p_idx, x_idx) -> np.ndarray:
        """Index of the ranking ``p[x]``; its distance to ``p`` equals inversions(x)."""
        if self.comp is not None:
            return self.comp[p_idx, x_idx]
        p = self.perms[np.asarray(p_idx)]
        x = self.perms[np.asarray(x_idx)]
        return self.index(np.take_along_axis(p, x, axis=-1))

    def sample_offsets(self, k, rng: np.random.Generator) -> np.ndarray:
        """Uniform identity-relative permutation index at raw distance ``k`` (array)."""
        k = np.asarray(k, dtype=np.int64)
        counts = np.array([len(b) for b in self.buckets])
        u = rng.random(k.shape)
        pick = np.minimum((u * counts[k]).astype(np.int64), counts[k] - 1)
        return self._bucket_flat[self._bucket_start[k] + pick]

    def sample_at(self, p_idx, k, rng: np.random.Generator) -> np.ndarray:
        """Vectorized :func:`sample_at_distance` on permutation indices."""
        return self.compose(p_idx, self.sample_offsets(k, rng))

    def __post_init__(self):
        flat = np.concatenate(self.buckets)
        start = np.concatenate([[0], np.cumsum([len(b) for b in self.buckets])[:-1]])
        object.__setattr__(self, "_bucket_flat", flat)
        object.__setattr__(self, "_bucket_start", start.astype(np.int64))


@lru_cache(maxsize=None)
def perm_table(r: int) -> PermTable:
    perms = np.array(list(all_preferences(r)), dtype=np.int64)
    positions = np.argsort(perms, axis=1)
    pairs = list(itertools.combinations(range(r), 2))
    before = np.stack([positions[:, i] < positions[:, j] for i, j in pairs], axis=1)
    inversions = (~before).sum(axis=1)
    buckets = tuple(np.flatnonzero(inversions == k) for k in range(max_kt(r) + 1))
    kt = None
    if r <= 7:
        b = before.astype(np.int16)
        kt = (b @ (1 - b).T + (1 - b) @ b.T).astype(np.int16)
    for arr in (perms, positions, inversions):
        arr.setflags(write=False)
    table = PermTable(r, perms, positions, inversions, buckets, kt)
    if r <= 6:
        composed = perms[np.arange(len(perms))[:, None, None], perms[None, :, :]]
        comp = table.index(composed.reshape(-1, r)).reshape(len(perms), len(perms))
        comp = comp.astype(np.int32)
        comp.setflags(write=False)
        object.__setattr__(table, "comp", comp)
    return table
