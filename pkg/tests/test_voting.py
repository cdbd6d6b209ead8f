import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import borda_scores, delta_brute, kemeny_brute, kt_pairs
from prefnet.prefmath import CapacityError, PreferenceError, norm_kt
from prefnet.voting import (
    RULES,
    AggregateSet,
    RuleSpec,
    aggregate,
    delta,
    dictator_errors,
    expected_delta,
    pairwise_counts,
)

X, Y, Z = 0, 1, 2
ANON = [r for r in RULES if r not in ("dictatorship",)]


def profiles(r_min=3, r_max=4, n_max=9):
    return st.integers(r_min, r_max).flatmap(
        lambda r: st.lists(st.permutations(range(r)), min_size=1, max_size=n_max))


def test_rule_spec_parse():
    assert RuleSpec.parse("dictatorship:3") == RuleSpec("dictatorship", 3)
    assert str(RuleSpec.parse("borda")) == "borda"
    for bad in ("dictatorship", "nonsense"):
        with pytest.raises(ValueError):
            RuleSpec.parse(bad)
    with pytest.raises(ValueError):
        RuleSpec("borda", cap=0)


def test_borda_worked_example():
    out = aggregate("borda", [(Y, Z, X), (X, Y, Z)])
    assert out.preferences == [(Y, X, Z)]


def test_dictatorship_returns_dictator():
    prof = [(0, 1, 2), (2, 1, 0), (1, 0, 2)]
    assert aggregate("dictatorship:2", prof).preferences == [(1, 0, 2)]
    with pytest.raises(PreferenceError):
        aggregate("dictatorship:3", prof)


def test_smith_three_cycle_is_everything():
    out = aggregate("smith", [(X, Y, Z), (Y, Z, X), (Z, X, Y)])
    assert len(out) == 6


def test_random_dictatorship_set_is_deduplicated():
    out = aggregate("random-dictatorship", [(0, 1, 2), (0, 1, 2), (2, 1, 0)])
    assert out.preferences == [(0, 1, 2), (2, 1, 0)]


def test_delta_worked_cases():
    pa, pb = (0, 1, 2, 3), (1, 0, 3, 2)
    A, AB = AggregateSet.of([pa]), AggregateSet.of([pa, pb])
    assert delta(AB, A) == 0
    assert delta(A, AB) == pytest.approx(0.5 * norm_kt(pb, pa))
    assert delta(A, A) == 0


@given(profiles(), profiles())
def test_delta_matches_oracle_and_bounds(p, q):
    r = len(p[0])
    q = [tuple(x) for x in q if len(x) == r] or [tuple(range(r))]
    fP, fR = aggregate("borda", p), aggregate("plurality", q)
    d = delta(fP, fR)
    assert 0 <= d <= 1
    assert d == pytest.approx(float(delta_brute(fP.preferences, fR.preferences, r)))
    assert delta(fP, fP) == 0


@given(profiles())
def test_borda_matches_oracle(p):
    r = len(p[0])
    s = borda_scores(p, r)
    out = aggregate("borda", p).preferences
    for q in out:
        assert all(s[q[i]] >= s[q[i + 1]] for i in range(r - 1))
    top = max(s)
    assert {q[0] for q in out} == {a for a in range(r) if s[a] == top}


@given(profiles(3, 5))
def test_kemeny_matches_brute_force(p):
    r = len(p[0])
    assert set(aggregate("kemeny", p).preferences) == kemeny_brute(p, r)


@given(profiles(), st.randoms(use_true_random=False))
def test_anonymity(p, rnd):
    shuffled = list(p)
    rnd.shuffle(shuffled)
    for rule in ANON:
        assert aggregate(rule, p) == aggregate(rule, shuffled), rule


@given(st.lists(st.permutations(range(4)), min_size=1, max_size=9), st.permutations(range(4)))
def test_neutrality(p, sigma):
    relabeled = [tuple(sigma[a] for a in q) for q in p]
    for rule in ANON:
        want = {tuple(sigma[a] for a in q) for q in aggregate(rule, p).preferences}
        assert set(aggregate(rule, relabeled).preferences) == want, rule


@given(st.permutations(range(5)), st.integers(1, 7))
def test_unanimous_profile(q, n):
    prof = [tuple(q)] * n
    for rule in ("kemeny", "borda", "copeland", "schulze", "minmax-po", "bucklin", "smith"):
        assert tuple(q) in aggregate(rule, prof), rule
    assert aggregate("kemeny", prof).preferences == [tuple(q)]


@given(profiles(3, 5))
def test_veto_is_plurality_of_reversed_ballots(p):
    rev = [tuple(reversed(q)) for q in p]
    veto = {tuple(reversed(q)) for q in aggregate("plurality", rev).preferences}
    assert set(aggregate("veto", p).preferences) == veto


@given(profiles(3, 5))
def test_condorcet_winner_tops_majority_rules(p):
    N = pairwise_counts(np.array(p))
    r = len(p[0])
    winners = [a for a in range(r) if all(N[a, b] > N[b, a] for b in range(r) if b != a)]
    if winners:
        for rule in ("copeland", "smith", "schulze", "minmax-po"):
            assert {q[0] for q in aggregate(rule, p).preferences} == set(winners), rule


def test_extension_cap():
    prof = [tuple(range(6))]
    with pytest.raises(CapacityError):
        aggregate(RuleSpec("plurality", cap=100), prof)
    assert len(aggregate(RuleSpec("plurality"), prof)) == 120


def test_expected_delta_identical_profiles():
    rng = np.random.default_rng(0)
    prof = [tuple(rng.permutation(4)) for _ in range(15)]
    for rule in ANON + ["dictatorship:4"]:
        assert expected_delta(rule, prof, prof) == 0


def test_random_dictatorship_exact_vs_sampled():
    rng = np.random.default_rng(3)
    P = np.array([rng.permutation(5) for _ in range(60)])
    R = np.array([rng.permutation(5) for _ in range(60)])
    exact = expected_delta("random-dictatorship", P, R)
    mc = expected_delta("random-dictatorship", P, R, rng=rng, samples=100_000)
    assert exact == pytest.approx(np.mean([kt_pairs(a, b) / 10 for a, b in zip(P, R)]))
    assert abs(exact - mc) <= 0.005


def test_worst_dictator():
    pa, pb = (0, 1, 2), (2, 1, 0)
    P, R = [pa, pb, pa], [pa, pa, pa]
    assert dictator_errors(P, R).tolist() == [0.0, 1.0, 0.0]
    assert expected_delta("random-dictatorship", P, R, worst=True) == 1.0
    assert expected_delta("random-dictatorship", P, R) == pytest.approx(1 / 3)


def test_bad_profiles():
    with pytest.raises(PreferenceError):
        aggregate("borda", [])
    with pytest.raises(PreferenceError):
        aggregate("borda", [(0, 0, 1)])
    with pytest.raises(PreferenceError):
        AggregateSet.of([])


def test_all_outputs_are_rankings():
    rng = np.random.default_rng(9)
    prof = [tuple(rng.permutation(5)) for _ in range(11)]
    for rule in ANON + ["dictatorship:0"]:
        for q in aggregate(rule, prof).preferences:
            assert sorted(q) == list(range(5))
    assert set(itertools.permutations(range(3))) == set(aggregate("smith", [(0, 1, 2), (1, 2, 0), (2, 0, 1)]).preferences)
