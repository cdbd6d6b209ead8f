import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import coverage_min, coverage_sum, shapley_by_orders
from prefnet.analysis import empirical_distances
from prefnet.network import generate_synthetic
from prefnet.prefmath import CapacityError
from prefnet.selection import (
    SelectionError,
    SelectionResult,
    assign_representatives,
    check_objective_properties,
    dist_set,
    greedy_orig,
    greedy_select,
    psi,
    random_poll,
    read_selection,
    representative,
    rho,
    shapley_brute,
    shapley_closed,
    tu_checks,
    weighted_profile,
    write_selection,
)
from prefnet.spread import SpreadConfig, simulate
from prefnet.voting import expected_delta


def sym(n, rng):
    D = rng.random((n, n))
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0.0)
    return D


@st.composite
def matrices(draw, n_min=2, n_max=7):
    n = draw(st.integers(n_min, n_max))
    return sym(n, np.random.default_rng(draw(st.integers(0, 2**32 - 1))))


def test_dist_set():
    D = np.array([[0, 0.3, 0.8], [0.3, 0, 0.5], [0.8, 0.5, 0]])
    assert dist_set({0}, 2, D) == 0.8
    assert dist_set({0, 1}, 2, D) == 0.5
    assert dist_set({0, 1}, 1, D) == 0.0
    with pytest.raises(SelectionError):
        dist_set(set(), 0, D)


def test_representative_tie_is_fair():
    D = np.array([[0, 0.2, 0.4], [0.2, 0, 0.2], [0.4, 0.2, 0]])
    rng = np.random.default_rng(5)
    picks = [representative({0, 2}, 1, D, rng) for _ in range(4000)]
    assert 0.45 <= picks.count(0) / len(picks) <= 0.55
    assert representative({0, 2}, 0, D, rng) == 0


@given(matrices(), st.data())
def test_objectives_match_oracles(D, data):
    n = len(D)
    S = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    assert rho(S, D) == pytest.approx(coverage_min(S, D.tolist()))
    assert psi(S, D) == pytest.approx(coverage_sum(S, D.tolist()))
    assert rho(range(n), D) == 1.0 and psi(range(n), D) == n


@given(matrices(n_max=12))
def test_greedy_k_equals_n_covers_everything(D):
    n = len(D)
    for obj in ("min", "sum"):
        res = greedy_select(obj, D, n, np.random.default_rng(0))
        assert sorted(res.members) == list(range(n))
        assert res.assignment.tolist() == list(range(n))
        assert sum(res.weights.values()) == n


@given(matrices())
def test_first_sum_pick_is_shapley_argmax(D):
    # psi({j}) = 1 + sum_i (1 - D[j, i]) = 1 + 2 * phi_j
    first = greedy_select("sum", D, 1, np.random.default_rng(0)).members[0]
    phi = shapley_closed(D)
    assert phi[first] >= phi.max() - 1e-12


def test_greedy_rejects_bad_k():
    with pytest.raises(SelectionError):
        greedy_select("sum", np.zeros((3, 3)), 4, np.random.default_rng(0))
    with pytest.raises(SelectionError):
        greedy_select("max", np.zeros((3, 3)), 1, np.random.default_rng(0))


def test_greedy_guarantee_small_instances():
    for seed in range(30):
        rng = np.random.default_rng(seed)
        n, k = int(rng.integers(4, 10)), int(rng.integers(1, 4))
        D = sym(n, rng)
        best = max(rho(S, D) for S in itertools.combinations(range(n), k))
        got = rho(greedy_select("min", D, k, rng).members, D)
        assert got >= (1 - 1 / math.e) * best - 1e-12


def test_random_poll_inclusion_rate():
    rng = np.random.default_rng(17)
    hits = sum(3 in random_poll(100, 10, rng).members for _ in range(10_000))
    sd = math.sqrt(10_000 * 0.1 * 0.9)
    assert abs(hits - 1000) <= 3 * sd
    assert sorted(random_poll(5, 5, rng).members) == list(range(5))
    a = random_poll(50, 7, np.random.default_rng(1)).members
    assert a == random_poll(50, 7, np.random.default_rng(1)).members


def test_weighted_profile_ten_and_one():
    # node 0 represents only itself, node 1 represents the other ten
    n = 11
    D = np.full((n, n), 0.5)
    D[0, 1:] = D[1:, 0] = 0.9
    D[1, 2:] = D[2:, 1] = 0.1
    np.fill_diagonal(D, 0.0)
    res = SelectionResult((0, 1), assign_representatives([0, 1], D, np.random.default_rng(0)))
    prof = [(i % 3, (i + 1) % 3, (i + 2) % 3) for i in range(n)]
    Q = [tuple(x) for x in weighted_profile(res, prof)]
    assert Q.count(prof[1]) == 10 and Q.count(prof[0]) == 1
    assert res.weights == {0: 1, 1: 10}


def test_selection_csv_round_trip(tmp_path):
    res = SelectionResult((4, 1), np.array([1, 1, 4, 4, 4]))
    write_selection(res, tmp_path / "sel.csv")
    assert read_selection(tmp_path / "sel.csv") == [(4, 3), (1, 2)]


def test_shapley_worked_values():
    tri = np.full((3, 3), 0.4)
    np.fill_diagonal(tri, 0)
    assert shapley_closed(tri) == pytest.approx([0.6, 0.6, 0.6])
    assert shapley_brute(tri).sum() == pytest.approx(1.8)
    pair = np.array([[0, 0.6], [0.6, 0]])
    assert shapley_closed(pair) == pytest.approx([0.2, 0.2])


@given(matrices(2, 6))
def test_shapley_matches_order_oracle(D):
    n = len(D)
    c = [[Fraction(1) - Fraction(D[i][j]) for j in range(n)] for i in range(n)]
    want = shapley_by_orders(n, lambda S: sum(c[i][j] for i, j in itertools.combinations(sorted(S), 2)))
    assert shapley_brute(D) == pytest.approx([float(x) for x in want], abs=1e-9)


@given(matrices(2, 7))
def test_tu_solutions_coincide(D):
    rep = tu_checks(D)
    assert rep.ok, rep
    assert rep.tau_lambda == pytest.approx(0.5, abs=1e-9)


def test_tu_capacity():
    with pytest.raises(CapacityError):
        tu_checks(np.zeros((9, 9)))
    with pytest.raises(CapacityError):
        shapley_brute(np.zeros((9, 9)))


def test_psi_has_no_property_violations():
    rep = check_objective_properties(2000, np.random.default_rng(0))
    assert rep.monotone_violations == {"rho": 0, "psi": 0}
    assert rep.submodular_violations["psi"] == 0


def test_rho_is_not_submodular():
    # covering the third node needs both others absent from T, so the gain grows with T
    D = np.ones((3, 3))
    np.fill_diagonal(D, 0)
    S, T, v = [0], [0, 1], 2
    assert rho(S + [v], D) - rho(S, D) == 0.0
    assert rho(T + [v], D) - rho(T, D) == 1.0


def _small_instance(seed, n=7, topics=50):
    net = generate_synthetic("ws", n, {"k": 2, "p": 0.3}, seed=seed)
    prof = simulate(net, SpreadConfig("rpm-s", topics, 3, seed=seed))
    return prof, empirical_distances(prof)


def _error(rule, prof, res):
    topics = [prof.rankings(t) for t in range(len(prof))]
    return float(np.mean([expected_delta(rule, P, weighted_profile(res, P)) for P in topics]))


def test_greedy_orig_k_equals_n_is_exact():
    prof, D = _small_instance(0, n=5, topics=5)
    res = greedy_orig("plurality", prof, D, 5, np.random.default_rng(0))
    assert _error("plurality", prof, res) == 0


def test_greedy_orig_tends_to_beat_greedy_sum():
    wins = 0
    for seed in range(20):
        prof, D = _small_instance(seed)
        rng = np.random.default_rng(seed)
        orig = _error("plurality", prof, greedy_orig("plurality", prof, D, 2, rng))
        gsum = _error("plurality", prof, greedy_select("sum", D, 2, rng))
        wins += orig <= gsum + 1e-12
    assert wins > 10


def test_greedy_orig_single_pick_is_exhaustive_best():
    prof, D = _small_instance(3, topics=1)
    rule = "dictatorship:2"
    res = greedy_orig(rule, prof, D, 1, np.random.default_rng(0))
    scan = [_error(rule, prof, SelectionResult((j,), np.full(len(D), j))) for j in range(len(D))]
    assert _error(rule, prof, res) == pytest.approx(min(scan))
