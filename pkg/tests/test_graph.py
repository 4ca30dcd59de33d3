import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agtrack import (GraphSchedule, gamma_connectivity, matrix_product_window,
                     metropolis_weights, sigma, sigma_gamma)
from conftest import M9_EDGE_SETS, path_edges, ring_edges

J3 = np.full((3, 3), 1.0 / 3.0)


def random_edge_set(m, seed, p=0.4):
    rng = np.random.default_rng(seed)
    return [(i, j) for i in range(m) for j in range(i + 1, m)
            if rng.random() < p]


# ---------------------------------------------------------------- metropolis

def test_metropolis_complete_graph_m3():
    W = metropolis_weights([(0, 1), (0, 2), (1, 2)], 3)
    np.testing.assert_allclose(W.entries, J3, atol=1e-15)


def test_metropolis_path_m3():
    W = metropolis_weights(path_edges(3), 3).entries
    expected = np.array([[2 / 3, 1 / 3, 0.0],
                         [1 / 3, 1 / 3, 1 / 3],
                         [0.0, 1 / 3, 2 / 3]])
    np.testing.assert_allclose(W, expected, atol=1e-15)


def test_metropolis_empty_edges_is_identity():
    W = metropolis_weights([], 4)
    np.testing.assert_allclose(W.entries, np.eye(4), atol=0)


def test_metropolis_rejects_bad_input():
    with pytest.raises(ValueError):
        metropolis_weights([(0, 1)], 0)
    with pytest.raises(ValueError):
        metropolis_weights([(0, 5)], 3)
    with pytest.raises(ValueError):
        metropolis_weights([(1, 1)], 3)


def test_metropolis_dedups_orientation():
    a = metropolis_weights([(0, 1), (1, 0)], 3).entries
    b = metropolis_weights([(0, 1)], 3).entries
    np.testing.assert_array_equal(a, b)


@given(st.integers(2, 12), st.integers(0, 10 ** 6))
@settings(max_examples=60, deadline=None)
def test_metropolis_invariants_random_graphs(m, seed):
    W = metropolis_weights(random_edge_set(m, seed), m).entries
    assert (W >= -1e-15).all()
    np.testing.assert_allclose(W, W.T, atol=1e-15)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(W.sum(axis=0), 1.0, atol=1e-12)


# ---------------------------------------------------------------- sigma

def test_sigma_of_projector_is_zero():
    assert sigma(J3) == pytest.approx(0.0, abs=1e-12)


def test_sigma_of_identity_is_one():
    assert sigma(np.eye(4)) == pytest.approx(1.0, abs=1e-12)


def test_sigma_path3_two_thirds():
    # Path-graph Metropolis eigenvalues are {1, 2/3, 0}.
    assert sigma(metropolis_weights(path_edges(3), 3)) == pytest.approx(2 / 3, abs=1e-12)


def test_sigma_ring10_closed_form():
    # Ring Metropolis: W = (I + C + C^T)/3, eigenvalues (1 + 2cos(2 pi j/10))/3.
    got = sigma(metropolis_weights(ring_edges(10), 10))
    assert got == pytest.approx((3 + math.sqrt(5)) / 6, abs=1e-12)


def test_sigma_rejects_non_doubly_stochastic():
    with pytest.raises(ValueError):
        sigma(np.array([[0.9, 0.0], [0.0, 0.9]]))


@given(st.integers(2, 10), st.integers(0, 10 ** 6))
@settings(max_examples=60, deadline=None)
def test_consensus_contraction_single_step(m, seed):
    # ||Pi W x|| <= sigma ||Pi x|| for any Metropolis W and any x.
    W = metropolis_weights(random_edge_set(m, seed), m)
    sig = sigma(W)
    x = np.random.default_rng(seed + 1).standard_normal((m, 3))
    pi = lambda v: v - v.mean(axis=0)
    assert np.linalg.norm(pi(W.entries @ x)) <= sig * np.linalg.norm(pi(x)) + 1e-9


# ------------------------------------------------- matrix_product_window

def test_window_gamma0_is_identity(m9_schedule):
    W = matrix_product_window(m9_schedule, metropolis_weights, 5, 0)
    np.testing.assert_array_equal(W.entries, np.eye(9))


def test_window_static_gamma2_is_square(ring10):
    W1 = metropolis_weights(ring_edges(10), 10).entries
    W2 = matrix_product_window(ring10, metropolis_weights, 1, 2).entries
    np.testing.assert_allclose(W2, W1 @ W1, atol=1e-15)


def test_window_alternating_order():
    # E^0 = {(0,1)}, E^1 = {(1,2)}: the window at k=1 is W^1 W^0, in that order.
    sched = GraphSchedule.cyclic(3, [[(0, 1)], [(1, 2)]])
    got = matrix_product_window(sched, metropolis_weights, 1, 2).entries
    expected = np.array([[0.5, 0.5, 0.0],
                         [0.25, 0.25, 0.5],
                         [0.25, 0.25, 0.5]])
    np.testing.assert_allclose(got, expected, atol=1e-15)


def test_window_rejects_short_history(m9_schedule):
    with pytest.raises(ValueError):
        matrix_product_window(m9_schedule, metropolis_weights, 1, 3)


# ------------------------------------------------- gamma_connectivity

def test_static_ring_gamma1_connected(ring10):
    assert gamma_connectivity(ring10, 1)


def test_alternating_pair_needs_gamma2():
    sched = GraphSchedule.cyclic(3, [[(0, 1)], [(1, 2)]])
    assert not gamma_connectivity(sched, 1)
    assert gamma_connectivity(sched, 2)


def test_empty_schedule_never_connected():
    sched = GraphSchedule.cyclic(4, [[], []])
    assert not gamma_connectivity(sched, 1)
    assert not gamma_connectivity(sched, 5)


def test_m9_schedule_gamma3(m9_schedule):
    assert not gamma_connectivity(m9_schedule, 2)
    assert gamma_connectivity(m9_schedule, 3)


# ------------------------------------------------- sigma_gamma

def test_sigma_gamma_no_mixing_is_one():
    sched = GraphSchedule.cyclic(4, [[], [], []])
    report = sigma_gamma(sched, 3)
    assert report.sigma_gamma == pytest.approx(1.0, abs=1e-12)


def test_sigma_gamma_complete_static_is_zero():
    sched = GraphSchedule.static(3, [(0, 1), (0, 2), (1, 2)])
    report = sigma_gamma(sched, 1)
    assert report.sigma_gamma == pytest.approx(0.0, abs=1e-12)
    assert not report.is_estimate


def test_sigma_gamma_alternating_is_period_max():
    sched = GraphSchedule.cyclic(3, [[(0, 1)], [(1, 2)]])
    report = sigma_gamma(sched, 2)
    mats = [metropolis_weights(e, 3).entries for e in ([(0, 1)], [(1, 2)])]
    J = np.full((3, 3), 1 / 3)
    by_hand = max(np.linalg.norm(mats[1] @ mats[0] - J, 2),
                  np.linalg.norm(mats[0] @ mats[1] - J, 2))
    assert report.sigma_gamma == pytest.approx(by_hand, abs=1e-12)
    assert not report.is_estimate


def test_sigma_gamma_m9_frozen_value(m9_schedule):
    report = sigma_gamma(m9_schedule, 3)
    assert report.sigma_gamma == pytest.approx(0.761368718888694, abs=1e-12)
    assert report.gamma == 3
    assert not report.is_estimate


def test_sigma_gamma_static_monotone_in_gamma(ring10):
    values = [sigma_gamma(ring10, g).sigma_gamma for g in range(1, 6)]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_sigma_gamma_seeded_random_is_estimate():
    sched = GraphSchedule.seeded_random(6, 0.5, seed=7)
    report = sigma_gamma(sched, 2, horizon=40)
    assert report.is_estimate
    assert 0.0 <= report.sigma_gamma <= 1.0


def test_sigma_gamma_rejects_horizon_below_gamma():
    sched = GraphSchedule.seeded_random(6, 0.5, seed=7)
    with pytest.raises(ValueError):
        sigma_gamma(sched, 4, horizon=2)


@given(st.integers(0, 10 ** 6))
@settings(max_examples=40, deadline=None)
def test_gamma_window_contraction_and_nonexpansion(seed):
    # ||Pi W^{k,gamma} x|| <= sigma_gamma ||Pi x||, and plain non-expansion
    # for partial windows 0 <= t < gamma.
    sched = GraphSchedule.cyclic(9, M9_EDGE_SETS)
    gamma = 3
    report = sigma_gamma(sched, gamma)
    rng = np.random.default_rng(seed)
    k = int(rng.integers(gamma - 1, 12))
    x = rng.standard_normal((9, 4))
    pi = lambda v: v - v.mean(axis=0)
    full = matrix_product_window(sched, metropolis_weights, k, gamma).entries
    assert np.linalg.norm(pi(full @ x)) <= report.sigma_gamma * np.linalg.norm(pi(x)) + 1e-9
    for t in range(gamma):
        part = matrix_product_window(sched, metropolis_weights, k, t).entries
        assert np.linalg.norm(pi(part @ x)) <= np.linalg.norm(pi(x)) + 1e-9


# ------------------------------------------------- schedules

def test_seeded_random_schedule_reproducible():
    a = GraphSchedule.seeded_random(8, 0.3, seed=11)
    b = GraphSchedule.seeded_random(8, 0.3, seed=11)
    assert [a.edge_set(k) for k in range(10)] == [b.edge_set(k) for k in range(10)]
    c = GraphSchedule.seeded_random(8, 0.3, seed=12)
    assert any(a.edge_set(k) != c.edge_set(k) for k in range(10))


def test_schedule_periods(ring10, m9_schedule):
    assert ring10.period == 1
    assert m9_schedule.period == 3
    assert GraphSchedule.seeded_random(4, 0.5, seed=0).period is None
    assert m9_schedule.edge_set(5) == m9_schedule.edge_set(2)
