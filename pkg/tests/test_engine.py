import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpg_lab.core import FunctionGame, InputError, NumericError
from kpg_lab.engine import (OptimizerState, first_passage, gsppm_residual, gsppm_solve, kpg_update, train)
from kpg_lab.games import QuadraticGame, two_player_quadratic
from kpg_lab.theory import estimate_constants
from kpg_lab.trace import LearningRates

from .conftest import MEETUP_STAR


def brute_force_levels(theta, eta, c, K):
    """Scalar two-agent quadratic game, unrolled by hand: g_i = -x_i + c x_j."""
    x1, x2 = theta
    levels = [(x1, x2)]
    p1, p2 = x1, x2
    for _ in range(K):
        p1, p2 = x1 + eta * (-x1 + c * p2), x2 + eta * (-x2 + c * p1)
        levels.append((p1, p2))
    return levels


def test_k1_is_one_gradient_step(quad, rng):
    theta = rng.normal(size=2)
    out, _ = kpg_update(quad, theta, 0.1, 1)
    expected = theta + 0.1 * np.array([quad.gradient(0, theta)[0], quad.gradient(1, theta)[0]])
    np.testing.assert_array_equal(out, expected)


@pytest.mark.parametrize("K", [1, 2, 5])
def test_stationary_point_is_fixed(quad, K):
    out, _ = kpg_update(quad, [0.0, 0.0], 0.1, K)
    np.testing.assert_array_equal(out, [0.0, 0.0])


def test_quadratic_hand_unrolled_levels(quad):
    _, trace = kpg_update(quad, [1.0, 1.0], 0.1, 2)
    levels = [p[2] for p in trace.params]
    np.testing.assert_allclose(levels[1], [0.95, 0.95], atol=1e-15)
    np.testing.assert_allclose(levels[2], [0.9475, 0.9475], atol=1e-15)
    np.testing.assert_allclose(levels, brute_force_levels((1.0, 1.0), 0.1, 0.5, 2), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.9, 0.9), st.floats(0.01, 0.5), st.integers(1, 8))
def test_matches_linear_recursion(x1, x2, c, eta, K):
    game = two_player_quadratic(c)
    _, trace = kpg_update(game, [x1, x2], eta, K)
    got = [p[2] for p in trace.params]
    np.testing.assert_allclose(got, brute_force_levels((x1, x2), eta, c, K), atol=1e-10)


def test_decoupled_any_k_equals_gradient_ascent(decoupled, rng):
    theta = rng.normal(size=2)
    one, _ = kpg_update(decoupled, theta, 0.2, 1)
    for K in (2, 3, 7):
        np.testing.assert_array_equal(kpg_update(decoupled, theta, 0.2, K)[0], one)


def test_reanchoring_each_level_one_step_from_start(rng):
    game = QuadraticGame([-np.eye(2), -2 * np.eye(1)], [rng.normal(size=(2, 1)), rng.normal(size=(1, 2))])
    theta = rng.normal(size=3)
    rates = LearningRates((0.1, 0.05))
    _, trace = kpg_update(game, theta, rates, 6)
    levels = [p[2] for p in trace.params]
    for k in range(1, 7):
        prev = levels[k - 1]
        for i, sl in enumerate((slice(0, 2), slice(2, 3))):
            mixed = prev.copy()
            mixed[sl] = theta[sl]
            expected = rates.eta[i] * np.linalg.norm(game.gradient(i, mixed))
            assert np.linalg.norm(levels[k][sl] - theta[sl]) == pytest.approx(expected, rel=1e-12)


def test_trace_rows_ordered_and_nonnegative(quad):
    _, trace = kpg_update(quad, [1.0, -1.0], 0.1, 4, theta_star=[0.0, 0.0])
    keys = [(r.update, r.k) for r in trace.rows]
    assert keys == sorted(keys)
    assert all(r.step_dist >= 0 for r in trace.rows)
    assert trace.column("dist_star")[0] == pytest.approx(math.sqrt(2))


def test_invalid_k(quad):
    with pytest.raises(InputError):
        kpg_update(quad, [0.0, 0.0], 0.1, 0)


def test_nonfinite_gradient_reports_level_and_agent():
    def grad(i, th):
        return np.array([np.inf]) if i == 1 and th[0] > 0.5 else np.array([1.0])

    game = FunctionGame([1, 1], lambda i, th: 0.0, grad)
    with pytest.raises(NumericError, match=r"k=2 for agent 1"):
        kpg_update(game, [0.0, 0.0], 1.0, 3)


@pytest.mark.parametrize("kind", ["momentum", "rmsprop"])
def test_optimizer_snapshot_restore_bitwise(kind, rng):
    opt = OptimizerState(kind, [2, 1])
    for _ in range(3):
        opt.step(0, rng.normal(size=2), 0.1)
        opt.step(1, rng.normal(size=1), 0.1)
    snap = opt.snapshot()
    opt.step(0, rng.normal(size=2), 0.1)
    opt.restore(snap)
    for a, b in zip(opt.accum, snap):
        assert a.tobytes() == b.tobytes()


def test_plain_optimizer_has_no_state():
    assert OptimizerState("plain", [1, 1]).accum == []


def test_unknown_optimizer_kind():
    with pytest.raises(InputError):
        OptimizerState("adam", [1, 1])


@pytest.mark.parametrize("kind", ["momentum", "rmsprop"])
def test_update_deterministic_from_same_snapshot(meetup, kind):
    opt = OptimizerState(kind, [1, 1])
    theta = np.array([0.3, 2.0])
    for _ in range(5):
        theta, _ = kpg_update(meetup, theta, 0.2, 3, opt)
    snap = opt.snapshot()
    a, _ = kpg_update(meetup, theta, 0.2, 4, opt)
    opt.restore(snap)
    b, _ = kpg_update(meetup, theta, 0.2, 4, opt)
    assert a.tobytes() == b.tobytes()


def test_optimizer_advances_only_along_final_level(meetup):
    # stats after a K-level update equal the stats after one step with the level-K gradient
    theta = np.array([0.1, 2.5])
    opt = OptimizerState("momentum", [1, 1])
    opt.accum = [np.array([0.3]), np.array([-0.2])]
    snap = opt.snapshot()
    _, trace = kpg_update(meetup, theta, 0.1, 3, opt)
    level2 = trace.params[2][2]
    ref = OptimizerState("momentum", [1, 1])
    ref.restore(snap)
    ref.step(0, meetup.gradient(0, np.array([theta[0], level2[1]])), 0.1)
    ref.step(1, meetup.gradient(1, np.array([level2[0], theta[1]])), 0.1)
    for a, b in zip(opt.accum, ref.accum):
        np.testing.assert_array_equal(a, b)


def test_gsppm_decoupled_converges_at_level_two(decoupled):
    res = gsppm_solve(decoupled, [1.0, -2.0], 0.1, tol=1e-12)
    assert res.converged and res.k_used == 2
    assert gsppm_residual(decoupled, [1.0, -2.0], res.theta, 0.1) == 0.0


def test_gsppm_matches_linear_solve(quad, rng):
    eta, c = 0.1, 0.5
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    for _ in range(5):
        theta = rng.uniform(-3, 3, 2)
        expected = np.linalg.solve(np.eye(2) - eta * c * swap, (1 - eta) * theta)
        res = gsppm_solve(quad, theta, eta, tol=1e-14)
        assert res.converged
        np.testing.assert_allclose(res.theta, expected, atol=1e-8)


def test_gsppm_residual_bound(meetup):
    tol, eta = 1e-10, 0.3
    L = estimate_constants(meetup, samples=2000, seed=0).L
    res = gsppm_solve(meetup, [0.2, math.pi + 0.2], eta, tol=tol)
    assert res.converged
    assert gsppm_residual(meetup, [0.2, math.pi + 0.2], res.theta, eta) < 2 * tol * (1 + eta * L)


def test_gsppm_meetup_step_ratio(meetup):
    eta = 0.3
    L = estimate_constants(meetup, samples=10_000, seed=0).L
    res = gsppm_solve(meetup, [0.2, math.pi + 0.2], eta, tol=1e-13)
    steps = [s for s in res.step_dists if s > 1e-13]
    ratios = np.array(steps[1:]) / np.array(steps[:-1])
    assert np.all(ratios <= eta * L * (2 - 1) + 0.05)
    assert np.all(np.diff(steps) < 0)


def test_gsppm_divergence_is_reported(rng):
    game = two_player_quadratic(0.9)
    res = gsppm_solve(game, [1.0, 1.0], 1.5, tol=1e-12, k_max=50)
    assert not res.converged and res.k_used == 50


def test_gsppm_rejects_bad_tol(quad):
    with pytest.raises(InputError):
        gsppm_solve(quad, [0.0, 0.0], 0.1, tol=0.0)


def test_train_rejects_zero_steps(quad):
    with pytest.raises(InputError):
        train(quad, [1.0, 1.0], 0.1, 1, 0)


def test_train_propagates_update_index():
    calls = {"n": 0}

    def grad(i, th):
        calls["n"] += 1
        return np.array([np.nan]) if calls["n"] > 6 else np.array([0.1])

    game = FunctionGame([1, 1], lambda i, th: 0.0, grad)
    with pytest.raises(NumericError, match="update 2"):
        train(game, [0.0, 0.0], 0.1, 2, 5)


def test_train_meetup_k4_momentum_reaches_optimum(meetup):
    trace = train(meetup, [0.0, math.pi], 0.3, 4, 300, OptimizerState("momentum", [1, 1]), theta_star=MEETUP_STAR)
    assert meetup.distance(trace.final_params(), MEETUP_STAR) < 1e-2
    assert trace.column("dist_star")[-1] < 1e-2


def test_train_quadratic_k3_no_slower_than_k1(quad, rng):
    for _ in range(5):
        theta0 = rng.uniform(-5, 5, 2)
        fp = [first_passage(train(quad, theta0, 0.1, K, 500, theta_star=[0.0, 0.0]), 1e-3) for K in (1, 3)]
        assert fp[0] is not None and fp[1] is not None and fp[1] <= fp[0]


def test_train_gsppm_algo(quad):
    trace = train(quad, [1.0, 1.0], 0.1, 1, 5, theta_star=[0.0, 0.0], algo="gsppm")
    d = trace.column("dist_star")
    assert np.all(np.diff(d) < 0)
