import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpg_lab.checks import gsppm_distances, theorem1_suite, theorem2_suite, theorem3_suite
from kpg_lab.core import InputError, fd_hessian_blocks
from kpg_lab.games import two_player_quadratic
from kpg_lab.theory import (assemble_blocks, complement_selection, estimate_constants, gsppm_ratio,
                            spectral_extremes, theorem1_bound, theorem3_bound)

from .conftest import MEETUP_STAR

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.mark.parametrize("c", [0.0, 0.3, -0.7])
def test_lipschitz_estimate_linear_coupling(c):
    # gradient of agent i is affine in the other agent with slope c
    est = estimate_constants(two_player_quadratic(c), samples=500, seed=1)
    assert est.L == pytest.approx(abs(c), abs=1e-9)


def test_grad_max_quadratic():
    # |-x + c y| on [-5, 5]^2 peaks at 5 (1 + |c|) at a corner; sampling gets close
    est = estimate_constants(two_player_quadratic(0.5), samples=5000, seed=0)
    assert 6.0 < est.grad_max <= 7.5 + 1e-12


def test_meetup_constants_stable_across_seeds(meetup):
    a = estimate_constants(meetup, samples=10_000, seed=0)
    b = estimate_constants(meetup, samples=10_000, seed=1)
    assert abs(a.L - b.L) / a.L < 0.05
    assert a.grad_max <= 2.0 + 1e-12


def test_eta_limit():
    est = estimate_constants(two_player_quadratic(0.5), samples=200, seed=0)
    assert est.eta_limit(2) == pytest.approx(2.0, rel=1e-6)
    assert estimate_constants(two_player_quadratic(0.0), samples=50).eta_limit(2) == math.inf


def test_complement_selection_two_scalars():
    np.testing.assert_array_equal(complement_selection([1, 1]), SWAP)


def test_complement_selection_shape():
    D = complement_selection([2, 1, 3])
    assert D.shape == (4 + 5 + 3, 6)
    assert np.all(D.sum(axis=1) == 1)


def test_quadratic_blocks(quad):
    blocks = assemble_blocks(quad, [0.0, 0.0], 0.1)
    np.testing.assert_allclose(blocks.A, -np.eye(2))
    np.testing.assert_allclose(blocks.B @ blocks.D, 0.5 * SWAP)
    np.testing.assert_allclose(blocks.growth, 0.9 * np.eye(2))


def test_meetup_analytic_blocks_match_fd(meetup):
    star = np.array(MEETUP_STAR)
    for i in range(2):
        A, B = meetup.hessian_blocks(i, star)
        a, b, _ = fd_hessian_blocks(meetup, i, star)
        np.testing.assert_allclose(A, a, atol=1e-3)
        np.testing.assert_allclose(B, b, atol=1e-3)


def test_non_stationary_reference_rejected(quad):
    with pytest.raises(InputError, match="not stationary"):
        assemble_blocks(quad, [1.0, 0.0], 0.1)


@pytest.mark.parametrize("Z,expected", [
    (np.eye(3), (1.0, 1.0)),
    (np.diag([2.0, -3.0]), (3.0, 2.0)),
    (np.eye(2) - 0.05 * SWAP, (1.05, 0.95)),
    (np.zeros((2, 2)), (0.0, 0.0)),
])
def test_spectral_extremes_examples(Z, expected):
    np.testing.assert_allclose(spectral_extremes(Z), expected, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_spectral_extremes_match_svd(seed):
    Z = np.random.default_rng(seed).normal(size=(6, 6))
    s = np.linalg.svd(Z, compute_uv=False)
    top, bottom = spectral_extremes(Z)
    assert top == pytest.approx(s[0], rel=1e-10)
    assert bottom == pytest.approx(s[-1], rel=1e-6, abs=1e-10)


def test_spectral_extremes_rejects_rectangular():
    with pytest.raises(InputError):
        spectral_extremes(np.ones((2, 3)))


def test_theorem1_bound_values():
    assert theorem1_bound(1, 0.1, 0.5, 2, 7.5) == pytest.approx(0.1 * 2 * 7.5)
    assert theorem1_bound(3, 0.1, 0.5, 2, 7.5) == pytest.approx(0.1 * 0.05 ** 2 * 2 * 7.5)
    assert theorem1_bound(2, 0.2, 1.0, 3, 1.0) == pytest.approx(0.2 * 0.2 * 3 * 2)
    with pytest.raises(InputError):
        theorem1_bound(0, 0.1, 1.0, 2, 1.0)


def test_gsppm_ratio_quadratic(quad):
    ratio = gsppm_ratio(assemble_blocks(quad, [0.0, 0.0], 0.1))
    assert ratio == pytest.approx((0.9 / 0.95) ** 2, abs=1e-12)


def test_gsppm_ratio_zero_blocks(decoupled):
    blocks = assemble_blocks(decoupled, [0.0, 0.0], 0.1)
    blocks.A[:] = 0.0
    blocks.B[:] = 0.0
    assert gsppm_ratio(blocks) == 1.0


def test_gsppm_ratio_meetup(meetup):
    ratio = gsppm_ratio(assemble_blocks(meetup, MEETUP_STAR, 0.3))
    assert 0.0 < ratio < 1.0


def test_theorem3_bound_without_coupling(decoupled):
    blocks = assemble_blocks(decoupled, [0.0, 0.0], 0.1)
    b = theorem3_bound(blocks, 0.5, 0.7, 10.0)
    assert b.value == pytest.approx(0.81 * 0.25)
    assert b.cross_term == 0.0 and b.converges and not b.dominated_by_cross


def test_theorem3_cross_term_flag(quad):
    blocks = assemble_blocks(quad, [0.0, 0.0], 0.1)
    b = theorem3_bound(blocks, 1e-2, 1e-2, 7.5)
    g, c = 0.9, 0.05
    assert b.cross_term == pytest.approx(2 * g * c * 1e-2 * 7.5)
    assert b.dominated_by_cross


def test_suites_pass_on_quadratic(quad):
    est = estimate_constants(quad, samples=2000, seed=0)
    r1 = theorem1_suite(quad, 0.1, est, starts=30)
    r2 = theorem2_suite(quad, [0.0, 0.0], 0.1, starts=5)
    r3 = theorem3_suite(quad, [0.0, 0.0], 0.1, est, starts=5)
    for r in (r1, r2, r3):
        assert r.status == "PASS", r.summary_line()
        assert r.checked > 0 and r.violations == 0
    assert r1.summary_line().startswith("THEOREM 1 PASS")


def test_suites_pass_on_meetup(meetup):
    est = estimate_constants(meetup, samples=2000, seed=0)
    for r in (theorem1_suite(meetup, 0.3, est, starts=30),
              theorem2_suite(meetup, MEETUP_STAR, 0.3, starts=5),
              theorem3_suite(meetup, MEETUP_STAR, 0.3, est, starts=5)):
        assert r.status == "PASS", r.summary_line()


def test_theorem1_skipped_above_limit(quad):
    est = estimate_constants(quad, samples=200, seed=0)
    r = theorem1_suite(quad, 3.0, est)
    assert r.status == "SKIPPED" and r.passed and "reason" in r.details


def test_theorem2_skipped_when_not_contracting():
    game = two_player_quadratic(0.5)
    r = theorem2_suite(game, [0.0, 0.0], 2.5, starts=2)
    assert r.status == "SKIPPED"


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.01, 0.9), st.floats(-3, 3), st.floats(-3, 3))
def test_distance_to_gsppm_limit_never_grows(c, eta, x, y):
    d = gsppm_distances(two_player_quadratic(c), [x, y], eta, K=10)
    assert np.all(np.diff(d) <= 1e-12 + 1e-9 * d[0])
