import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saddle_escape.eigs import (LanczosBreakdown, default_lanczos_k, lanczos_min_eig, sample_ball,
                                sample_sphere, sturm_count, tridiag_min_eig)
from saddle_escape.oracle import make_random_quadratic


def dense(A):
    return lambda v: A @ v


def test_identity_k1_is_exact():
    res = lanczos_min_eig(dense(np.eye(5)), 5, 1, 1e-10, seed=0)
    assert res.lambda_min_est == 1.0
    assert res.iterations_used == 1 and res.terminated_early


def test_diag_three_by_three():
    A = np.diag([-2.0, 1.0, 3.0])
    res = lanczos_min_eig(dense(A), 3, 3, 1e-10, seed=4)
    assert abs(res.lambda_min_est - np.linalg.eigvalsh(A)[0]) <= 1e-8


def test_linspace_spectrum_d50():
    q = make_random_quadratic(50, np.linspace(-1, 10, 50), seed=2)
    A = q.info["A"]
    res = lanczos_min_eig(dense(A), 50, 50, 1e-10 * q.ell, seed=3)
    assert abs(res.lambda_min_est - np.linalg.eigvalsh(A)[0]) <= 1e-6


def test_direction_is_unit_with_matching_rayleigh_quotient():
    q = make_random_quadratic(30, np.linspace(-2, 5, 30), seed=5)
    A = q.info["A"]
    res = lanczos_min_eig(dense(A), 30, 30, 1e-10, seed=1)
    u = res.direction
    assert abs(np.linalg.norm(u) - 1) <= 1e-10
    assert u @ A @ u == pytest.approx(res.lambda_min_est, rel=1e-6)


def test_accuracy_on_100_quadratics():
    rng = np.random.default_rng(0)
    good = 0
    for i in range(100):
        d = int(rng.integers(2, 51))
        lam = np.sort(rng.uniform(-3, 8, d))
        A = make_random_quadratic(d, lam, seed=i).info["A"]
        est = lanczos_min_eig(dense(A), d, d, 1e-10 * 8, seed=i).lambda_min_est
        good += abs(est - np.linalg.eigvalsh(A)[0]) <= 1e-6
    assert good >= 95


def test_monotone_in_k():
    q = make_random_quadratic(25, np.linspace(-1, 4, 25), seed=8)
    A = q.info["A"]
    ests = [lanczos_min_eig(dense(A), 25, k, 1e-10, seed=6).lambda_min_est for k in range(1, 26)]
    assert all(b <= a + 1e-10 for a, b in zip(ests, ests[1:]))


def test_bad_arguments():
    with pytest.raises(ValueError):
        lanczos_min_eig(dense(np.eye(2)), 2, 0, 1e-10)
    with pytest.raises(ValueError):
        lanczos_min_eig(dense(np.eye(2)), 2, 1, 0.0)


def test_zero_start_breakdown(monkeypatch):
    class ZeroRng:
        def standard_normal(self, d):
            return np.zeros(d)
    monkeypatch.setattr(np.random, "default_rng", lambda seed=None: ZeroRng())
    with pytest.raises(LanczosBreakdown):
        lanczos_min_eig(dense(np.eye(3)), 3, 2, 1e-10)


def test_default_k():
    assert default_lanczos_k(1, 25.0, 0.19) == 1
    assert default_lanczos_k(10, 25.0, 0.19) == 10
    assert default_lanczos_k(1000, 25.0, 0.19) == 200
    assert default_lanczos_k(100, 1.0, 1.0) == math.ceil(10 * math.log(100))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12), st.integers(0, 10_000))
def test_tridiag_bisection_matches_dense(alpha, seed):
    rng = np.random.default_rng(seed)
    beta = rng.uniform(-3, 3, len(alpha) - 1)
    T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
    assert tridiag_min_eig(alpha, beta) == pytest.approx(np.linalg.eigvalsh(T)[0], abs=1e-9)


def test_sturm_count_counts_eigenvalues_below():
    alpha, beta = [2.0, 2.0, 2.0], [-1.0, -1.0]
    ev = np.linalg.eigvalsh(np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1))
    for x in (-1.0, 1.0, 2.5, 10.0):
        assert sturm_count(alpha, beta, x) == int(np.sum(ev < x))


def test_ball_support_and_moments():
    rng = np.random.default_rng(1)
    xi = sample_ball(1.0, 10, rng, size=1_000_000)
    assert np.all(np.linalg.norm(xi, axis=1) <= 1.0)
    z = xi[:, 0]
    assert np.mean(z**2) == pytest.approx(1 / 12, rel=0.02)
    assert np.mean(z**4) == pytest.approx(3 / 168, rel=0.05)
    one = sample_ball(0.3, 7, rng)
    assert one.shape == (7,) and np.linalg.norm(one) <= 0.3
    with pytest.raises(ValueError):
        sample_ball(0.0, 3, rng)


def test_sphere_unit_norm_and_isotropy():
    rng = np.random.default_rng(2)
    assert abs(np.linalg.norm(sample_sphere(17, rng)) - 1) <= 1e-12
    v = sample_sphere(100, rng, size=100_000)
    assert np.allclose(np.linalg.norm(v, axis=1), 1, atol=1e-12)
    assert np.mean(v[:, 0] ** 2) == pytest.approx(1 / 100, rel=0.03)


def test_sphere_d1_is_a_fair_sign():
    v = sample_sphere(1, np.random.default_rng(3), size=100_000)
    assert set(np.unique(v)) <= {-1.0, 1.0}
    assert abs(np.mean(v > 0) - 0.5) <= 0.01


def test_sampling_reproducible():
    a = sample_ball(1.0, 5, np.random.default_rng(11), size=3)
    b = sample_ball(1.0, 5, np.random.default_rng(11), size=3)
    assert np.array_equal(a, b)
    assert np.array_equal(sample_sphere(4, np.random.default_rng(5)),
                          sample_sphere(4, np.random.default_rng(5)))
