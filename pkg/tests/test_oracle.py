import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saddle_escape.oracle import (BOX, NoisyGradModel, Problem, find_saddle, hvp_finite_difference,
                                  make_coupled_quartic, make_problem, make_random_quadratic,
                                  make_rosenbrock, make_separable_quartic, rosenbrock_saddle,
                                  standard_init, stochastic_grad)
from conftest import numeric_grad

FAMS = [("separable_quartic", 5), ("coupled_quartic", 5), ("rosenbrock", 5), ("random_quadratic", 5)]


@pytest.mark.parametrize("fam,d", FAMS)
def test_gradient_matches_finite_differences(fam, d, rng):
    p = make_problem(fam, d)
    for _ in range(5):
        x = rng.uniform(-1, 1, d)
        np.testing.assert_allclose(p.grad(x), numeric_grad(p.value, x), rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("fam,d", FAMS)
def test_hvp_matches_dense_hessian_oracle(fam, d, rng):
    p = make_problem(fam, d)
    x = rng.uniform(-1, 1, d)
    # independent oracle: Hessian by differencing the gradient
    H = np.column_stack([(p.grad(x + 1e-6 * e) - p.grad(x - 1e-6 * e)) / 2e-6 for e in np.eye(d)])
    v = rng.standard_normal(d)
    np.testing.assert_allclose(p.hvp(x, v), H @ v, rtol=1e-5, atol=1e-5)


def test_quartic_values_at_known_points():
    p = make_separable_quartic(3)
    assert p.value(np.zeros(3)) == 0.0
    xm = np.full(3, 1 / np.sqrt(2))
    assert p.value(xm) == pytest.approx(-0.75)
    assert np.allclose(p.grad(xm), 0, atol=1e-15)
    assert np.allclose(p.hessian(np.zeros(3)), -2 * np.eye(3))
    assert np.allclose(p.hessian(xm), 4 * np.eye(3))


def test_coupled_zero_coupling_is_bitwise_separable(rng):
    a, b = make_coupled_quartic(6, 0.0), make_separable_quartic(6)
    x = rng.standard_normal(6)
    assert a.value(x) == b.value(x)
    assert np.array_equal(a.grad(x), b.grad(x))


def test_constants_cover_box(rng):
    # Hessian norm on the box never exceeds ell
    for p in (make_separable_quartic(4), make_coupled_quartic(4), make_rosenbrock(4)):
        for _ in range(50):
            x = rng.uniform(-BOX, BOX, 4)
            assert np.max(np.abs(np.linalg.eigvalsh(p.hessian(x)))) <= p.ell + 1e-9


def test_rosenbrock_minimum_and_saddle():
    p = make_rosenbrock(10)
    assert p.value(np.ones(10)) == 0.0
    s = rosenbrock_saddle(10)
    assert np.linalg.norm(p.grad(s)) < 1e-8
    assert np.linalg.eigvalsh(p.hessian(s))[0] < 0


def test_random_quadratic_validation():
    with pytest.raises(ValueError):
        make_random_quadratic(3, [1.0, 2.0])
    with pytest.raises(ValueError):
        make_random_quadratic(3, [3.0, 2.0, 1.0])
    q = make_random_quadratic(4, [-1.0, 0.5, 2.0, 3.0], seed=1)
    assert np.allclose(np.linalg.eigvalsh(q.info["A"]), [-1.0, 0.5, 2.0, 3.0])
    assert q.info["lambda_min"] == -1.0 and q.rho == 0.0


def test_unknown_family():
    with pytest.raises(ValueError):
        make_problem("nope", 3)


def test_problem_without_hvp_uses_finite_differences(rng):
    base = make_separable_quartic(4)
    p = Problem(4, base.value, base.grad, None, ell=base.ell, rho=base.rho)
    assert not p.hvp_exact
    x, v = rng.uniform(-1, 1, 4), rng.standard_normal(4)
    np.testing.assert_allclose(p.hvp(x, v), base.hvp(x, v), rtol=1e-6, atol=1e-6)
    assert np.all(hvp_finite_difference(p, x, np.zeros(4)) == 0)


def test_problem_rejects_bad_constants():
    with pytest.raises(ValueError):
        Problem(2, lambda x: 0.0, lambda x: x, None, ell=0.0, rho=1.0)
    with pytest.raises(ValueError):
        Problem(0, lambda x: 0.0, lambda x: x, None, ell=1.0, rho=1.0)


def test_with_start_sets_gap():
    p = make_separable_quartic(4)
    x0 = np.zeros(4)
    assert p.with_start(x0).delta_f == pytest.approx(1.0)


def test_noise_model_zero_variance_is_exact(rng):
    p = make_separable_quartic(5)
    m = NoisyGradModel(p, 0.0, seed=1)
    x = rng.standard_normal(5)
    assert np.array_equal(stochastic_grad(m, x, 7), p.grad(x))


def test_noise_model_variance_scales_with_batch():
    p = make_separable_quartic(20)
    x = np.zeros(20)
    m = NoisyGradModel(p, 4.0, seed=3)
    for B in (1, 8):
        sq = [np.sum((stochastic_grad(m, x, B) - p.grad(x)) ** 2) for _ in range(4000)]
        assert np.mean(sq) == pytest.approx(4.0 / B, rel=0.05)


def test_noise_model_reproducible():
    p = make_separable_quartic(3)
    a, b = NoisyGradModel(p, 1.0, seed=9), NoisyGradModel(p, 1.0, seed=9)
    x = np.ones(3)
    assert np.array_equal(stochastic_grad(a, x, 4), stochastic_grad(b, x, 4))
    with pytest.raises(ValueError):
        stochastic_grad(a, x, 0)


def test_standard_init_quartic_has_a_zero_coordinate(rng):
    p = make_separable_quartic(10)
    x = standard_init(p, rng)
    assert np.linalg.norm(x) == pytest.approx(1e-3)
    assert np.sum(x == 0.0) >= 1


def test_find_saddle_from_near_origin():
    p = make_separable_quartic(3)
    s = find_saddle(p, np.array([0.1, -0.05, 0.02]))
    assert np.allclose(s, 0, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1.4, 1.4), min_size=2, max_size=8))
def test_quartic_hvp_symmetric(xs):
    p = make_coupled_quartic(len(xs))
    x = np.array(xs)
    rng = np.random.default_rng(len(xs))
    u, v = rng.standard_normal((2, len(xs)))
    assert u @ p.hvp(x, v) == pytest.approx(v @ p.hvp(x, u), rel=1e-10, abs=1e-10)
