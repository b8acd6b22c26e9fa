"""Tests for special functions and sphere geometry."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from lpnested.checks import central_difference, random_tree
from lpnested.exceptions import DomainError
from lpnested.special import (
    digamma,
    grad_p_log_surface,
    inv_reg_inc_gamma_P,
    inv_reg_inc_gamma_Q,
    log_beta,
    log_gamma,
    log_surface_area,
    log_surface_area_beta,
    log_uniform_normalizer,
    log_volume,
    reg_inc_gamma_P,
    reg_inc_gamma_Q,
    sphere_measure,
)
from lpnested.tree import flat_tree, parse_tree


def test_l2_sphere_surface():
    """Surface of the Euclidean unit sphere in 3-d is 4 pi."""
    assert np.exp(log_surface_area(flat_tree(3, 2.0))) == pytest.approx(4 * np.pi, rel=1e-10)
    assert np.exp(log_surface_area(flat_tree(2, 2.0))) == pytest.approx(2 * np.pi, rel=1e-10)


def test_l1_ball_volume():
    """The 3-d cross-polytope has volume 4/3."""
    assert np.exp(log_volume(flat_tree(3, 1.0))) == pytest.approx(4.0 / 3.0, rel=1e-10)


def test_surface_scales_with_radius(deep_tree):
    assert log_surface_area(deep_tree, 2.5) == pytest.approx(
        log_surface_area(deep_tree) + (deep_tree.n - 1) * np.log(2.5)
    )
    with pytest.raises(DomainError):
        log_surface_area(deep_tree, 0.0)


def test_beta_and_gamma_forms_agree(rng):
    for _ in range(20):
        tree = random_tree(rng, int(rng.integers(2, 8)))
        assert log_surface_area_beta(tree) == pytest.approx(log_surface_area(tree), abs=1e-10)


def test_nested_l2_equals_flat_l2():
    """Nesting L_2 inside L_2 does not change the sphere."""
    nested = parse_tree("(2.0 (2.0 0 1) 2)")
    assert log_surface_area(nested) == pytest.approx(log_surface_area(flat_tree(3, 2.0)), abs=1e-12)


def test_grad_p_log_surface(rng):
    for _ in range(10):
        tree = random_tree(rng, int(rng.integers(2, 7)))
        fd = central_difference(lambda q: log_surface_area(tree.with_exponents(q)), tree.exponents())
        assert_allclose(grad_p_log_surface(tree), fd, rtol=1e-6, atol=1e-7)


def test_sphere_measure_and_uniform_normalizer(deep_tree):
    measure = sphere_measure(deep_tree)
    assert measure.log_surface == pytest.approx(log_surface_area(deep_tree))
    assert measure.log_volume == pytest.approx(log_volume(deep_tree))
    assert log_uniform_normalizer(deep_tree) == pytest.approx(np.log(2.0) - measure.log_surface)


def test_special_function_values():
    assert log_gamma(5.0) == pytest.approx(np.log(24.0))
    assert log_beta(2.0, 3.0) == pytest.approx(np.log(1.0 / 12.0))
    assert digamma(1.0) == pytest.approx(-np.euler_gamma)
    assert reg_inc_gamma_P(1.0, 2.0) == pytest.approx(1.0 - np.exp(-2.0))
    assert_allclose(reg_inc_gamma_P(2.5, [0.1, 1.0, 7.0]) + reg_inc_gamma_Q(2.5, [0.1, 1.0, 7.0]), 1.0)


def test_incomplete_gamma_inverses():
    a = 0.7
    q = np.array([1e-6, 0.3, 0.5, 0.99])
    assert_allclose(reg_inc_gamma_P(a, inv_reg_inc_gamma_P(a, q)), q, rtol=1e-8)
    tail = np.array([1e-20, 1e-5, 0.2])
    assert_allclose(reg_inc_gamma_Q(a, inv_reg_inc_gamma_Q(a, tail)), tail, rtol=1e-6)


@pytest.mark.parametrize("call", [
    lambda: log_gamma(0.0),
    lambda: digamma(-1.0),
    lambda: log_beta(1.0, -2.0),
    lambda: reg_inc_gamma_P(-1.0, 1.0),
    lambda: reg_inc_gamma_Q(1.0, -0.5),
    lambda: inv_reg_inc_gamma_P(1.0, 1.5),
])
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()
