"""Tests for nested radial factorization."""
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from lpnested.checks import numerical_jacobian
from lpnested.density import LpNestedModel, log_density
from lpnested.nrf import (
    child_source,
    factorial_log_density,
    node_target,
    nrf_log_jacobian,
    nrf_model_transform,
    nrf_transform,
    nrf_transform_with_log_jacobian,
    pgn_log_pdf,
    radial_remap,
)
from lpnested.radial import GammaP, LogNormal, white_scale
from lpnested.sampler import sample
from lpnested.tree import flat_tree, parse_tree


@pytest.fixture
def source_tree():
    return parse_tree("(1.5 0 (2.5 1 2))")


def test_gaussian_input_is_left_alone(gaussian_model, rng):
    """Flat L_2 with a unit-variance chi radial is already factorial."""
    y = rng.normal(size=(200, 3))
    z, logjac = nrf_transform_with_log_jacobian(y, gaussian_model.tree, gaussian_model.radial)
    assert_allclose(z, y, rtol=1e-8)
    assert_allclose(logjac, 0.0, atol=1e-8)


def test_change_of_variables_identity(deep_tree, rng):
    W = np.linalg.qr(rng.normal(size=(5, 5)))[0] * 1.7
    model = LpNestedModel(deep_tree, LogNormal(0.3, 0.5), W=W, mean=np.ones(5))
    x = sample(model, rng, 1000)
    z, logjac, logdet = nrf_model_transform(model, x)
    assert logdet == pytest.approx(5 * np.log(1.7))
    assert_allclose(factorial_log_density(deep_tree, z) + logjac + logdet, log_density(model, x), rtol=1e-8)


def test_log_jacobian_matches_numerical(source_tree, rng):
    source = LogNormal(0.0, 0.5)
    y = sample(LpNestedModel(source_tree, source), rng, 200)
    y = y[np.min(np.abs(y), axis=1) > 0.05][:30]
    for point in y:
        J = numerical_jacobian(lambda v: nrf_transform(v, source_tree, source), point)
        numeric = np.linalg.slogdet(J)[1]
        assert nrf_log_jacobian(point, source_tree, source) == pytest.approx(numeric, rel=1e-4, abs=1e-6)


def test_single_vector_shapes(source_tree):
    z, logjac = nrf_transform_with_log_jacobian(np.array([0.3, -0.8, 1.1]), source_tree, LogNormal(0.0, 1.0))
    assert z.shape == (3,)
    assert isinstance(logjac, float)
    assert np.sign(z).tolist() == [1.0, -1.0, 1.0]


def test_output_is_factorial(source_tree, rng):
    model = LpNestedModel(source_tree, LogNormal(0.0, 0.8))
    x = sample(model, rng, 40000)
    before = np.corrcoef(x ** 2, rowvar=False)
    z = nrf_transform(x, source_tree, model.radial)
    after = np.corrcoef(z ** 2, rowvar=False)
    assert np.max(np.abs(before - np.eye(3))) > 0.1
    assert np.max(np.abs(after - np.eye(3))) < 0.03
    for i, p in enumerate(source_tree.leaf_parent_exponents()):
        # |z|^p / s is Gamma(1/p, 1) for a p-generalized Normal coordinate
        g = np.abs(z[:, i]) ** p / white_scale(p)
        assert stats.kstest(g, stats.gamma(1.0 / p).cdf).pvalue > 1e-3


def test_zero_vector_is_fixed(source_tree):
    z, logjac = nrf_transform_with_log_jacobian(np.zeros((2, 3)), source_tree, LogNormal(0.0, 1.0))
    assert_allclose(z, 0.0)
    assert_allclose(logjac, 0.0)


def test_pgn_density():
    for p in [0.8, 1.0, 2.0, 3.5]:
        s = white_scale(p)
        half, _ = integrate.quad(lambda z: np.exp(pgn_log_pdf(z, p, s)), 0.0, np.inf)
        assert 2 * half == pytest.approx(1.0, rel=1e-8)
    z = np.linspace(-3, 3, 13)
    assert_allclose(pgn_log_pdf(z, 2.0, 2.0), stats.norm.logpdf(z), rtol=1e-12)


def test_factorial_density_for_gaussian_leaves(rng):
    z = rng.normal(size=(10, 3))
    assert_allclose(factorial_log_density(flat_tree(3, 2.0), z), stats.norm.logpdf(z).sum(axis=1), rtol=1e-12)


def test_node_laws(source_tree):
    root = node_target(source_tree, ())
    assert (root.shape, root.p) == (3 / 1.5, 1.5)
    assert root.scale == pytest.approx(white_scale(1.5))
    child = child_source(source_tree, (1,))
    assert (child.shape, child.p) == (2 / 1.5, 1.5)
    target = node_target(source_tree, (1,))
    assert (target.shape, target.p) == (2 / 2.5, 2.5)


def test_radial_remap_uses_the_tail():
    source = LogNormal(0.0, 1.0)
    target = GammaP(shape=2.0, scale=1.0, p=1.0)
    r = np.exp(np.array([-2.0, 0.0, 5.0, 7.0]))
    g = radial_remap(r, source, target)
    assert np.all(np.isfinite(g))
    assert np.all(np.diff(g) > 0)
    assert_allclose(target.sf(g[2:]), source.sf(r[2:]), rtol=1e-6)
    assert_allclose(target.cdf(g[:2]), source.cdf(r[:2]), rtol=1e-10)
