"""Tests for L_p-nested densities, layer marginals and the Dirichlet check."""
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from lpnested.checks import grid_integral_2d
from lpnested.density import (
    LpNestedModel,
    layer_marginal_log_density,
    log_density,
    marginal_histogram,
    reduced_tree,
    root_children_dirichlet_check,
    uniform_sphere_log_density,
    uniform_sphere_log_density_batch,
)
from lpnested.exceptions import DataError, DimensionError, DomainError, NumericalError
from lpnested.polar import PolarPoint
from lpnested.radial import GammaP, LogNormal, UniformBallRadial
from lpnested.sampler import sample
from lpnested.special import log_volume
from lpnested.tree import evaluate_batch, flat_tree, parse_tree, serialize_tree


def test_gaussian_special_case(gaussian_model, rng):
    x = rng.normal(size=(100, 3))
    expected = stats.multivariate_normal(np.zeros(3), np.eye(3)).logpdf(x)
    assert_allclose(log_density(gaussian_model, x), expected, rtol=1e-10)


def test_gaussian_with_linear_map(rng):
    W = rng.normal(size=(3, 3)) + 2 * np.eye(3)
    mean = np.array([0.5, -1.0, 2.0])
    model = LpNestedModel(flat_tree(3, 2.0), GammaP(1.5, 2.0, 2.0), W=W, mean=mean)
    x = rng.normal(size=(50, 3))
    cov = np.linalg.inv(W.T @ W)
    expected = stats.multivariate_normal(mean, cov).logpdf(x)
    assert_allclose(model.log_density(x), expected, rtol=1e-9)
    assert_allclose(model.mix(model.demix(x)), x, atol=1e-12)


def test_single_point_and_origin(nested_model):
    value = log_density(nested_model, np.array([0.5, -0.3, 1.0]))
    assert isinstance(value, float)
    assert log_density(nested_model, np.zeros(3)) == -np.inf


def test_model_validation(nested_tree):
    with pytest.raises(DimensionError):
        LpNestedModel(nested_tree, LogNormal(0.0, 1.0), W=np.eye(2))
    with pytest.raises(NumericalError):
        LpNestedModel(nested_tree, LogNormal(0.0, 1.0), W=np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        LpNestedModel(nested_tree, LogNormal(0.0, 1.0), mean=np.zeros(2))
    with pytest.raises(DimensionError):
        log_density(LpNestedModel(nested_tree, LogNormal(0.0, 1.0)), np.ones(4))


def test_spec_round_trip(nested_tree, rng):
    model = LpNestedModel(nested_tree, LogNormal(0.1, 0.4), W=rng.normal(size=(3, 3)), mean=np.ones(3))
    restored = LpNestedModel.from_spec(model.to_spec())
    x = rng.normal(size=(10, 3))
    assert serialize_tree(restored.tree) == serialize_tree(model.tree)
    assert_allclose(restored.log_density(x), model.log_density(x))
    assert model.to_spec().model_dump(by_alias=True)["schema"] == 1


def test_two_dimensional_density_integrates_to_one():
    model = LpNestedModel(parse_tree("(1.5 0 1)"), GammaP(shape=2.0, scale=1.0, p=1.2))
    lim = float(model.radial.quantile(1 - 1e-10))
    assert grid_integral_2d(model, lim) == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_uniform_sphere_density_integrates_to_one(p):
    tree = flat_tree(2, p)

    def density(u):
        try:
            return float(np.exp(uniform_sphere_log_density_batch(tree, np.array([[u]]))[0]))
        except NumericalError:
            return 0.0

    # density in u_1 with both signs of u_2 counted; symmetric in u_1
    half, _ = integrate.quad(density, 0.0, 1.0, limit=200)
    assert 2 * half == pytest.approx(1.0, abs=1e-4)


def test_uniform_sphere_l2_closed_form():
    """On the unit circle the density in u is 1 / (pi sqrt(1 - u^2))."""
    value = uniform_sphere_log_density(flat_tree(2, 2.0), PolarPoint(r=1.0, u=np.array([0.6])))
    assert value == pytest.approx(-np.log(np.pi * 0.8))
    with pytest.raises(DomainError):
        uniform_sphere_log_density(flat_tree(2, 2.0), PolarPoint(r=2.0, u=np.array([0.6])))


def test_reduced_tree():
    tree = parse_tree("(1.5 (2.5 0 1) (0.8 2 (1.2 3 4)))")
    small, slots = reduced_tree(tree, [(0,), (1, 1)])
    assert serialize_tree(small) == "(1.5 0 (0.8 1 2))"
    assert slots == [("node", (0,)), ("leaf", 2), ("node", (1, 1))]
    with pytest.raises(DomainError):
        reduced_tree(tree, [()])
    with pytest.raises(DomainError):
        reduced_tree(tree, [(1,), (1, 1)])
    with pytest.raises(DomainError):
        reduced_tree(tree, [(0, 0)])


def test_layer_marginal_integrates_to_one():
    """Collapsing the inner node of (2 0 (1.5 1 2)) leaves a density in (x_0, v) with v > 0."""
    model = LpNestedModel(parse_tree("(2.0 0 (1.5 1 2))"), GammaP(shape=1.5, scale=1.0, p=2.0))
    lim = float(model.radial.quantile(1 - 1e-12))
    k = 600
    h = lim / k
    mid = (np.arange(k) + 0.5) * h
    a, v = np.meshgrid(mid, mid, indexing="ij")
    dens = np.exp(layer_marginal_log_density(model, a.reshape(-1, 1), v.reshape(-1, 1), [(1,)]))
    # x_0 takes both signs
    assert 2 * dens.sum() * h * h == pytest.approx(1.0, abs=0.01)


def test_layer_marginal_of_two_collapsed_children(rng):
    """Both root children collapsed: the density of (v_0, v_1) on the positive quadrant."""
    model = LpNestedModel(parse_tree("(1.3 (2.0 0 1) (1.0 2 3))"), LogNormal(0.0, 0.4))
    lim = float(model.radial.quantile(1 - 1e-12))
    k = 600
    h = lim / k
    mid = (np.arange(k) + 0.5) * h
    a, b = np.meshgrid(mid, mid, indexing="ij")
    V = np.column_stack([a.ravel(), b.ravel()])
    dens = np.exp(layer_marginal_log_density(model, np.zeros((V.shape[0], 0)), V, [(0,), (1,)]))
    assert dens.sum() * h * h == pytest.approx(1.0, abs=0.01)


def test_layer_marginal_errors(nested_model):
    with pytest.raises(DomainError):
        layer_marginal_log_density(nested_model, np.array([0.5]), np.array([-1.0]), [(1,)])
    with pytest.raises(DimensionError):
        layer_marginal_log_density(nested_model, np.array([0.5, 1.0]), np.array([1.0]), [(1,)])


def test_marginal_histogram(nested_model, rng):
    x = sample(nested_model, rng, 5000)
    density, edges = marginal_histogram(x, [0], bins=40)
    widths = np.diff(edges[0])
    assert np.sum(density * widths) == pytest.approx(1.0)
    density2, edges2 = marginal_histogram(x, [0, 2], bins=10)
    assert density2.shape == (10, 10)
    with pytest.raises(DimensionError):
        marginal_histogram(x, [3])


def test_root_children_dirichlet(rng):
    model = LpNestedModel(parse_tree("(1.3 (2.0 0 1) 2 (0.7 3 4))"), LogNormal(0.0, 1.0))
    report = root_children_dirichlet_check(model, sample(model, rng, 20000))
    assert report.passed
    assert_allclose(report.alphas, [2 / 1.3, 1 / 1.3, 2 / 1.3])
    assert len(report.pvalues) == 3


def test_root_children_dirichlet_detects_wrong_exponent(rng):
    model = LpNestedModel(parse_tree("(1.0 0 1 2)"), LogNormal(0.0, 1.0))
    report = root_children_dirichlet_check(model, sample(model, rng, 20000), p_root=3.0)
    assert not report.passed


def test_root_children_dirichlet_needs_samples(nested_model, rng):
    with pytest.raises(DataError):
        root_children_dirichlet_check(nested_model, sample(nested_model, rng, 100))


def test_layer_marginal_matches_sampled_histogram(rng):
    """Counts of (|x_0|, v) from the sampler agree with the binned layer marginal."""
    tree = parse_tree("(2.0 0 (1.5 1 2))")
    model = LpNestedModel(tree, GammaP(shape=1.5, scale=2.0, p=2.0))
    m = 100000
    x = sample(model, rng, m)
    a = np.abs(x[:, 0])
    v = evaluate_batch(tree.subtree((1,)), x[:, 1:])[()]
    a_edges = np.array([0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0])
    v_edges = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0])
    counts, _, _ = np.histogram2d(a, v, bins=[a_edges, v_edges])

    k = 50
    probs = np.empty(counts.shape)
    for i in range(len(a_edges) - 1):
        for j in range(len(v_edges) - 1):
            da = (a_edges[i + 1] - a_edges[i]) / k
            dv = (v_edges[j + 1] - v_edges[j]) / k
            am, vm = np.meshgrid(
                a_edges[i] + (np.arange(k) + 0.5) * da,
                v_edges[j] + (np.arange(k) + 0.5) * dv,
                indexing="ij",
            )
            dens = np.exp(layer_marginal_log_density(model, am.reshape(-1, 1), vm.reshape(-1, 1), [(1,)]))
            probs[i, j] = 2 * dens.sum() * da * dv

    observed = np.append(counts.ravel(), m - counts.sum())
    expected = np.append(probs.ravel() * m, m - probs.sum() * m)
    assert expected.min() > 5
    assert stats.chisquare(observed, expected).pvalue > 0.01


@pytest.mark.parametrize("p0,p1", [(2.0, 0.5), (1.5, 3.0)])
def test_uniform_ball_pair_marginal_closed_form(p0, p1):
    """Integrating x_1 out of the uniform ball of (p0 (p1 0 1) 2) gives a non-nested marginal.

    The density of (x_0, x_2) is 2 ((1 - |x_2|^p0)^(p1/p0) - |x_0|^p1)^(1/p1) / vol.
    """
    tree = parse_tree(f"({p0} ({p1} 0 1) 2)")
    model = LpNestedModel(tree, UniformBallRadial(3))
    inv_vol = np.exp(-log_volume(tree))

    def closed_form(x0, x2):
        inner = (1 - abs(x2) ** p0) ** (p1 / p0) - abs(x0) ** p1
        return 2 * inner ** (1 / p1) * inv_vol if inner > 0 else 0.0

    for x0, x2 in [(0.1, 0.2), (0.3, -0.5), (-0.05, 0.8), (0.2, 0.1)]:
        half = closed_form(x0, x2) / (2 * inv_vol)
        numeric, _ = integrate.quad(
            lambda t: float(np.exp(model.log_density(np.array([x0, t, x2])))),
            -half,
            half,
            limit=200,
        )
        assert numeric == pytest.approx(closed_form(x0, x2), rel=1e-6)
    assert closed_form(0.9, 0.9) == 0.0
