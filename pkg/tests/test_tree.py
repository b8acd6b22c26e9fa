"""Tests for tree parsing, evaluation and gradients."""
import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from lpnested.checks import central_difference
from lpnested.exceptions import DimensionError, DomainError, TreeStructureError, TreeSyntaxError
from lpnested.tree import (
    Inner,
    Leaf,
    LpTree,
    NodeVisitCounter,
    evaluate,
    flat_tree,
    full_binary_tree,
    gradient_p,
    gradient_x,
    parse_tree,
    serialize_tree,
    simplify_tree,
    value_and_gradients,
)


def test_parse_structure(nested_tree):
    """Parsed tree exposes counts and exponents in pre-order."""
    assert nested_tree.n == 3
    assert nested_tree.n_inner == 2
    assert nested_tree.inner_paths == ((), (1,))
    assert_allclose(nested_tree.exponents(), [2.0, 1.0])
    assert nested_tree.leaf_counts() == {(): 3, (1,): 2}
    assert nested_tree.children_counts() == {(): 2, (1,): 2}
    assert nested_tree.leaf_range((1,)) == (1, 3)
    assert nested_tree.last_leaf_path() == [(), (1,), (1, 1)]
    assert_allclose(nested_tree.leaf_parent_exponents(), [2.0, 1.0, 1.0])


def test_serialize_round_trip():
    text = "(1.5 (2.5 0 1) (0.8 2 (1.2 3 4)))"
    assert serialize_tree(parse_tree(text)) == text
    assert serialize_tree(parse_tree("(  2\n 0   1 )")) == "(2.0 0 1)"
    assert parse_tree(text) == parse_tree(serialize_tree(parse_tree(text)))


@pytest.mark.parametrize("text", ["", "(2.0 0", "(2.0 0 1))", "(2.0 0 x)", "( )", "2.0 0 1"])
def test_syntax_errors(text):
    with pytest.raises(TreeSyntaxError):
        parse_tree(text)


def test_syntax_error_position():
    with pytest.raises(TreeSyntaxError) as info:
        parse_tree("(2.0 0 1 ?)")
    assert info.value.position == 9
    assert "position 9" in str(info.value)


def test_single_child_is_rejected():
    with pytest.raises(TreeSyntaxError):
        parse_tree("(2.0 0 (1.0 1))")


@pytest.mark.parametrize("text", ["(2.0 0 0)", "(2.0 0 2)", "(-1.0 0 1)", "(0 0 1)", "(2.0 1 0)"])
def test_structure_errors(text):
    with pytest.raises(TreeStructureError):
        parse_tree(text)


def test_exponent_clamped_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        tree = parse_tree("(1e5 0 (1e-6 1 2))")
    assert_allclose(tree.exponents(), [1e3, 1e-3])
    assert "clamped" in caplog.text


def test_constructors():
    assert serialize_tree(flat_tree(3, 2.0)) == "(2.0 0 1 2)"
    assert serialize_tree(full_binary_tree(4, 2.0)) == "(2.0 (2.0 0 1) (2.0 2 3))"
    assert serialize_tree(full_binary_tree(3, 1.0)) == "(1.0 (1.0 0 1) 2)"
    with pytest.raises(TreeStructureError):
        flat_tree(1, 2.0)
    with pytest.raises(TreeStructureError):
        LpTree(Leaf(0))


def test_evaluate_known_values(nested_tree):
    """Inner L_1 of (1, 3) is 4; root L_2 of (3, 4) is 5."""
    f, values = evaluate(nested_tree, np.array([3.0, -1.0, 3.0]))
    assert f == pytest.approx(5.0)
    assert values[(1,)] == pytest.approx(4.0)
    assert values[(0,)] == pytest.approx(3.0)
    assert values.root == pytest.approx(5.0)


def test_evaluate_batch_and_homogeneity(deep_tree, rng):
    X = rng.normal(size=(50, 5))
    f = deep_tree(X)
    assert f.shape == (50,)
    assert_allclose([deep_tree(x) for x in X], f)
    assert_allclose(deep_tree(-2.5 * X), 2.5 * f, rtol=1e-12)
    assert deep_tree(np.zeros(5)) == 0.0


def test_evaluate_extreme_exponents_stay_finite():
    big = flat_tree(2, 1e3)
    assert np.isfinite(big(np.array([1e300, 1e300])))
    assert big(np.array([1e300, 1e300])) == pytest.approx(1e300 * 2 ** 1e-3)
    small = flat_tree(2, 0.5)
    assert small(np.array([1e-200, 0.0])) == pytest.approx(1e-200)


def test_dimension_mismatch(nested_tree):
    with pytest.raises(DimensionError):
        nested_tree(np.ones(4))


def test_gradient_x_matches_differences(deep_tree, rng):
    for _ in range(10):
        x = rng.uniform(0.2, 2.0, size=5) * rng.choice([-1, 1], size=5)
        assert_allclose(gradient_x(deep_tree, x), central_difference(deep_tree, x), rtol=1e-6, atol=1e-8)


def test_gradient_x_zero_coordinate(nested_tree):
    grad = gradient_x(nested_tree, np.array([0.0, 1.0, 2.0]))
    assert grad[0] == 0.0
    assert np.all(np.isfinite(grad))


def test_gradient_p_matches_differences(deep_tree, rng):
    x = rng.uniform(0.2, 2.0, size=5)
    p = deep_tree.exponents()
    fd = central_difference(lambda q: deep_tree.with_exponents(q)(x), p)
    assert_allclose(gradient_p(deep_tree, x), fd, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("build", [full_binary_tree, flat_tree])
def test_gradient_p_cost_grows_linearly(build, rng):
    dims = [4, 8, 16, 32, 64]
    counts = []
    for n in dims:
        tree = build(n, 1.3)
        counter = NodeVisitCounter()
        gradient_p(tree, rng.normal(size=(40, n)), counter)
        counts.append(counter.count)
    assert stats.linregress(dims, counts).rvalue ** 2 > 0.99


def test_value_and_gradients_agree(deep_tree, rng):
    X = rng.normal(size=(20, 5))
    f, gx, gp = value_and_gradients(deep_tree, X)
    assert_allclose(f, deep_tree(X))
    assert_allclose(gx, gradient_x(deep_tree, X))
    assert_allclose(gp, gradient_p(deep_tree, X))


def test_gradient_x_euler_identity(deep_tree, rng):
    """Positive homogeneity of degree one: x . grad f(x) = f(x)."""
    X = rng.normal(size=(30, 5))
    assert_allclose(np.sum(X * gradient_x(deep_tree, X), axis=1), deep_tree(X), rtol=1e-10)


def test_node_visit_counter_scales_with_rows(deep_tree, rng):
    counter = NodeVisitCounter()
    gradient_p(deep_tree, rng.normal(size=(10, 5)), counter)
    per_ten = counter.count
    counter.reset()
    gradient_p(deep_tree, rng.normal(size=(40, 5)), counter)
    assert counter.count == 4 * per_ten
    assert per_ten <= 10 * 2 * (deep_tree.n + deep_tree.n_inner)


def test_with_exponents_and_subtree(deep_tree):
    tree = deep_tree.with_exponents([1.0, 2.0, 3.0, 4.0])
    assert serialize_tree(tree) == "(1.0 (2.0 0 1) (3.0 2 (4.0 3 4)))"
    assert serialize_tree(deep_tree.subtree((1,))) == "(0.8 0 (1.2 1 2))"
    with pytest.raises(DimensionError):
        deep_tree.with_exponents([1.0])
    with pytest.raises(TreeStructureError):
        deep_tree.subtree((0, 0))


def test_simplify_tree():
    assert serialize_tree(simplify_tree(parse_tree("(2.0 0 (2.0 1 2))"), 0.0)) == "(2.0 0 1 2)"
    assert serialize_tree(simplify_tree(parse_tree("(2.0 0 (1.0 1 2))"), 0.5)) == "(2.0 0 (1.0 1 2))"
    assert serialize_tree(simplify_tree(parse_tree("(2.0 0 (1.9 1 (1.95 2 3)))"), 0.15)) == "(2.0 0 1 2 3)"
    with pytest.raises(DomainError):
        simplify_tree(parse_tree("(2.0 0 1)"), -1.0)


def test_simplified_tree_keeps_values():
    tree = parse_tree("(2.0 0 (2.0 1 2))")
    x = np.array([0.3, -1.2, 2.0])
    assert simplify_tree(tree, 0.0)(x) == pytest.approx(tree(x))


def test_tree_equality_and_hash():
    a = LpTree(Inner(p=2.0, children=(Leaf(0), Leaf(1))))
    b = parse_tree("(2 0 1)")
    assert a == b
    assert hash(a) == hash(b)
    assert a != parse_tree("(1 0 1)")
