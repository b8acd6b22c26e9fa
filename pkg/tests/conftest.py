"""Shared fixtures."""
import numpy as np
import pytest

from lpnested.density import LpNestedModel
from lpnested.radial import GammaP, LogNormal
from lpnested.tree import flat_tree, parse_tree

NESTED_TREE = "(2.0 0 (1.0 1 2))"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def nested_tree():
    return parse_tree(NESTED_TREE)


@pytest.fixture
def deep_tree():
    return parse_tree("(1.5 (2.5 0 1) (0.8 2 (1.2 3 4)))")


@pytest.fixture
def gaussian_model():
    """Standard normal in 3-d written as an L_2 model with a chi radial."""
    return LpNestedModel(flat_tree(3, 2.0), GammaP(shape=1.5, scale=2.0, p=2.0))


@pytest.fixture
def nested_model(nested_tree):
    return LpNestedModel(nested_tree, LogNormal(0.0, 0.5))
