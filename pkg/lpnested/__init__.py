"""L_p-nested symmetric distributions."""

__version__ = "1.0.0"
__author__ = "artqcid"

from .config import LpNestedConfig
from .density import LpNestedModel, log_density
from .exceptions import (
    DataError,
    DimensionError,
    DomainError,
    LpNestedError,
    NumericalError,
    TreeStructureError,
    TreeSyntaxError,
)
from .fitting import fit
from .models import FitConfig, FitReport, ModelSpec
from .nrf import nrf_transform
from .radial import GammaP, LogNormal, LogNormalMixture, RadialModel, UniformBallRadial
from .sampler import sample
from .tree import Inner, Leaf, LpTree, parse_tree, serialize_tree

__all__ = [
    "LpNestedConfig",
    "LpNestedModel",
    "log_density",
    "fit",
    "sample",
    "nrf_transform",
    "FitConfig",
    "FitReport",
    "ModelSpec",
    "RadialModel",
    "GammaP",
    "LogNormal",
    "LogNormalMixture",
    "UniformBallRadial",
    "LpTree",
    "Leaf",
    "Inner",
    "parse_tree",
    "serialize_tree",
    "LpNestedError",
    "TreeSyntaxError",
    "TreeStructureError",
    "DimensionError",
    "DomainError",
    "DataError",
    "NumericalError",
]
