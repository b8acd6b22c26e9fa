"""Polar-like coordinates for L_p-nested functions.

A point x != 0 is written as a radius r = f(x), the first n-1 normalised
coordinates u_i = x_i / r and the sign of the last coordinate. The last
coordinate of the direction is recovered by peeling the tree from the root
down to the rightmost leaf: at each node on that path the remaining norm is
the p-th root residual of the parent's value minus the siblings' values.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .exceptions import DimensionError, DomainError, NumericalError
from .tree import LpTree, evaluate_batch

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class PolarPoint:
    """Radius, first n-1 direction coordinates and the sign of the last one."""
    r: float
    u: np.ndarray
    last_sign: int = 1


def to_polar(tree: LpTree, x: np.ndarray) -> PolarPoint:
    """Polar coordinates of a non-zero point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.n,):
        raise DimensionError(f"expected a vector of length {tree.n}, got shape {x.shape}")
    r = float(tree(x))
    if r == 0:
        raise DomainError("origin has no direction")
    return PolarPoint(r=r, u=x[:-1] / r, last_sign=1 if x[-1] >= 0 else -1)


def to_polar_batch(tree: LpTree, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched polar coordinates: (r, U, signs) for an (m, n) array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != tree.n:
        raise DimensionError(f"expected shape (m, {tree.n}), got {X.shape}")
    r = evaluate_batch(tree, X)[()]
    if np.any(r == 0):
        raise DomainError("origin has no direction")
    signs = np.where(X[:, -1] >= 0, 1, -1)
    return r, X[:, :-1] / r[:, None], signs


def _path_residuals(tree: LpTree, U: np.ndarray) -> Tuple[List[Tuple[float, float]], List[np.ndarray]]:
    """Residuals g^p along the root-to-last-leaf path.

    Returns the (p_parent, p_child) exponent pairs for each non-root path
    node and the residual powers g_child^{p_parent}.
    """
    m = U.shape[0]
    padded = np.concatenate([U, np.zeros((m, 1))], axis=1)
    values = evaluate_batch(tree, padded)
    path = tree.last_leaf_path()
    pairs = []
    residuals = []
    g = np.ones(m)
    for parent, child in zip(path[:-1], path[1:]):
        p = tree.p(parent)
        siblings = [c for c in tree.children(parent) if c != child]
        with np.errstate(over="ignore", under="ignore"):
            res = np.power(g, p) - sum(np.power(values[s], p) for s in siblings)
        p_child = tree.p(child) if tree.is_inner(child) else 1.0
        pairs.append((p, p_child))
        residuals.append(res)
        g = np.power(np.maximum(res, 0.0), 1.0 / p)
    return pairs, residuals


def last_coordinate(tree: LpTree, U: np.ndarray, strict: bool = True) -> np.ndarray:
    """Non-negative u_n solving f(u_1, ..., u_{n-1}, u_n) = 1, batched."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != tree.n - 1:
        raise DimensionError(f"expected {tree.n - 1} direction coordinates, got {U.shape[1]}")
    pairs, residuals = _path_residuals(tree, U)
    for res in residuals:
        if strict and np.any(res < -RESIDUAL_TOL):
            raise DomainError("direction lies outside the unit sphere's projection")
    res = np.maximum(residuals[-1], 0.0)
    return np.power(res, 1.0 / pairs[-1][0])


def from_polar(tree: LpTree, point: PolarPoint) -> np.ndarray:
    """Inverse of :func:`to_polar`."""
    u = np.asarray(point.u, dtype=float)
    if u.shape != (tree.n - 1,):
        raise DimensionError(f"expected {tree.n - 1} direction coordinates, got shape {u.shape}")
    un = float(last_coordinate(tree, u[None, :])[0])
    x = np.empty(tree.n)
    x[:-1] = point.r * u
    x[-1] = point.r * point.last_sign * un
    return x


def path_log_G(tree: LpTree, U: np.ndarray) -> np.ndarray:
    """Sum over the path nodes of log G = (p_child - p_parent) log g_child, batched."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    pairs, residuals = _path_residuals(tree, U)
    total = np.zeros(U.shape[0])
    for (p, p_child), res in zip(pairs, residuals):
        if np.any(res <= 0):
            raise NumericalError("direction on the boundary: non-positive residual on the leaf path")
        total += (p_child - p) / p * np.log(res)
    return total


def log_jacobian_det(tree: LpTree, point: PolarPoint) -> float:
    """log |det J| of the map from (r, u) to x."""
    if not point.r > 0:
        raise DomainError(f"radius must be positive, got {point.r}")
    u = np.asarray(point.u, dtype=float)
    if u.shape != (tree.n - 1,):
        raise DimensionError(f"expected {tree.n - 1} direction coordinates, got shape {u.shape}")
    return float((tree.n - 1) * np.log(point.r) + path_log_G(tree, u[None, :])[0])
