"""Special functions and the geometry of the L_p-nested unit sphere.

All measures are returned in log-space.
"""
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special as sp

from .exceptions import DomainError
from .tree import LpTree

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


# ----------------------------------------------------------------------
# Special functions
# ----------------------------------------------------------------------

def _require(cond, message: str) -> None:
    if not np.all(cond):
        raise DomainError(message)


def log_gamma(x: ArrayLike) -> ArrayLike:
    """log Gamma(x) for x > 0."""
    x = np.asarray(x, dtype=float)
    _require(x > 0, "log_gamma requires x > 0")
    return sp.gammaln(x)[()]


def digamma(x: ArrayLike) -> ArrayLike:
    """Digamma function for x > 0."""
    x = np.asarray(x, dtype=float)
    _require(x > 0, "digamma requires x > 0")
    return sp.digamma(x)[()]


def log_beta(a: ArrayLike, b: ArrayLike) -> ArrayLike:
    """log B(a, b) for a, b > 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _require((a > 0) & (b > 0), "log_beta requires a > 0 and b > 0")
    return sp.betaln(a, b)[()]


def reg_inc_gamma_P(a: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Regularized lower incomplete gamma P(a, x)."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    _require(a > 0, "reg_inc_gamma_P requires a > 0")
    _require(x >= 0, "reg_inc_gamma_P requires x >= 0")
    return sp.gammainc(a, x)[()]


def reg_inc_gamma_Q(a: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    _require(a > 0, "reg_inc_gamma_Q requires a > 0")
    _require(x >= 0, "reg_inc_gamma_Q requires x >= 0")
    return sp.gammaincc(a, x)[()]


def inv_reg_inc_gamma_P(a: ArrayLike, q: ArrayLike) -> ArrayLike:
    """x with P(a, x) = q."""
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    _require(a > 0, "inv_reg_inc_gamma_P requires a > 0")
    _require((q >= 0) & (q <= 1), "inv_reg_inc_gamma_P requires q in [0, 1]")
    return sp.gammaincinv(a, q)[()]


def inv_reg_inc_gamma_Q(a: ArrayLike, q: ArrayLike) -> ArrayLike:
    """x with Q(a, x) = q; accurate in the upper tail."""
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    _require(a > 0, "inv_reg_inc_gamma_Q requires a > 0")
    _require((q >= 0) & (q <= 1), "inv_reg_inc_gamma_Q requires q in [0, 1]")
    return sp.gammainccinv(a, q)[()]


# ----------------------------------------------------------------------
# Sphere geometry
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SphereMeasure:
    """Surface and volume of the unit L_p-nested sphere, in logs."""
    log_surface: float
    log_volume: float


def _check_radius(R: float) -> None:
    if not R > 0:
        raise DomainError(f"radius must be positive, got {R}")


def log_surface_area(tree: LpTree, R: float = 1.0) -> float:
    """log S_f(R) in Gamma-ratio form."""
    _check_radius(R)
    n = tree.n
    total = (n - 1) * np.log(R) + n * np.log(2.0)
    for path in tree.inner_paths:
        p = tree.p(path)
        counts = np.array([tree.leaf_count(c) for c in tree.children(path)], dtype=float)
        total += (
            sp.gammaln(counts / p).sum()
            - (len(counts) - 1) * np.log(p)
            - sp.gammaln(counts.sum() / p)
        )
    return float(total)


def log_surface_area_beta(tree: LpTree, R: float = 1.0) -> float:
    """log S_f(R) as a product of Beta functions over cumulative leaf counts."""
    _check_radius(R)
    n = tree.n
    total = (n - 1) * np.log(R) + n * np.log(2.0)
    for path in tree.inner_paths:
        p = tree.p(path)
        counts = np.array([tree.leaf_count(c) for c in tree.children(path)], dtype=float)
        cumulative = np.cumsum(counts)
        total -= (len(counts) - 1) * np.log(p)
        total += sp.betaln(cumulative[:-1] / p, counts[1:] / p).sum()
    return float(total)


def log_volume(tree: LpTree, R: float = 1.0) -> float:
    """log V_f(R) = log S_f(R) + log R - log n."""
    return log_surface_area(tree, R) + float(np.log(R)) - float(np.log(tree.n))


def sphere_measure(tree: LpTree) -> SphereMeasure:
    log_s = log_surface_area(tree, 1.0)
    return SphereMeasure(log_surface=log_s, log_volume=log_s - float(np.log(tree.n)))


def grad_p_log_surface(tree: LpTree) -> np.ndarray:
    """Gradient of log S_f(1) in the exponents (pre-order of inner nodes).

    Differentiates the Beta-product form term by term.
    """
    grad = np.zeros(tree.n_inner)
    for j, path in enumerate(tree.inner_paths):
        p = tree.p(path)
        counts = np.array([tree.leaf_count(c) for c in tree.children(path)], dtype=float)
        cumulative = np.cumsum(counts)
        head = cumulative[:-1]
        nxt = counts[1:]
        tail = cumulative[1:]
        grad[j] = (
            np.sum(
                -sp.digamma(head / p) * head / p**2
                - sp.digamma(nxt / p) * nxt / p**2
                + sp.digamma(tail / p) * tail / p**2
            )
            - (len(counts) - 1) / p
        )
    return grad


def log_uniform_normalizer(tree: LpTree) -> float:
    """Constant term of the uniform density on the unit sphere: log 2 - log S_f(1)."""
    return float(np.log(2.0)) - log_surface_area(tree, 1.0)
