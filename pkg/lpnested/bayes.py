"""Location inference under an improper Jeffreys prior on the scale.

With p(x | mu, tau) an L_p-nested density of tau (x - mu) and the prior
1/tau on tau, integrating tau out gives

    p(x, mu) = f(x - mu)^(-n) * p(mu) / S_f(1)

which does not depend on the radial law.
"""
import logging
from typing import Callable, Optional

import numpy as np
from scipy import integrate, stats
from scipy.special import logsumexp

from .density import LpNestedModel
from .exceptions import DimensionError, NumericalError
from .models import GridSpec, PriorSpec
from .special import log_surface_area
from .tree import LpTree, evaluate_batch

logger = logging.getLogger(__name__)

LogPrior = Callable[[np.ndarray], np.ndarray]

GRID_CHUNK = 2048


def flat_prior() -> LogPrior:
    """Improper flat prior (log-density 0)."""
    def log_prior(mu: np.ndarray) -> np.ndarray:
        mu = np.atleast_2d(mu)
        return np.zeros(mu.shape[0])
    return log_prior


def gaussian_prior(mean: np.ndarray, std: float = 1.0) -> LogPrior:
    """Isotropic Gaussian prior on the location."""
    mean = np.asarray(mean, dtype=float)

    def log_prior(mu: np.ndarray) -> np.ndarray:
        mu = np.atleast_2d(mu)
        return stats.norm.logpdf(mu, loc=mean, scale=std).sum(axis=1)
    return log_prior


def prior_from_spec(spec: Optional[PriorSpec], n: int) -> LogPrior:
    if spec is None or spec.kind == "flat":
        return flat_prior()
    mean = np.zeros(n) if spec.mean is None else np.asarray(spec.mean, dtype=float)
    if mean.shape != (n,):
        raise DimensionError(f"prior mean must have length {n}, got {mean.shape}")
    return gaussian_prior(mean, spec.std)


def make_grid(spec: GridSpec, n: int) -> np.ndarray:
    """Grid points as a (G, n) array."""
    if spec.points is not None:
        grid = np.asarray(spec.points, dtype=float)
    else:
        axes = [np.linspace(lo, hi, int(num)) for lo, hi, num in spec.axes]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.column_stack([m.ravel() for m in mesh])
    if grid.ndim != 2 or grid.shape[1] != n:
        raise DimensionError(f"grid points must have {n} coordinates, got shape {grid.shape}")
    return grid


def _scalar_prior(log_prior_mu: LogPrior, mu: np.ndarray) -> float:
    return float(np.asarray(log_prior_mu(mu[None, :])).ravel()[0])


def location_log_joint(
    tree: LpTree,
    x: np.ndarray,
    mu: np.ndarray,
    log_prior_mu: LogPrior,
) -> float:
    """-n log f(x - mu) + log p(mu) - log S_f(1) for one observation."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if x.shape != (tree.n,) or mu.shape != (tree.n,):
        raise DimensionError(f"x and mu must have length {tree.n}")
    f = float(tree(x - mu))
    if f == 0:
        raise NumericalError("location equals the observation; the joint is singular there")
    return -tree.n * np.log(f) + _scalar_prior(log_prior_mu, mu) - log_surface_area(tree, 1.0)


def location_log_joint_quadrature(
    model: LpNestedModel,
    x: np.ndarray,
    mu: np.ndarray,
    log_prior_mu: LogPrior,
) -> float:
    """Same quantity by integrating the scale out numerically for a concrete radial.

    Integrates p(x | mu, tau) / tau over tau > 0, where the data density at
    scale tau is tau * rho(tau f) / (f^(n-1) S_f(1)).
    """
    tree = model.tree
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    f = float(tree(x - mu))
    if f == 0:
        raise NumericalError("location equals the observation; the joint is singular there")
    n = tree.n

    def integrand(tau: float) -> float:
        return float(model.radial.pdf(tau * f)) if tau > 0 else 0.0

    # split at the radial median so quad sees the bulk
    knot = float(model.radial.quantile(0.5)) / f
    parts = [
        integrate.quad(integrand, 0.0, knot, limit=200)[0],
        integrate.quad(integrand, knot, np.inf, limit=200)[0],
    ]
    integral = sum(parts)
    if not integral > 0:
        raise NumericalError("scale integral vanished")
    return (
        float(np.log(integral)) - (n - 1) * np.log(f) - log_surface_area(tree, 1.0)
        + _scalar_prior(log_prior_mu, mu)
    )


def location_log_likelihood_grid(tree: LpTree, data: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """sum_j -n log f(x_j - mu) for every grid point mu (unnormalised)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    n = tree.n
    if data.shape[1] != n or grid.shape[1] != n:
        raise DimensionError(f"data and grid must have {n} columns")
    out = np.empty(grid.shape[0])
    step = max(1, GRID_CHUNK // max(1, data.shape[0]))
    for lo in range(0, grid.shape[0], step):
        block = grid[lo:lo + step]
        diffs = (data[None, :, :] - block[:, None, :]).reshape(-1, n)
        f = evaluate_batch(tree, diffs)[()].reshape(block.shape[0], data.shape[0])
        if np.any(f == 0):
            raise NumericalError("a grid point coincides with an observation")
        out[lo:lo + step] = -n * np.log(f).sum(axis=1)
    return out


def location_posterior_grid(
    tree: LpTree,
    data: np.ndarray,
    grid: np.ndarray,
    log_prior_mu: Optional[LogPrior] = None,
) -> np.ndarray:
    """Log-posterior of the location over grid points, normalised by log-sum-exp."""
    log_prior_mu = log_prior_mu or flat_prior()
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if not np.all(np.isfinite(grid)):
        raise NumericalError("grid contains non-finite points")
    log_post = location_log_likelihood_grid(tree, data, grid) + np.asarray(log_prior_mu(grid))
    return log_post - logsumexp(log_post)


def grid_entropy(log_posterior: np.ndarray) -> float:
    """Entropy of a normalised grid posterior in nats."""
    p = np.exp(log_posterior)
    return float(-np.sum(p * log_posterior, where=p > 0))
