"""Nested radial factorization.

Starting at the root, each inner node's sub-vector is rescaled so that its
radius moves from the node's current radial law to a gamma_p law with shape
n_I / p_I and unit-variance scale. The rescaled node then has independent
children whose radii follow gamma_p laws with the parent's exponent; these
are the sources for the recursion one level down. The output coordinates are
independent p-generalized Normal variables, with p the exponent of each
leaf's parent.
"""
import logging
from typing import Dict, Tuple, Union

import numpy as np
from scipy.special import gammaln

from .density import LpNestedModel
from .exceptions import DimensionError
from .radial import GammaP, RadialModel, white_scale
from .tree import LpTree, Path, evaluate_batch

logger = logging.getLogger(__name__)

CDF_CLIP = 1e-15


def radial_remap(
    r: Union[float, np.ndarray],
    source: RadialModel,
    target: RadialModel,
    clip: float = CDF_CLIP,
) -> Union[float, np.ndarray]:
    """target.quantile(source.cdf(r)), switching to survival functions in the upper half."""
    r = np.asarray(r, dtype=float)
    c = np.asarray(source.cdf(r), dtype=float)
    s = np.asarray(source.sf(r), dtype=float)
    upper = c > 0.5
    lo = target.quantile(np.clip(np.where(upper, 0.5, c), clip, 1.0 - clip))
    hi = target.isf(np.clip(np.where(upper, s, 0.5), clip, 1.0 - clip))
    return np.where(upper, hi, lo)[()]


def pgn_log_pdf(z: Union[float, np.ndarray], p: Union[float, np.ndarray], s: Union[float, np.ndarray]):
    """Log-density of the p-generalized Normal, proportional to exp(-|z|^p / s)."""
    z = np.asarray(z, dtype=float)
    return (
        np.log(p) - np.log(2.0) - np.log(s) / p - gammaln(1.0 / p) - np.power(np.abs(z), p) / s
    )[()]


def node_target(tree: LpTree, path: Path) -> GammaP:
    """Unit-variance gamma_p target for an inner node."""
    p = tree.p(path)
    return GammaP(shape=tree.leaf_count(path) / p, scale=white_scale(p), p=p)


def child_source(tree: LpTree, path: Path) -> GammaP:
    """Radial law of an inner child once its parent has been remapped."""
    p_parent = tree.p(path[:-1])
    return GammaP(shape=tree.leaf_count(path) / p_parent, scale=white_scale(p_parent), p=p_parent)


def nrf_transform_with_log_jacobian(
    y: np.ndarray,
    tree: LpTree,
    source: RadialModel,
    clip: float = CDF_CLIP,
) -> Tuple[np.ndarray, Union[float, np.ndarray]]:
    """Transform demixed data and return log|det| of the transform in one pass.

    Args:
        y: Demixed vector or (m, n) batch
        tree: The L_p-nested function
        source: Radial law of f(y)

    Returns:
        (z, log-Jacobian) with the input's batch shape
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    t = np.atleast_2d(y).copy()
    if t.shape[1] != tree.n:
        raise DimensionError(f"expected vectors of length {tree.n}, got shape {y.shape}")
    logjac = np.zeros(t.shape[0])
    subtrees: Dict[Path, LpTree] = {}
    for path in tree.inner_paths:
        start, stop = tree.leaf_range(path)
        sub = tree if path == () else subtrees.setdefault(path, tree.subtree(path))
        src = source if path == () else child_source(tree, path)
        tgt = node_target(tree, path)
        r = evaluate_batch(sub, t[:, start:stop])[()]
        pos = r > 0
        if not np.any(pos):
            continue
        rp = r[pos]
        g = np.asarray(radial_remap(rp, src, tgt, clip), dtype=float)
        t[pos, start:stop] *= (g / rp)[:, None]
        logjac[pos] += (
            (stop - start - 1) * (np.log(g) - np.log(rp))
            + np.asarray(src.log_pdf(rp))
            - np.asarray(tgt.log_pdf(g))
        )
    if single:
        return t[0], float(logjac[0])
    return t, logjac


def nrf_transform(y: np.ndarray, tree: LpTree, source: RadialModel) -> np.ndarray:
    """Nested radial factorization of demixed data."""
    return nrf_transform_with_log_jacobian(y, tree, source)[0]


def nrf_log_jacobian(y: np.ndarray, tree: LpTree, source: RadialModel) -> Union[float, np.ndarray]:
    """log|det| of the Jacobian of :func:`nrf_transform`; W is not included."""
    return nrf_transform_with_log_jacobian(y, tree, source)[1]


def nrf_model_transform(
    model: LpNestedModel,
    x: np.ndarray,
    clip: float = CDF_CLIP,
) -> Tuple[np.ndarray, Union[float, np.ndarray], float]:
    """Demix then factorize.

    Returns:
        (z, nrf log-Jacobian, log|det W|)
    """
    z, logjac = nrf_transform_with_log_jacobian(model.demix(x), model.tree, model.radial, clip)
    return z, logjac, model.log_det_W


def factorial_log_density(tree: LpTree, z: np.ndarray) -> Union[float, np.ndarray]:
    """Log-density of the factorized output: sum of p-generalized Normal terms."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != tree.n:
        raise DimensionError(f"expected vectors of length {tree.n}, got shape {z.shape}")
    p = tree.leaf_parent_exponents()
    s = np.array([white_scale(v) for v in p])
    return np.sum(pgn_log_pdf(z, p, s), axis=-1)[()]
