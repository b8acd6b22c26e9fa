"""L_p-nested symmetric densities.

The joint density of ``y = W (x - mean)`` is

    rho(f(y)) / (f(y)^(n-1) * S_f(1)) * |det W|

where rho is the radial density and S_f(1) the surface of the unit sphere.
"""
import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .exceptions import DataError, DimensionError, DomainError, NumericalError
from .models import DirichletReport, ModelSpec
from .polar import PolarPoint, path_log_G
from .radial import RadialModel, radial_from_spec
from .special import log_surface_area, log_uniform_normalizer
from .tree import Inner, Leaf, LpTree, Node, Path, evaluate_batch, parse_tree, serialize_tree

logger = logging.getLogger(__name__)


class LpNestedModel:
    """Tree, radial law and linear transform.

    Args:
        tree: The L_p-nested function
        radial: Radial density of f(W (x - mean))
        W: Optional (n, n) invertible matrix, identity when omitted
        mean: Optional location subtracted before W
    """

    def __init__(
        self,
        tree: LpTree,
        radial: RadialModel,
        W: Optional[np.ndarray] = None,
        mean: Optional[np.ndarray] = None,
    ):
        self.tree = tree
        self.radial = radial
        n = tree.n
        if W is not None:
            W = np.array(W, dtype=float)
            if W.shape != (n, n):
                raise DimensionError(f"W must be {n}x{n}, got {W.shape}")
            sign, logdet = np.linalg.slogdet(W)
            if sign == 0 or not np.isfinite(logdet):
                raise NumericalError("W is singular")
            self._log_det_W = float(logdet)
        else:
            self._log_det_W = 0.0
        self.W = W
        if mean is not None:
            mean = np.array(mean, dtype=float)
            if mean.shape != (n,):
                raise DimensionError(f"mean must have length {n}, got {mean.shape}")
        self.mean = mean
        self._log_surface = log_surface_area(tree, 1.0)

    @property
    def n(self) -> int:
        return self.tree.n

    @property
    def log_det_W(self) -> float:
        return self._log_det_W

    @property
    def log_surface(self) -> float:
        return self._log_surface

    def demix(self, x: np.ndarray) -> np.ndarray:
        """y = W (x - mean) for a vector or an (m, n) batch."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionError(f"expected vectors of length {self.n}, got shape {x.shape}")
        y = x if self.mean is None else x - self.mean
        return y if self.W is None else y @ self.W.T

    def mix(self, y: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`demix`."""
        y = np.asarray(y, dtype=float)
        x = y if self.W is None else np.linalg.solve(self.W, y.T).T
        return x if self.mean is None else x + self.mean

    def log_density(self, x: np.ndarray) -> Union[float, np.ndarray]:
        return log_density(self, x)

    def log_likelihood(self, data: np.ndarray) -> float:
        return float(np.sum(log_density(self, np.atleast_2d(data))))

    def with_tree(self, tree: LpTree) -> "LpNestedModel":
        return LpNestedModel(tree, self.radial, self.W, self.mean)

    def with_radial(self, radial: RadialModel) -> "LpNestedModel":
        return LpNestedModel(self.tree, radial, self.W, self.mean)

    def with_W(self, W: Optional[np.ndarray], mean: Optional[np.ndarray] = None) -> "LpNestedModel":
        return LpNestedModel(self.tree, self.radial, W, self.mean if mean is None else mean)

    def to_spec(self) -> ModelSpec:
        return ModelSpec(
            tree=serialize_tree(self.tree),
            radial=self.radial.to_spec(),
            W=None if self.W is None else self.W.tolist(),
            mean=None if self.mean is None else self.mean.tolist(),
        )

    @classmethod
    def from_spec(cls, spec: ModelSpec) -> "LpNestedModel":
        return cls(
            tree=parse_tree(spec.tree),
            radial=radial_from_spec(spec.radial),
            W=None if spec.W is None else np.array(spec.W),
            mean=None if spec.mean is None else np.array(spec.mean),
        )

    def __repr__(self) -> str:
        return f"LpNestedModel(tree={serialize_tree(self.tree)!r}, radial={self.radial!r})"


def log_density(model: LpNestedModel, x: np.ndarray) -> Union[float, np.ndarray]:
    """Joint log-density; -inf where f(W (x - mean)) = 0."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    y = np.atleast_2d(model.demix(x))
    f = evaluate_batch(model.tree, y)[()]
    out = np.full(f.shape, -np.inf)
    pos = f > 0
    if np.any(pos):
        fp = f[pos]
        out[pos] = (
            np.asarray(model.radial.log_pdf(fp))
            - (model.n - 1) * np.log(fp)
            - model.log_surface
            + model.log_det_W
        )
    return float(out[0]) if single else out


def uniform_sphere_log_density(tree: LpTree, point: PolarPoint) -> float:
    """Density of the uniform law on the unit sphere at direction coordinates u.

    The value is a density in (u_1, ..., u_{n-1}) with both signs of the
    last coordinate counted.
    """
    if abs(point.r - 1.0) > 1e-9:
        raise DomainError(f"uniform sphere density needs r = 1, got {point.r}")
    return float(uniform_sphere_log_density_batch(tree, np.asarray(point.u)[None, :])[0])


def uniform_sphere_log_density_batch(tree: LpTree, U: np.ndarray) -> np.ndarray:
    """Batched version over rows of direction coordinates."""
    return path_log_G(tree, U) + log_uniform_normalizer(tree)


# ----------------------------------------------------------------------
# Layer marginals
# ----------------------------------------------------------------------

def reduced_tree(tree: LpTree, collapsed_nodes: Sequence[Path]) -> Tuple[LpTree, List[Tuple[str, object]]]:
    """Replace each collapsed inner node by a leaf.

    Returns the reduced tree and, per reduced leaf in order, either
    ``("leaf", index)`` for a kept coordinate or ``("node", path)``.
    """
    collapsed = [tuple(p) for p in collapsed_nodes]
    for path in collapsed:
        if path == ():
            raise DomainError("the root cannot be collapsed")
        if not tree.is_inner(path):
            raise DomainError(f"collapsed node {path} is not an inner node")
    for a in collapsed:
        for b in collapsed:
            if a != b and b[:len(a)] == a:
                raise DomainError(f"collapsed nodes {a} and {b} overlap")
    if len(set(collapsed)) != len(collapsed):
        raise DomainError("collapsed nodes must be distinct")
    collapsed_set = set(collapsed)
    slots: List[Tuple[str, object]] = []

    def build(path: Path) -> Node:
        if path in collapsed_set:
            slots.append(("node", path))
            return Leaf(len(slots) - 1)
        if not tree.is_inner(path):
            slots.append(("leaf", tree.leaf_range(path)[0]))
            return Leaf(len(slots) - 1)
        return Inner(p=tree.p(path), children=tuple(build(c) for c in tree.children(path)))

    return LpTree(build(())), slots


def layer_marginal_log_density(
    model: LpNestedModel,
    x_kept: np.ndarray,
    v_collapsed: np.ndarray,
    collapsed_nodes: Sequence[Path],
) -> Union[float, np.ndarray]:
    """Joint density of the kept coordinates and the radii of collapsed subtrees.

    Works on demixed coordinates y. Each collapsed subtree J contributes
    v_J^(n_J - 1) * S_{f_J}(1), the surface of its own sphere of radius v_J.

    Args:
        model: The model whose y-law is marginalised
        x_kept: Coordinates outside every collapsed subtree, in index order
        v_collapsed: Values v_J > 0, one per collapsed node
        collapsed_nodes: Disjoint inner-node paths

    Returns:
        Log-density (float for a single point, array for batches)
    """
    tree = model.tree
    collapsed = [tuple(p) for p in collapsed_nodes]
    small, slots = reduced_tree(tree, collapsed)
    kept_idx = sorted(i for kind, i in slots if kind == "leaf")
    x_kept = np.asarray(x_kept, dtype=float)
    v_collapsed = np.asarray(v_collapsed, dtype=float)
    single = x_kept.ndim <= 1 and v_collapsed.ndim <= 1
    rows = max(np.atleast_2d(x_kept).shape[0], np.atleast_2d(v_collapsed).shape[0])
    X = np.atleast_2d(x_kept) if x_kept.size else np.zeros((rows, 0))
    V = np.atleast_2d(v_collapsed) if v_collapsed.size else np.zeros((rows, 0))
    if X.shape[1] != len(kept_idx):
        raise DimensionError(f"expected {len(kept_idx)} kept coordinates, got {X.shape[1]}")
    if V.shape[1] != len(collapsed):
        raise DimensionError(f"expected {len(collapsed)} collapsed values, got {V.shape[1]}")
    if X.shape[0] != V.shape[0]:
        raise DimensionError("kept coordinates and collapsed values disagree on the number of rows")
    if np.any(~(V > 0)):
        raise DomainError("collapsed node values must be positive")

    kept_pos = {idx: k for k, idx in enumerate(kept_idx)}
    node_pos = {path: k for k, path in enumerate(collapsed)}
    Z = np.empty((X.shape[0], small.n))
    for j, (kind, ref) in enumerate(slots):
        Z[:, j] = X[:, kept_pos[ref]] if kind == "leaf" else V[:, node_pos[ref]]

    f = evaluate_batch(small, Z)[()]
    n = tree.n
    out = np.full(f.shape, -np.inf)
    pos = f > 0
    if np.any(pos):
        out[pos] = (
            np.asarray(model.radial.log_pdf(f[pos]))
            - (n - 1) * np.log(f[pos])
            - model.log_surface
        )
    for path, k in node_pos.items():
        n_J = tree.leaf_count(path)
        out += (n_J - 1) * np.log(V[:, k]) + log_surface_area(tree.subtree(path), 1.0)
    return float(out[0]) if single else out


def marginal_histogram(
    samples: np.ndarray,
    dims: Sequence[int],
    bins: Union[int, Sequence[int]] = 50,
    ranges: Optional[Sequence[Tuple[float, float]]] = None,
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Monte Carlo density estimate of one or more coordinates.

    Single-coordinate marginals generally have no closed form; this
    estimator is the supported way to look at them.

    Returns:
        (density, edges) as returned by numpy.histogramdd with density=True
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    dims = list(dims)
    if any(d < 0 or d >= samples.shape[1] for d in dims):
        raise DimensionError(f"dims {dims} out of range for {samples.shape[1]} columns")
    density, edges = np.histogramdd(samples[:, dims], bins=bins, range=ranges, density=True)
    return density, list(edges)


# ----------------------------------------------------------------------
# Root-children Dirichlet law
# ----------------------------------------------------------------------

MIN_DIRICHLET_SAMPLES = 10000


def root_children_dirichlet_check(
    model: LpNestedModel,
    samples: np.ndarray,
    level: float = 0.01,
    p_root: Optional[float] = None,
) -> DirichletReport:
    """KS tests of (v_k / f)^p_root against Beta(n_k / p_root, (n - n_k) / p_root).

    Args:
        model: Model whose tree is checked
        samples: Data-space samples (at least 10^4 rows)
        level: Family-wise significance level (Bonferroni over children)
        p_root: Exponent used in the check; defaults to the tree's root exponent

    Returns:
        DirichletReport
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < MIN_DIRICHLET_SAMPLES:
        raise DataError(
            f"Dirichlet check needs at least {MIN_DIRICHLET_SAMPLES} samples, got {samples.shape[0]}"
        )
    tree = model.tree
    y = model.demix(samples)
    values = evaluate_batch(tree, y)
    f = values[()]
    keep = f > 0
    p = tree.p(()) if p_root is None else float(p_root)
    n = tree.n
    statistics, pvalues, alphas = [], [], []
    children = tree.children(())
    for child in children:
        n_k = tree.leaf_count(child)
        s = np.power(values[child][keep] / f[keep], p)
        a, b = n_k / p, (n - n_k) / p
        result = stats.kstest(s, stats.beta(a, b).cdf)
        statistics.append(float(result.statistic))
        pvalues.append(float(result.pvalue))
        alphas.append(a)
    corrected = level / len(children)
    passed = all(pv > corrected for pv in pvalues)
    logger.debug(f"Dirichlet check p-values {pvalues} (corrected level {corrected:.4g})")
    return DirichletReport(
        statistics=statistics,
        pvalues=pvalues,
        alphas=alphas,
        level=level,
        passed=passed,
    )
