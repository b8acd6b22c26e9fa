"""Built-in numerical oracles.

Each check compares an analytic result against an independent numerical
estimate (finite differences, Monte Carlo, quadrature, KS tests) and returns
a CheckResult. ``run_checks`` bundles them into a CheckReport.
"""
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import integrate, stats

from .density import LpNestedModel, log_density, root_children_dirichlet_check
from .fitting import loglik_grad_W, loglik_grad_p
from .models import CheckReport, CheckResult
from .nrf import factorial_log_density, nrf_model_transform
from .polar import PolarPoint, from_polar, log_jacobian_det
from .radial import GammaP, LogNormal, LogNormalMixture
from .sampler import sample, sample_uniform_sphere
from .special import grad_p_log_surface, log_surface_area, log_surface_area_beta, log_volume
from .tree import Inner, Leaf, LpTree, Node, evaluate_batch, gradient_p, gradient_x

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# Random instances
# ----------------------------------------------------------------------

def random_tree(
    rng: np.random.Generator,
    n: int,
    p_range: Tuple[float, float] = (0.5, 3.0),
    max_children: int = 3,
) -> LpTree:
    """Random tree over n leaves with exponents drawn uniformly from p_range."""

    def build(lo: int, hi: int) -> Node:
        size = hi - lo
        if size == 1:
            return Leaf(lo)
        k = int(rng.integers(2, min(max_children, size) + 1))
        cuts = np.sort(rng.choice(np.arange(lo + 1, hi), size=k - 1, replace=False))
        bounds = [lo, *cuts.tolist(), hi]
        return Inner(
            p=float(rng.uniform(*p_range)),
            children=tuple(build(a, b) for a, b in zip(bounds[:-1], bounds[1:])),
        )

    return LpTree(build(0, n))


FD_STEP = float(np.finfo(float).eps ** (1.0 / 3.0))


def central_difference(
    fn: Callable[[np.ndarray], float],
    x: np.ndarray,
    h: Optional[float] = None,
) -> np.ndarray:
    """Gradient of a scalar function by central differences.

    Without ``h`` coordinate i uses the step FD_STEP * max(1, |x_i|).
    """
    x = np.asarray(x, dtype=float)
    steps = FD_STEP * np.maximum(1.0, np.abs(x)) if h is None else np.full(x.shape, float(h))
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = steps.flat[i]
        hi, lo = x + e, x - e
        grad.flat[i] = (fn(hi) - fn(lo)) / (hi.flat[i] - lo.flat[i])
    return grad


def numerical_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Jacobian of a vector function by central differences (rows = outputs)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.column_stack(cols)


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


# ----------------------------------------------------------------------
# Checks
# ----------------------------------------------------------------------

def check_tree_gradients(rng: np.random.Generator, trials: int = 20, tol: float = 1e-5) -> CheckResult:
    """gradient_x and gradient_p against central differences."""
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        tree = random_tree(rng, n)
        x = rng.uniform(0.1, 2.0, size=n) * rng.choice([-1, 1], size=n)
        worst = max(worst, _rel_err(gradient_x(tree, x), central_difference(lambda v: tree(v), x)))
        p = tree.exponents()
        fd = central_difference(lambda q: tree.with_exponents(q)(x), p)
        worst = max(worst, _rel_err(gradient_p(tree, x), fd))
    return CheckResult(name="tree_gradients", passed=worst <= tol, value=worst, threshold=tol)


def check_surface_forms(rng: np.random.Generator, trials: int = 20, tol: float = 1e-5) -> CheckResult:
    """Beta and Gamma surface forms agree; the exponent gradient matches differences."""
    worst = 0.0
    for _ in range(trials):
        tree = random_tree(rng, int(rng.integers(2, 7)))
        worst = max(worst, abs(log_surface_area(tree) - log_surface_area_beta(tree)))
        fd = central_difference(lambda q: log_surface_area(tree.with_exponents(q)), tree.exponents())
        worst = max(worst, _rel_err(grad_p_log_surface(tree), fd))
    return CheckResult(name="surface_forms", passed=worst <= tol, value=worst, threshold=tol)


def mc_log_volume(tree: LpTree, rng: np.random.Generator, count: int = 1_000_000, batch: int = 200_000) -> float:
    """Rejection estimate of log V_f(1) from uniform points in [-1, 1]^n."""
    hits = 0
    remaining = count
    while remaining > 0:
        size = min(batch, remaining)
        points = rng.uniform(-1.0, 1.0, size=(size, tree.n))
        hits += int(np.sum(evaluate_batch(tree, points)[()] <= 1.0))
        remaining -= size
    return float(np.log(hits / count) + tree.n * np.log(2.0))


def check_mc_volume(
    rng: np.random.Generator,
    trials: int = 5,
    count: int = 1_000_000,
    tol: float = 0.01,
) -> CheckResult:
    """Closed-form volume against rejection sampling, trees with n <= 4."""
    worst = 0.0
    for _ in range(trials):
        tree = random_tree(rng, int(rng.integers(2, 5)), p_range=(0.8, 3.0))
        ratio = np.exp(mc_log_volume(tree, rng, count) - log_volume(tree))
        worst = max(worst, abs(ratio - 1.0))
    return CheckResult(name="mc_volume", passed=worst <= tol, value=worst, threshold=tol)


def check_polar_jacobian(rng: np.random.Generator, trials: int = 20, tol: float = 1e-4) -> CheckResult:
    """Analytic log|det| of the polar map against a numerical Jacobian."""
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 5))
        tree = random_tree(rng, n, p_range=(0.8, 3.0))
        u_full = sample_uniform_sphere(tree, rng, 1)[0]
        r = float(rng.uniform(0.5, 2.0))
        point = PolarPoint(r=r, u=u_full[:-1], last_sign=1 if u_full[-1] >= 0 else -1)

        def to_x(theta, sign=point.last_sign):
            return from_polar(tree, PolarPoint(r=theta[0], u=theta[1:], last_sign=sign))

        J = numerical_jacobian(to_x, np.concatenate([[r], point.u]))
        numeric = np.linalg.slogdet(J)[1]
        worst = max(worst, abs(numeric - log_jacobian_det(tree, point)) / max(1.0, abs(numeric)))
    return CheckResult(name="polar_jacobian", passed=worst <= tol, value=worst, threshold=tol)


def check_loglik_gradient(rng: np.random.Generator, trials: int = 5, tol: float = 1e-5) -> CheckResult:
    """Exponent gradient of the log-likelihood against central differences."""
    worst = 0.0
    for _ in range(trials):
        tree = random_tree(rng, int(rng.integers(2, 5)), p_range=(0.8, 3.0))
        model = LpNestedModel(tree, LogNormal(0.0, 0.7))
        data = sample(model, rng, 200)
        _, grad = loglik_grad_p(model, data)
        fd = central_difference(
            lambda q: model.with_tree(tree.with_exponents(q)).log_likelihood(data), tree.exponents()
        )
        worst = max(worst, _rel_err(grad, fd))
    return CheckResult(name="loglik_gradient_p", passed=worst <= tol, value=worst, threshold=tol)


def check_loglik_gradient_W(rng: np.random.Generator, trials: int = 5, tol: float = 1e-5) -> CheckResult:
    """Gradient of the log-likelihood in W (log|det W| excluded) against central differences."""
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 5))
        tree = random_tree(rng, n, p_range=(1.2, 3.0))
        W = rng.normal(size=(n, n)) + 2.0 * np.eye(n)
        model = LpNestedModel(tree, LogNormal(0.0, 0.7), W=W)
        data = sample(model, rng, 200)
        _, grad = loglik_grad_W(model, data)

        def without_det(flat, n=n, m=data.shape[0]):
            V = flat.reshape(n, n)
            return model.with_W(V).log_likelihood(data) - m * np.linalg.slogdet(V)[1]

        fd = central_difference(without_det, W.ravel()).reshape(n, n)
        worst = max(worst, _rel_err(grad, fd))
    return CheckResult(name="loglik_gradient_W", passed=worst <= tol, value=worst, threshold=tol)


def _ks_radial(model: LpNestedModel, rng: np.random.Generator, count: int) -> float:
    x = sample(model, rng, count)
    radii = evaluate_batch(model.tree, model.demix(x))[()]
    return float(stats.kstest(radii, lambda r: model.radial.cdf(r)).pvalue)


def check_sampler_radial(rng: np.random.Generator, trials: int = 5, count: int = 20000) -> CheckResult:
    """Radii of sampled points follow the model's radial law (KS, Bonferroni at 1%)."""
    radials = [LogNormal(0.0, 0.5), GammaP(1.5, 2.0, 1.3), LogNormalMixture([0.3, 0.7], [-1.0, 0.5], [0.3, 0.4])]
    worst = 1.0
    for i in range(trials):
        tree = random_tree(rng, int(rng.integers(2, 6)))
        model = LpNestedModel(tree, radials[i % len(radials)])
        worst = min(worst, _ks_radial(model, rng, count))
    level = 0.01 / trials
    return CheckResult(name="sampler_radial_ks", passed=worst > level, value=worst, threshold=level)


def check_dirichlet(rng: np.random.Generator, trials: int = 3, count: int = 20000) -> CheckResult:
    """Root-children Dirichlet law on sampler output."""
    passed = True
    worst = 1.0
    for _ in range(trials):
        tree = random_tree(rng, int(rng.integers(3, 6)))
        model = LpNestedModel(tree, LogNormal(0.0, 1.0))
        report = root_children_dirichlet_check(model, sample(model, rng, count), level=0.01 / trials)
        passed = passed and report.passed
        worst = min(worst, min(report.pvalues))
    return CheckResult(name="root_children_dirichlet", passed=passed, value=worst)


def check_nrf_identity(rng: np.random.Generator, trials: int = 3, count: int = 500, tol: float = 1e-8) -> CheckResult:
    """log p(x) = factorial log-density of z + NRF log-Jacobian + log|det W|."""
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 5))
        tree = random_tree(rng, n, p_range=(0.8, 2.5))
        W = np.linalg.qr(rng.normal(size=(n, n)))[0] * rng.uniform(0.5, 2.0)
        model = LpNestedModel(tree, LogNormal(0.0, 0.5), W=W)
        x = sample(model, rng, count)
        z, logjac, logdet = nrf_model_transform(model, x)
        lhs = log_density(model, x)
        rhs = factorial_log_density(tree, z) + logjac + logdet
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs)))))
    return CheckResult(name="nrf_change_of_variables", passed=worst <= tol, value=worst, threshold=tol)


def grid_integral_2d(model: LpNestedModel, lim: float, resolution: int = 801) -> float:
    """Trapezoid integral of exp(log_density) over [-lim, lim]^2."""
    axis = np.linspace(-lim, lim, resolution)
    a, b = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([a.ravel(), b.ravel()])
    dens = np.zeros(points.shape[0])
    nonzero = np.any(points != 0, axis=1)
    dens[nonzero] = np.exp(log_density(model, points[nonzero]))
    dens = dens.reshape(resolution, resolution)
    return float(integrate.trapezoid(integrate.trapezoid(dens, axis, axis=1), axis))


def check_normalization_2d(rng: np.random.Generator, trials: int = 3, tol: float = 0.02) -> CheckResult:
    """exp(log_density) integrates to one for two-dimensional models."""
    worst = 0.0
    for _ in range(trials):
        tree = LpTree(Inner(p=float(rng.uniform(0.8, 3.0)), children=(Leaf(0), Leaf(1))))
        p = float(rng.uniform(1.0, 2.5))
        # shape * p >= 2 keeps the density bounded at the origin
        model = LpNestedModel(tree, GammaP(float(rng.uniform(2.0, 3.0)) / p, 1.0, p))
        lim = float(model.radial.quantile(1 - 1e-9))
        worst = max(worst, abs(grid_integral_2d(model, lim) - 1.0))
    return CheckResult(name="normalization_2d", passed=worst <= tol, value=worst, threshold=tol)


CHECKS: List[Tuple[str, Callable[..., CheckResult]]] = [
    ("tree_gradients", check_tree_gradients),
    ("surface_forms", check_surface_forms),
    ("polar_jacobian", check_polar_jacobian),
    ("loglik_gradient_p", check_loglik_gradient),
    ("loglik_gradient_W", check_loglik_gradient_W),
    ("mc_volume", check_mc_volume),
    ("sampler_radial_ks", check_sampler_radial),
    ("root_children_dirichlet", check_dirichlet),
    ("nrf_change_of_variables", check_nrf_identity),
    ("normalization_2d", check_normalization_2d),
]


def run_checks(seed: int = 0, only: Optional[List[str]] = None) -> CheckReport:
    """Run the oracle suite.

    Args:
        seed: Seed for all random instances
        only: Names of checks to run; all when omitted

    Returns:
        CheckReport with one result per check
    """
    report = CheckReport()
    children = np.random.SeedSequence(seed).spawn(len(CHECKS))
    for (name, check), child in zip(CHECKS, children):
        if only and name not in only:
            continue
        rng = np.random.default_rng(child)
        try:
            result = check(rng)
        except Exception as e:
            logger.error(f"Check {name} raised: {e}")
            result = CheckResult(name=name, passed=False, detail=f"error: {e}")
        logger.info(f"{name}: {'PASS' if result.passed else 'FAIL'} (value={result.value})")
        report.results.append(result)
    return report
