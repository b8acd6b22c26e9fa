"""Maximum-likelihood fitting of L_p-nested models.

Blocks are visited in the configured order (radial -> p -> Q by default) and
cycled until the relative log-likelihood change drops below the tolerance.
The linear map is W = Q W0 with W0 a fixed whitening matrix and Q in SO(n).
"""
import logging
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import expm, polar
from scipy.stats import special_ortho_group

from .density import LpNestedModel
from .exceptions import DataError, DimensionError, NumericalError
from .models import Dataset, FitConfig, FitReport, FitTraceEntry
from .radial import fit_radial
from .special import grad_p_log_surface
from .tree import NodeVisitCounter, evaluate_batch, serialize_tree, simplify_tree, value_and_gradients

logger = logging.getLogger(__name__)

DataLike = Union[Dataset, np.ndarray]


def _values(data: DataLike) -> np.ndarray:
    X = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    return np.atleast_2d(X)


class BacktrackingLineSearch:
    """Armijo backtracking for maximisation.

    Args:
        contraction_factor: Step shrink factor in (0, 1)
        sufficient_increase: Armijo constant c
        max_iterations: Maximum number of shrinks
        initial_step_size: First trial step
        optimism: Growth factor applied to the last accepted step
    """

    def __init__(
        self,
        contraction_factor: float = 0.5,
        sufficient_increase: float = 1e-4,
        max_iterations: int = 40,
        initial_step_size: float = 1.0,
        optimism: float = 2.0,
    ):
        self.contraction_factor = contraction_factor
        self.sufficient_increase = sufficient_increase
        self.max_iterations = max_iterations
        self.initial_step_size = initial_step_size
        self.optimism = optimism
        self._last_step: Optional[float] = None

    @classmethod
    def from_config(cls, cfg: FitConfig) -> "BacktrackingLineSearch":
        return cls(
            contraction_factor=cfg.shrink,
            sufficient_increase=cfg.armijo_c,
            max_iterations=cfg.max_backtracks,
            initial_step_size=cfg.initial_step,
        )

    def search(
        self,
        objective: Callable[[float], Tuple[float, object]],
        f0: float,
        slope: Callable[[float, object], float],
    ) -> Tuple[float, float, object]:
        """Find a step satisfying f(t) >= f0 + c * slope(t).

        Args:
            objective: Maps a step to (value, candidate)
            f0: Value at step 0
            slope: Predicted first-order increase for a step and candidate

        Returns:
            (step, value, candidate); step 0 and candidate None when no step is accepted
        """
        t = self.initial_step_size if self._last_step is None else self._last_step * self.optimism
        for _ in range(self.max_iterations):
            value, candidate = objective(t)
            if np.isfinite(value) and value >= f0 + self.sufficient_increase * slope(t, candidate):
                self._last_step = t
                return t, value, candidate
            t *= self.contraction_factor
        self._last_step = None
        return 0.0, f0, None


# ----------------------------------------------------------------------
# Whitening
# ----------------------------------------------------------------------

def whiten(data: DataLike) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetric whitening matrix W0 = Cov^(-1/2) and the centred data.

    Returns:
        (W0, centred data); ``centred @ W0.T`` has identity sample covariance
    """
    X = _values(data)
    m, n = X.shape
    if m <= n:
        raise DataError(f"whitening needs more samples than dimensions, got m={m}, n={n}")
    centred = X - X.mean(axis=0)
    cov = np.cov(centred, rowvar=False)
    lam, V = np.linalg.eigh(cov)
    if lam[0] <= 1e-12 * lam[-1]:
        raise DataError("covariance is rank deficient; cannot whiten")
    W0 = (V / np.sqrt(lam)) @ V.T
    return W0, centred


# ----------------------------------------------------------------------
# Likelihood and gradients
# ----------------------------------------------------------------------

def log_likelihood(model: LpNestedModel, data: DataLike) -> float:
    """Total log-likelihood including log|det W|."""
    return model.log_likelihood(_values(data))


def _radial_terms(model: LpNestedModel, f: np.ndarray) -> np.ndarray:
    if np.any(~(f > 0)):
        raise NumericalError("sample with f(W x) = 0")
    return np.asarray(model.radial.d_log_pdf(f)) - (model.n - 1) / f


def loglik_grad_p(
    model: LpNestedModel,
    data: DataLike,
    counter: Optional[NodeVisitCounter] = None,
) -> Tuple[float, np.ndarray]:
    """Log-likelihood and its gradient in the exponents (pre-order).

    The radial density is held fixed.
    """
    X = _values(data)
    y = model.demix(X)
    f, _, gp = value_and_gradients(model.tree, y, counter)
    coef = _radial_terms(model, f)
    grad = coef @ gp - X.shape[0] * grad_p_log_surface(model.tree)
    return log_likelihood(model, X), grad


def loglik_grad_W(model: LpNestedModel, data: DataLike) -> Tuple[float, np.ndarray]:
    """Log-likelihood and the gradient of sum log rho(f(W x)) - (n-1) log f(W x) in W.

    The log|det W| term is part of the returned log-likelihood but not of
    the gradient; on SO(n) it is constant.
    """
    X = _values(data)
    centred = X if model.mean is None else X - model.mean
    y = model.demix(X)
    f, gx, _ = value_and_gradients(model.tree, y)
    coef = _radial_terms(model, f)
    grad = (coef[:, None] * gx).T @ centred
    return log_likelihood(model, X), grad


# ----------------------------------------------------------------------
# Exponents
# ----------------------------------------------------------------------

def fit_p(model: LpNestedModel, data: DataLike, cfg: Optional[FitConfig] = None) -> LpNestedModel:
    """Projected gradient ascent on the exponents with Armijo backtracking."""
    cfg = cfg or FitConfig()
    X = _values(data)
    m = X.shape[0]
    searcher = BacktrackingLineSearch.from_config(cfg)
    current = model
    ll, grad = loglik_grad_p(current, X)
    for it in range(cfg.max_iters_p):
        if np.max(np.abs(grad)) <= cfg.tolerance * m:
            break
        p0 = current.tree.exponents()
        direction = grad / m

        def objective(t, p0=p0, direction=direction):
            p_new = np.clip(p0 + t * direction, cfg.p_lower, cfg.p_upper)
            candidate = current.with_tree(current.tree.with_exponents(p_new))
            with np.errstate(all="ignore"):
                return log_likelihood(candidate, X), candidate

        def slope(t, candidate, p0=p0, grad=grad):
            return max(float(grad @ (candidate.tree.exponents() - p0)), 0.0)

        t, ll_new, candidate = searcher.search(objective, ll, slope)
        if candidate is None:
            logger.debug(f"p-step {it}: no acceptable step")
            break
        improvement = ll_new - ll
        current = candidate
        ll, grad = loglik_grad_p(current, X)
        logger.debug(f"p-step {it}: t={t:.3g} ll={ll:.6f} p={current.tree.exponents().round(4).tolist()}")
        if improvement <= cfg.tolerance * max(abs(ll), 1.0):
            break
    return current


# ----------------------------------------------------------------------
# Orthogonal factor
# ----------------------------------------------------------------------

def fit_Q(
    model: LpNestedModel,
    data: DataLike,
    cfg: Optional[FitConfig] = None,
    W0: Optional[np.ndarray] = None,
) -> LpNestedModel:
    """Geodesic line search on SO(n) for Q in W = Q W0.

    Args:
        model: Current model; its W is Q W0 (identity if unset)
        data: Samples
        cfg: Fit settings
        W0: Fixed whitening matrix; identity when omitted

    Returns:
        Model with the updated W
    """
    cfg = cfg or FitConfig()
    X = _values(data)
    m, n = X.shape
    if n != model.n:
        raise DimensionError(f"data has {n} columns, model expects {model.n}")
    W0 = np.eye(n) if W0 is None else np.asarray(W0, dtype=float)
    W = np.eye(n) if model.W is None else model.W
    Q = W @ np.linalg.inv(W0)
    searcher = BacktrackingLineSearch.from_config(cfg)
    current = model.with_W(Q @ W0)
    ll, G = loglik_grad_W(current, X)
    accepted = 0
    for it in range(cfg.max_iters_q):
        GQ = G @ W0.T
        A = (GQ @ Q.T - Q @ GQ.T) / (2.0 * m)
        norm2 = float(np.sum(A * A))
        if np.sqrt(norm2) <= cfg.tolerance:
            break

        def objective(t, Q=Q, A=A):
            Q_new = expm(t * A) @ Q
            candidate = current.with_W(Q_new @ W0)
            return log_likelihood(candidate, X), (Q_new, candidate)

        def slope(t, _candidate, norm2=norm2):
            return t * m * norm2

        t, ll_new, result = searcher.search(objective, ll, slope)
        if result is None:
            logger.debug(f"Q-step {it}: no acceptable step")
            break
        improvement = ll_new - ll
        Q, current = result
        accepted += 1
        if accepted % cfg.reorthonormalize_every == 0:
            Q = polar(Q)[0]
            current = current.with_W(Q @ W0)
        ll, G = loglik_grad_W(current, X)
        logger.debug(f"Q-step {it}: t={t:.3g} ll={ll:.6f}")
        if improvement <= cfg.tolerance * max(abs(ll), 1.0):
            break
    return current


# ----------------------------------------------------------------------
# Full fit
# ----------------------------------------------------------------------

def _fit_radial_block(model: LpNestedModel, X: np.ndarray, ll: float) -> Tuple[LpNestedModel, float]:
    radii = evaluate_batch(model.tree, model.demix(X))[()]
    try:
        candidate = model.with_radial(fit_radial(model.radial, radii))
    except (DataError, NumericalError) as e:
        logger.warning(f"Radial refit failed, keeping previous radial: {e}")
        return model, ll
    ll_new = log_likelihood(candidate, X)
    if np.isfinite(ll_new) and ll_new >= ll:
        return candidate, ll_new
    return model, ll


def _fit_once(
    template: LpNestedModel,
    X: np.ndarray,
    cfg: FitConfig,
    W0: np.ndarray,
    mean: Optional[np.ndarray],
    Q: np.ndarray,
    start: int,
) -> Tuple[LpNestedModel, List[FitTraceEntry], int, bool]:
    m, n = X.shape
    model = template.with_W(Q @ W0, mean)
    ll = log_likelihood(model, X)
    trace: List[FitTraceEntry] = []
    converged = False
    cycle = 0
    for cycle in range(1, cfg.max_cycles + 1):
        ll_start = ll
        for block in cfg.blocks:
            if block == "radial":
                model, ll = _fit_radial_block(model, X, ll)
            elif block == "p":
                model = fit_p(model, X, cfg)
                ll = log_likelihood(model, X)
            elif block == "Q":
                model = fit_Q(model, X, cfg, W0)
                ll = log_likelihood(model, X)
            trace.append(FitTraceEntry(
                start=start,
                cycle=cycle,
                block=block,
                loglik=ll,
                mean_loglik_per_dim=ll / (m * n),
            ))
            logger.info(f"start {start} cycle {cycle} block {block}: ll={ll:.6f}")
        if abs(ll - ll_start) <= cfg.tolerance * max(abs(ll_start), 1.0):
            converged = True
            break
    return model, trace, cycle, converged


def fit(
    template: LpNestedModel,
    data: DataLike,
    cfg: Optional[FitConfig] = None,
) -> Tuple[LpNestedModel, FitReport]:
    """Block-coordinate maximum-likelihood fit with a fixed tree layout.

    Args:
        template: Initial model; its tree layout is kept, exponents and radial are refit
        data: Samples
        cfg: Fit settings

    Returns:
        (fitted model, report with the per-block log-likelihood trace)
    """
    cfg = cfg or FitConfig()
    X = _values(data)
    m, n = X.shape
    if n != template.n:
        raise DimensionError(f"data has {n} columns, tree has {template.n} leaves")
    if cfg.whiten:
        W0, _ = whiten(X)
        mean = X.mean(axis=0)
    else:
        W0 = np.eye(n) if template.W is None else template.W
        mean = template.mean
    rng = np.random.default_rng(cfg.seed)

    best = None
    trace: List[FitTraceEntry] = []
    for start in range(cfg.n_starts):
        Q = np.eye(n) if start == 0 else special_ortho_group.rvs(n, random_state=rng)
        model, start_trace, cycles, converged = _fit_once(template, X, cfg, W0, mean, Q, start)
        trace.extend(start_trace)
        ll = log_likelihood(model, X)
        if best is None or ll > best[1]:
            best = (model, ll, cycles, converged)
    model, ll, cycles, converged = best

    if cfg.prune_tol is not None:
        pruned = simplify_tree(model.tree, cfg.prune_tol)
        if pruned != model.tree:
            model = model.with_tree(pruned)
            ll = log_likelihood(model, X)
            logger.info(f"Pruned tree to {serialize_tree(pruned)} (ll={ll:.6f})")

    report = FitReport(
        trace=trace,
        loglik=ll,
        n_samples=m,
        n_dims=n,
        cycles=cycles,
        converged=converged,
        exponents=model.tree.exponents().tolist(),
        tree=serialize_tree(model.tree),
    )
    return model, report
