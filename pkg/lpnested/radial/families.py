"""Radial families: gamma_p, uniform-ball radial, log-normal and log-normal mixture."""
import logging
from typing import Optional, Sequence, Union

import numpy as np
from scipy import special as sp

from ..exceptions import DataError, DomainError
from ..models import RadialSpec
from .interface import ArrayLike, RadialModel

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


def log_gamma_variates(rng: np.random.Generator, shape: ArrayLike, size=None) -> np.ndarray:
    """log of Gamma(shape, 1) draws, stable for small shapes.

    Uses G(a) = G(a + 1) * U^(1/a) below shape 1 so tiny shapes do not
    underflow to zero.
    """
    shape = np.asarray(shape, dtype=float)
    boosted = np.where(shape < 1.0, shape + 1.0, shape)
    log_g = np.log(rng.gamma(boosted, 1.0, size=size))
    small = shape < 1.0
    if np.any(small):
        u = 1.0 - rng.random(size=log_g.shape)
        log_g = np.where(small, log_g + np.log(u) / np.where(small, shape, 1.0), log_g)
    return log_g


def white_scale(p: float) -> float:
    """Scale s with unit variance for the density proportional to exp(-|z|^p / s)."""
    return float(np.exp(0.5 * p * (sp.gammaln(1.0 / p) - sp.gammaln(3.0 / p))))


# ----------------------------------------------------------------------
# gamma_p
# ----------------------------------------------------------------------

class GammaP(RadialModel):
    """Law of G^(1/p) for G ~ Gamma(shape, scale).

    Args:
        shape: Gamma shape u > 0
        scale: Gamma scale s > 0
        p: Exponent p > 0
    """

    family = "gammap"

    def __init__(self, shape: float, scale: float, p: float):
        if not (shape > 0 and scale > 0 and p > 0):
            raise DomainError(f"GammaP needs positive parameters, got u={shape}, s={scale}, p={p}")
        self.shape = float(shape)
        self.scale = float(scale)
        self.p = float(p)

    def log_pdf(self, r: ArrayLike) -> ArrayLike:
        r = self._positive(r)
        u, s, p = self.shape, self.scale, self.p
        with np.errstate(over="ignore"):
            out = (
                np.log(p) + (u * p - 1.0) * np.log(r) - np.power(r, p) / s
                - sp.gammaln(u) - u * np.log(s)
            )
        return out[()]

    def d_log_pdf(self, r: ArrayLike) -> ArrayLike:
        r = self._positive(r)
        u, s, p = self.shape, self.scale, self.p
        return ((u * p - 1.0) / r - p * np.power(r, p - 1.0) / s)[()]

    def cdf(self, r: ArrayLike) -> ArrayLike:
        r = self._non_negative(r)
        return sp.gammainc(self.shape, np.power(r, self.p) / self.scale)[()]

    def sf(self, r: ArrayLike) -> ArrayLike:
        r = self._non_negative(r)
        return sp.gammaincc(self.shape, np.power(r, self.p) / self.scale)[()]

    def quantile(self, q: ArrayLike) -> ArrayLike:
        q = self._probability(q)
        return np.power(self.scale * sp.gammaincinv(self.shape, q), 1.0 / self.p)[()]

    def isf(self, q: ArrayLike) -> ArrayLike:
        q = self._probability(q)
        return np.power(self.scale * sp.gammainccinv(self.shape, q), 1.0 / self.p)[()]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        log_g = log_gamma_variates(rng, self.shape, size=count) + np.log(self.scale)
        return np.exp(log_g / self.p)

    def params(self) -> dict:
        return {"shape": self.shape, "scale": self.scale, "p": self.p}

    def refit(self, radii: np.ndarray) -> "GammaP":
        return GammaP.fit(radii, p=self.p)

    @classmethod
    def fit(cls, radii: np.ndarray, p: float = 1.0, max_iter: int = 100) -> "GammaP":
        """MLE of shape and scale with p fixed.

        With t = r^p the data are Gamma(u, s); s = mean(t) / u at the optimum
        and u solves log u - digamma(u) = log mean(t) - mean(log t).
        """
        radii = _check_radii(radii)
        t = np.power(radii, p)
        mean_t = float(np.mean(t))
        c = float(np.log(mean_t) - np.mean(np.log(t)))
        c = max(c, 1e-12)
        # Minka's starting point
        u = (3.0 - c + np.sqrt((c - 3.0) ** 2 + 24.0 * c)) / (12.0 * c)
        for _ in range(max_iter):
            f = np.log(u) - sp.digamma(u) - c
            df = 1.0 / u - sp.polygamma(1, u)
            step = f / df
            u_new = u - step
            if u_new <= 0:
                u_new = u / 2.0
            if abs(u_new - u) <= 1e-12 * u:
                u = u_new
                break
            u = u_new
        logger.debug(f"GammaP fit: shape={u:.6g}, scale={mean_t / u:.6g}, p={p}")
        return cls(shape=u, scale=mean_t / u, p=p)


# ----------------------------------------------------------------------
# Uniform-ball radial
# ----------------------------------------------------------------------

class UniformBallRadial(RadialModel):
    """Radial law of the uniform distribution on the unit ball: n r^(n-1) on (0, 1]."""

    family = "uniform_ball"

    def __init__(self, n: int):
        if int(n) != n or n < 1:
            raise DomainError(f"UniformBallRadial needs a positive integer n, got {n}")
        self.n = int(n)

    def log_pdf(self, r: ArrayLike) -> ArrayLike:
        r = self._positive(r)
        out = np.where(r <= 1.0, np.log(self.n) + (self.n - 1) * np.log(r), -np.inf)
        return out[()]

    def d_log_pdf(self, r: ArrayLike) -> ArrayLike:
        r = self._positive(r)
        return ((self.n - 1) / r)[()]

    def cdf(self, r: ArrayLike) -> ArrayLike:
        r = self._non_negative(r)
        return np.power(np.minimum(r, 1.0), self.n)[()]

    def sf(self, r: ArrayLike) -> ArrayLike:
        r = self._non_negative(r)
        with np.errstate(divide="ignore"):
            out = -np.expm1(self.n * np.log(np.minimum(r, 1.0)))
        return out[()]

    def quantile(self, q: ArrayLike) -> ArrayLike:
        q = self._probability(q)
        return np.power(q, 1.0 / self.n)[()]

    def isf(self, q: ArrayLike) -> ArrayLike:
        q = self._probability(q)
        return np.exp(np.log1p(-q) / self.n)[()]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.power(1.0 - rng.random(count), 1.0 / self.n)

    def params(self) -> dict:
        return {"n": self.n}

    def refit(self, radii: np.ndarray) -> "UniformBallRadial":
        return UniformBallRadial.fit(radii, n=self.n)

    @classmethod
    def fit(cls, radii: np.ndarray, n: Optional[int] = None) -> "UniformBallRadial":
        """No free parameters; checks the support."""
        radii = _check_radii(radii)
        if n is None:
            raise DataError("uniform_ball radial needs the dimension n")
        if np.any(radii > 1.0):
            raise DataError("uniform_ball radial cannot explain radii above 1")
        return cls(n)


# ----------------------------------------------------------------------
# Log-normal
# ----------------------------------------------------------------------

class LogNormal(RadialModel):
    """log r ~ Normal(mu, sigma^2)."""

    family = "lognormal"

    def __init__(self, mu: float, sigma: float):
        if not sigma > 0:
            raise DomainError(f"LogNormal needs sigma > 0, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def log_pdf(self, r: ArrayLike) -> ArrayLike:
        r = self._positive(r)
        z = (np.log(r) - self.mu) / self.sigma
        return (-np.log(r) - np.log(self.sigma) - 0.5 * LOG_2PI - 0.5 * z * z)[()]

    def d_log_pdf(self, r: ArrayLike) -> ArrayLike:
        r = self._positive(r)
        return (-(1.0 + (np.log(r) - self.mu) / self.sigma**2) / r)[()]

    def cdf(self, r: ArrayLike) -> ArrayLike:
        r = self._non_negative(r)
        with np.errstate(divide="ignore"):
            return sp.ndtr((np.log(r) - self.mu) / self.sigma)[()]

    def sf(self, r: ArrayLike) -> ArrayLike:
        r = self._non_negative(r)
        with np.errstate(divide="ignore"):
            return sp.ndtr((self.mu - np.log(r)) / self.sigma)[()]

    def quantile(self, q: ArrayLike) -> ArrayLike:
        q = self._probability(q)
        return np.exp(self.mu + self.sigma * sp.ndtri(q))[()]

    def isf(self, q: ArrayLike) -> ArrayLike:
        q = self._probability(q)
        return np.exp(self.mu - self.sigma * sp.ndtri(q))[()]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.exp(rng.normal(self.mu, self.sigma, size=count))

    def params(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma}

    def refit(self, radii: np.ndarray) -> "LogNormal":
        return LogNormal.fit(radii)

    @classmethod
    def fit(cls, radii: np.ndarray) -> "LogNormal":
        radii = _check_radii(radii)
        z = np.log(radii)
        sigma = float(np.std(z))
        if sigma < SIGMA_FLOOR:
            logger.warning(f"Degenerate radii; sigma floored at {SIGMA_FLOOR}")
            sigma = SIGMA_FLOOR
        return cls(mu=float(np.mean(z)), sigma=sigma)


# ----------------------------------------------------------------------
# Log-normal mixture
# ----------------------------------------------------------------------

class LogNormalMixture(RadialModel):
    """Weighted mixture of log-normals.

    Args:
        weights: Component weights (normalised on construction)
        mus: Means of log r per component
        sigmas: Standard deviations of log r per component
    """

    family = "lnmix"

    def __init__(self, weights: Sequence[float], mus: Sequence[float], sigmas: Sequence[float]):
        weights = np.asarray(weights, dtype=float)
        mus = np.asarray(mus, dtype=float)
        sigmas = np.asarray(sigmas, dtype=float)
        if not (weights.shape == mus.shape == sigmas.shape) or weights.ndim != 1 or weights.size == 0:
            raise DomainError("mixture weights, mus and sigmas must be equal-length vectors")
        if np.any(weights < 0) or weights.sum() <= 0:
            raise DomainError("mixture weights must be non-negative with positive sum")
        if np.any(~(sigmas > 0)):
            raise DomainError("mixture sigmas must be positive")
        self.weights = weights / weights.sum()
        self.mus = mus
        self.sigmas = sigmas

    @property
    def n_components(self) -> int:
        return self.weights.size

    def _component_z(self, r: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return (np.log(r)[..., None] - self.mus) / self.sigmas

    def _log_weighted(self, r: np.ndarray) -> np.ndarray:
        z = self._component_z(r)
        return (
            np.log(self.weights) - np.log(self.sigmas) - 0.5 * LOG_2PI - 0.5 * z * z
            - np.log(r)[..., None]
        )

    def log_pdf(self, r: ArrayLike) -> ArrayLike:
        r = self._positive(r)
        with np.errstate(divide="ignore"):
            return sp.logsumexp(self._log_weighted(r), axis=-1)[()]

    def d_log_pdf(self, r: ArrayLike) -> ArrayLike:
        r = self._positive(r)
        with np.errstate(divide="ignore"):
            lw = self._log_weighted(r)
            resp = np.exp(lw - sp.logsumexp(lw, axis=-1)[..., None])
        component = -(1.0 + (np.log(r)[..., None] - self.mus) / self.sigmas**2) / r[..., None]
        return np.sum(resp * component, axis=-1)[()]

    def cdf(self, r: ArrayLike) -> ArrayLike:
        r = self._non_negative(r)
        return np.sum(self.weights * sp.ndtr(self._component_z(r)), axis=-1)[()]

    def sf(self, r: ArrayLike) -> ArrayLike:
        r = self._non_negative(r)
        return np.sum(self.weights * sp.ndtr(-self._component_z(r)), axis=-1)[()]

    def _solve(self, q: np.ndarray, upper: bool) -> np.ndarray:
        """Invert the CDF (or SF when upper) in log r by bracketed Newton."""
        out = np.empty_like(q)
        zero, one = (q == 1.0, q == 0.0) if upper else (q == 0.0, q == 1.0)
        out[zero] = 0.0
        out[one] = np.inf
        inner = ~(zero | one)
        if not np.any(inner):
            return out
        qi = q[inner]
        sign = -1.0 if upper else 1.0
        zc = self.mus + sign * self.sigmas * sp.ndtri(qi)[:, None]
        lo = zc.min(axis=1)
        hi = zc.max(axis=1)
        z = 0.5 * (lo + hi)

        def residual(z):
            t = (z[:, None] - self.mus) / self.sigmas
            if upper:
                return qi - np.sum(self.weights * sp.ndtr(-t), axis=1)
            return np.sum(self.weights * sp.ndtr(t), axis=1) - qi

        for _ in range(200):
            t = (z[:, None] - self.mus) / self.sigmas
            F = residual(z)
            dF = np.sum(self.weights * np.exp(-0.5 * t * t) / (np.sqrt(2 * np.pi) * self.sigmas), axis=1)
            lo = np.where(F < 0, z, lo)
            hi = np.where(F > 0, z, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                z_new = z - F / dF
            outside = ~np.isfinite(z_new) | (z_new <= lo) | (z_new >= hi)
            z_new = np.where(outside, 0.5 * (lo + hi), z_new)
            done = np.abs(z_new - z) <= 1e-14 * (1.0 + np.abs(z))
            z = z_new
            if np.all(done | (hi - lo <= 1e-15 * (1.0 + np.abs(z)))):
                break
        out[inner] = np.exp(z)
        return out

    def quantile(self, q: ArrayLike) -> ArrayLike:
        q = self._probability(q)
        return self._solve(np.atleast_1d(q), upper=False).reshape(q.shape)[()]

    def isf(self, q: ArrayLike) -> ArrayLike:
        q = self._probability(q)
        return self._solve(np.atleast_1d(q), upper=True).reshape(q.shape)[()]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        k = rng.choice(self.n_components, size=count, p=self.weights)
        return np.exp(rng.normal(self.mus[k], self.sigmas[k]))

    def params(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "mus": self.mus.tolist(),
            "sigmas": self.sigmas.tolist(),
        }

    def refit(self, radii: np.ndarray) -> "LogNormalMixture":
        return LogNormalMixture.fit(radii, components=self.n_components, init=self)

    @classmethod
    def fit(
        cls,
        radii: np.ndarray,
        components: int = 4,
        init: Optional["LogNormalMixture"] = None,
        tol: float = 1e-9,
        max_iter: int = 500,
    ) -> "LogNormalMixture":
        """EM on log r.

        Initialised from quantile slices of the sorted data unless a warm
        start with the same component count is given.
        """
        radii = _check_radii(radii)
        z = np.log(radii)
        K = int(components)
        if K < 1:
            raise DataError(f"mixture needs at least one component, got {K}")
        if init is not None and init.n_components == K:
            weights, mus, sigmas = init.weights.copy(), init.mus.copy(), init.sigmas.copy()
        else:
            slices = np.array_split(np.sort(z), K)
            weights = np.array([len(s) for s in slices], dtype=float) / z.size
            mus = np.array([s.mean() if s.size else z.mean() for s in slices])
            sigmas = np.array([s.std() if s.size > 1 else z.std() for s in slices])
            sigmas = np.maximum(sigmas, SIGMA_FLOOR)

        def log_joint(weights, mus, sigmas):
            t = (z[:, None] - mus) / sigmas
            with np.errstate(divide="ignore"):
                return np.log(weights) - np.log(sigmas) - 0.5 * LOG_2PI - 0.5 * t * t

        lj = log_joint(weights, mus, sigmas)
        ll = float(sp.logsumexp(lj, axis=1).sum())
        for it in range(max_iter):
            norm = sp.logsumexp(lj, axis=1)
            resp = np.exp(lj - norm[:, None])
            nk = resp.sum(axis=0)
            alive = nk > 0
            safe_nk = np.where(alive, nk, 1.0)
            weights = nk / z.size
            mus = np.where(alive, (resp * z[:, None]).sum(axis=0) / safe_nk, mus)
            var = (resp * (z[:, None] - mus) ** 2).sum(axis=0) / safe_nk
            sigmas = np.where(alive, np.maximum(np.sqrt(var), SIGMA_FLOOR), sigmas)
            lj = log_joint(weights, mus, sigmas)
            ll_new = float(sp.logsumexp(lj, axis=1).sum())
            converged = abs(ll_new - ll) <= tol * abs(ll) if ll != 0 else abs(ll_new - ll) <= tol
            ll = ll_new
            if converged:
                logger.debug(f"Mixture EM converged after {it + 1} iterations (ll={ll:.6f})")
                break
        else:
            logger.debug(f"Mixture EM stopped at {max_iter} iterations (ll={ll:.6f})")
        keep = weights > 0
        return cls(weights=weights[keep], mus=mus[keep], sigmas=sigmas[keep])


# ----------------------------------------------------------------------
# Dispatch
# ----------------------------------------------------------------------

FAMILIES = {
    GammaP.family: GammaP,
    UniformBallRadial.family: UniformBallRadial,
    LogNormal.family: LogNormal,
    LogNormalMixture.family: LogNormalMixture,
}


def _check_radii(radii: np.ndarray) -> np.ndarray:
    radii = np.asarray(radii, dtype=float).ravel()
    if radii.size < 2:
        raise DataError(f"need at least 2 radii to fit, got {radii.size}")
    if np.any(~(radii > 0)) or np.any(~np.isfinite(radii)):
        raise DataError("radii must be positive and finite")
    return radii


def parse_radial_tag(tag: str) -> dict:
    """Split a CLI tag like ``lnmix:4`` or ``gammap:2.0`` into family and options."""
    family, _, arg = tag.partition(":")
    family = family.strip().lower()
    if family not in FAMILIES:
        raise DataError(f"unknown radial family {family!r}; expected one of {sorted(FAMILIES)}")
    options: dict = {"family": family}
    if not arg:
        return options
    if family == LogNormal.family:
        raise DataError(f"radial family {family!r} takes no argument")
    key, cast = {
        LogNormalMixture.family: ("components", int),
        GammaP.family: ("p", float),
        UniformBallRadial.family: ("n", int),
    }[family]
    try:
        options[key] = cast(arg)
    except ValueError as e:
        raise DataError(f"invalid argument in radial tag {tag!r}: {e}")
    return options


def fit_radial(family: Union[str, RadialModel], radii: np.ndarray, **options) -> RadialModel:
    """Fit a radial family to positive radii.

    Args:
        family: Family tag (gammap, uniform_ball, lognormal, lnmix) or a model to warm-start from
        radii: Positive radii
        **options: p for gammap, n for uniform_ball, components for lnmix

    Returns:
        Fitted model
    """
    if isinstance(family, RadialModel):
        return family.refit(radii)
    if family not in FAMILIES:
        raise DataError(f"unknown radial family {family!r}; expected one of {sorted(FAMILIES)}")
    return FAMILIES[family].fit(radii, **options)


def radial_from_spec(spec: Union[RadialSpec, dict]) -> RadialModel:
    """Rebuild a radial model from its tagged description."""
    if isinstance(spec, dict):
        spec = RadialSpec(**spec)
    cls = FAMILIES.get(spec.family)
    if cls is None:
        raise DataError(f"unknown radial family {spec.family!r}; expected one of {sorted(FAMILIES)}")
    try:
        return cls(**spec.params)
    except TypeError as e:
        raise DataError(f"bad parameters for radial family {spec.family!r}: {e}")
