"""Radial distribution interface."""
from abc import ABC, abstractmethod
from typing import Union

import numpy as np

from ..exceptions import DomainError
from ..models import RadialSpec

ArrayLike = Union[float, np.ndarray]


class RadialModel(ABC):
    """Abstract base class for univariate densities on the positive reals.

    Implementations are immutable; fitting returns a new instance.
    """

    family: str = ""

    @abstractmethod
    def log_pdf(self, r: ArrayLike) -> ArrayLike:
        """
        Log-density at r.

        Args:
            r: Positive radii

        Returns:
            log rho(r), -inf outside the support
        """
        pass

    @abstractmethod
    def d_log_pdf(self, r: ArrayLike) -> ArrayLike:
        """Derivative of the log-density in r."""
        pass

    @abstractmethod
    def cdf(self, r: ArrayLike) -> ArrayLike:
        """P(R <= r)."""
        pass

    @abstractmethod
    def sf(self, r: ArrayLike) -> ArrayLike:
        """P(R > r), accurate in the upper tail."""
        pass

    @abstractmethod
    def quantile(self, q: ArrayLike) -> ArrayLike:
        """Inverse of the CDF."""
        pass

    @abstractmethod
    def isf(self, q: ArrayLike) -> ArrayLike:
        """Inverse of the survival function."""
        pass

    @abstractmethod
    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """
        Draw radii.

        Args:
            rng: Random generator owned by the caller
            count: Number of draws

        Returns:
            Array of positive radii
        """
        pass

    @abstractmethod
    def params(self) -> dict:
        """Parameter map for serialization."""
        pass

    @abstractmethod
    def refit(self, radii: np.ndarray) -> "RadialModel":
        """Maximum-likelihood refit of this family to radii, warm-started from self."""
        pass

    def pdf(self, r: ArrayLike) -> ArrayLike:
        return np.exp(self.log_pdf(r))

    def log_likelihood(self, radii: np.ndarray) -> float:
        return float(np.sum(self.log_pdf(radii)))

    def to_spec(self) -> RadialSpec:
        return RadialSpec(family=self.family, params=self.params())

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.params() == other.params()

    # ------------------------------------------------------------------
    # Argument checks shared by the families
    # ------------------------------------------------------------------

    @staticmethod
    def _positive(r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(~(r > 0)):
            raise DomainError("radial density requires r > 0")
        return r

    @staticmethod
    def _non_negative(r: ArrayLike) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(~(r >= 0)):
            raise DomainError("radial CDF requires r >= 0")
        return r

    @staticmethod
    def _probability(q: ArrayLike) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if np.any(~((q >= 0) & (q <= 1))):
            raise DomainError("probability must lie in [0, 1]")
        return q
