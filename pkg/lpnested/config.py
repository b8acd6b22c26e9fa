"""Configuration for the L_p-nested toolkit."""
from pydantic import Field
from pydantic_settings import BaseSettings

from .models import FitConfig


class LpNestedConfig(BaseSettings):
    """Toolkit configuration (environment prefix ``LPN_``)."""

    # Runtime
    log_level: str = Field(
        default="INFO",
        description="Root log level"
    )
    verbose: bool = Field(
        default=False,
        description="Enable debug logging"
    )
    seed: int = Field(
        default=0,
        ge=0,
        lt=2**64,
        description="Default RNG seed (64-bit unsigned)"
    )
    threads: int = Field(
        default=1,
        ge=1,
        description="Worker threads for chunked sampling"
    )
    chunk_size: int = Field(
        default=50000,
        ge=1,
        description="Samples per chunk when sampling in parallel"
    )

    # Numerics
    p_min: float = Field(
        default=1e-3,
        gt=0,
        description="Lower clamp for tree exponents"
    )
    p_max: float = Field(
        default=1e3,
        gt=0,
        description="Upper clamp for tree exponents"
    )
    cdf_clip: float = Field(
        default=1e-15,
        gt=0,
        lt=0.5,
        description="CDF clipping used by radial remapping"
    )
    mixture_components: int = Field(
        default=4,
        ge=1,
        description="Default number of log-normal mixture components"
    )

    # Fitting
    fit_tolerance: float = Field(
        default=1e-7,
        gt=0,
        description="Relative log-likelihood change that stops block ascent"
    )
    fit_max_cycles: int = Field(
        default=20,
        ge=1,
        description="Maximum radial -> p -> Q cycles"
    )
    line_search_shrink: float = Field(
        default=0.5,
        gt=0,
        lt=1,
        description="Backtracking shrink factor"
    )
    armijo_c: float = Field(
        default=1e-4,
        gt=0,
        lt=1,
        description="Armijo sufficient-increase constant"
    )
    reorthonormalize_every: int = Field(
        default=50,
        ge=1,
        description="Re-orthonormalize Q every this many accepted steps"
    )
    n_starts: int = Field(
        default=1,
        ge=1,
        description="Random restarts of the orthogonal factor"
    )

    @classmethod
    def from_env(cls) -> "LpNestedConfig":
        """Load config from LPN_* environment variables and a .env file.

        Process environment variables take priority over the .env file.
        """
        return cls()

    def fit_config(self, **overrides) -> FitConfig:
        """Build a FitConfig seeded with these defaults."""
        values = {
            "tolerance": self.fit_tolerance,
            "max_cycles": self.fit_max_cycles,
            "p_lower": self.p_min,
            "p_upper": self.p_max,
            "shrink": self.line_search_shrink,
            "armijo_c": self.armijo_c,
            "reorthonormalize_every": self.reorthonormalize_every,
            "n_starts": self.n_starts,
            "seed": self.seed,
        }
        values.update(overrides)
        return FitConfig(**values)

    class Config:
        env_prefix = "LPN_"
        env_file = ".env"
        case_sensitive = False
        extra = "ignore"
