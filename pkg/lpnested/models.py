"""Pydantic models for configuration files, persisted models and reports."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


# =============================================================================
# Fitting configuration
# =============================================================================

class FitConfig(BaseModel):
    """Block-coordinate ascent settings."""

    max_iters_p: int = Field(
        default=100,
        ge=0,
        description="Maximum projected-gradient steps on the exponents per cycle"
    )
    max_iters_q: int = Field(
        default=100,
        ge=0,
        description="Maximum geodesic line-search steps on SO(n) per cycle"
    )
    max_cycles: int = Field(
        default=20,
        ge=1,
        description="Maximum radial -> p -> Q cycles"
    )
    tolerance: float = Field(
        default=1e-7,
        gt=0,
        description="Relative log-likelihood change that ends a block or the fit"
    )
    p_lower: float = Field(
        default=1e-3,
        gt=0,
        description="Lower bound for exponents"
    )
    p_upper: float = Field(
        default=1e3,
        gt=0,
        description="Upper bound for exponents"
    )
    shrink: float = Field(
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
    initial_step: float = Field(
        default=1.0,
        gt=0,
        description="First trial step of every line search"
    )
    max_backtracks: int = Field(
        default=40,
        ge=1,
        description="Maximum step halvings per line search"
    )
    blocks: List[Literal["radial", "p", "Q"]] = Field(
        default_factory=lambda: ["radial", "p", "Q"],
        description="Blocks visited per cycle, in order"
    )
    reorthonormalize_every: int = Field(
        default=50,
        ge=1,
        description="Project Q back onto SO(n) every this many accepted steps"
    )
    n_starts: int = Field(
        default=1,
        ge=1,
        description="Random restarts of the orthogonal factor"
    )
    whiten: bool = Field(
        default=True,
        description="Whiten the data before fitting Q"
    )
    prune_tol: Optional[float] = Field(
        default=None,
        ge=0,
        description="Merge nested nodes with exponent within this tolerance after fitting"
    )
    seed: int = Field(
        default=0,
        ge=0,
        description="Seed for random restarts"
    )

    @model_validator(mode="after")
    def check_bounds(self) -> "FitConfig":
        if self.p_lower >= self.p_upper:
            raise ValueError(f"p_lower ({self.p_lower}) must be below p_upper ({self.p_upper})")
        if not self.blocks:
            raise ValueError("blocks must name at least one block")
        return self


# =============================================================================
# Persisted models
# =============================================================================

class RadialSpec(BaseModel):
    """Tagged radial family with its parameters."""
    family: str = Field(..., description="gammap, uniform_ball, lognormal or lnmix")
    params: Dict[str, Any] = Field(default_factory=dict, description="Family parameters")


class ModelSpec(BaseModel):
    """Serialized L_p-nested model."""
    schema_version: Literal[1] = Field(default=1, alias="schema")
    tree: str = Field(..., description="Tree DSL string")
    radial: RadialSpec
    W: Optional[List[List[float]]] = Field(
        default=None,
        description="Row-major linear transform, identity when absent"
    )
    mean: Optional[List[float]] = Field(
        default=None,
        description="Data mean subtracted before W"
    )

    model_config = {"populate_by_name": True}

    @field_validator("W")
    @classmethod
    def check_square(cls, v):
        if v is not None:
            n = len(v)
            if any(len(row) != n for row in v):
                raise ValueError("W must be square")
        return v


# =============================================================================
# Reports
# =============================================================================

class FitTraceEntry(BaseModel):
    """One block evaluation inside a fit."""
    start: int = Field(default=0, description="Restart index")
    cycle: int
    block: str
    loglik: float = Field(..., description="Total log-likelihood after the block")
    mean_loglik_per_dim: float = Field(..., description="Mean nats per sample per dimension")


class FitReport(BaseModel):
    """Result summary of a fit."""
    trace: List[FitTraceEntry] = Field(default_factory=list)
    loglik: float
    n_samples: int
    n_dims: int
    cycles: int
    converged: bool
    exponents: List[float] = Field(default_factory=list)
    tree: str = ""


class DirichletReport(BaseModel):
    """Per-coordinate KS tests of root-children Beta marginals."""
    statistics: List[float]
    pvalues: List[float]
    alphas: List[float] = Field(..., description="Dirichlet parameters n_k / p_root")
    level: float = 0.01
    passed: bool


class CheckResult(BaseModel):
    """One oracle check."""
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class CheckReport(BaseModel):
    """Oracle suite result."""
    results: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


class GridSpec(BaseModel):
    """Location grid: either per-axis linspace triples or explicit points."""
    axes: Optional[List[List[float]]] = Field(
        default=None,
        description="One [lo, hi, num] triple per dimension"
    )
    points: Optional[List[List[float]]] = Field(
        default=None,
        description="Explicit grid points"
    )
    prior: Optional["PriorSpec"] = None

    @model_validator(mode="after")
    def check_one_form(self) -> "GridSpec":
        if (self.axes is None) == (self.points is None):
            raise ValueError("grid needs exactly one of 'axes' or 'points'")
        if self.axes is not None:
            for axis in self.axes:
                if len(axis) != 3 or int(axis[2]) < 1 or axis[1] < axis[0]:
                    raise ValueError(f"invalid axis spec {axis}, expected [lo, hi, num]")
        return self


class PriorSpec(BaseModel):
    """Prior over the location."""
    kind: Literal["flat", "gaussian"] = "flat"
    mean: Optional[List[float]] = None
    std: float = Field(default=1.0, gt=0)


GridSpec.model_rebuild()


# =============================================================================
# Data
# =============================================================================

@dataclass
class Dataset:
    """Sample matrix (rows are samples) with column labels."""
    values: np.ndarray
    labels: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not self.labels:
            self.labels = [f"x{i}" for i in range(self.values.shape[1])]

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]
