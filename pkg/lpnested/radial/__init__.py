"""Radial distribution package."""
from .interface import RadialModel
from .families import (
    GammaP,
    LogNormal,
    LogNormalMixture,
    UniformBallRadial,
    fit_radial,
    log_gamma_variates,
    parse_radial_tag,
    radial_from_spec,
    white_scale,
)

__all__ = [
    "RadialModel",
    "GammaP",
    "LogNormal",
    "LogNormalMixture",
    "UniformBallRadial",
    "fit_radial",
    "log_gamma_variates",
    "parse_radial_tag",
    "radial_from_spec",
    "white_scale",
]
