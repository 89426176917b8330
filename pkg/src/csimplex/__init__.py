"""Numerical toolkit for carrying simplices of competitive Kolmogorov maps:
builtin population models, fixed point analysis, existence checks, radial
graph-transform meshes, invariant manifold tracing, parameter-regime
classification, and SVG phase portraits."""

__version__ = "0.1.0"

from .models import (
    CompetitiveMap,
    ParameterSet,
    make_atkinson_allen,
    make_custom,
    make_leslie_gower,
    make_ricker,
    map_from_config,
)

__all__ = [
    "__version__",
    "CompetitiveMap",
    "ParameterSet",
    "make_leslie_gower",
    "make_atkinson_allen",
    "make_ricker",
    "make_custom",
    "map_from_config",
]
