"""Closed geodesics on surfaces of revolution: discrete loops, descent,
minimax saddle search, Clairaut shooting and Jacobi-field index analysis."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ConnectionFailure,
    DomainError,
    RevGeoError,
    UnsupportedModeError,
)
from .surface import (
    Metric,
    Point,
    Profile,
    Tangent,
    brioschi_curvature_fd,
    christoffel,
    curvature_at,
    enable_debug_checks,
    make_profile,
    parallel_data,
)

__all__ = [
    "ConfigError",
    "ConnectionFailure",
    "DomainError",
    "RevGeoError",
    "UnsupportedModeError",
    "Metric",
    "Point",
    "Profile",
    "Tangent",
    "brioschi_curvature_fd",
    "christoffel",
    "curvature_at",
    "enable_debug_checks",
    "make_profile",
    "parallel_data",
]
