"""Exception types shared across the package."""


class RevGeoError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RevGeoError):
    """A coordinate left the valid chart domain of the surface."""


class UnsupportedModeError(RevGeoError):
    """Operation requires a metric mode it does not support."""


class ConnectionFailure(RevGeoError):
    """Two-point geodesic boundary problem failed to converge."""


class ConfigError(RevGeoError):
    """Invalid or malformed census configuration."""
