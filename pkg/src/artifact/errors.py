"""Error types shared across the package.

The CLI maps each class to a distinct process exit code so callers can
tell bad input apart from impossible geometry and from internal defects.
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_DEFECT = 4


class ConfigError(ValueError):
    """Malformed or contradictory run configuration (unknown keys, bad types)."""


class GeometryError(ValueError):
    """Requested geometry cannot host the object (grid too small, K = 0, ...)."""


class DefectError(RuntimeError):
    """An internal validation failed; indicates a bug, not bad input."""
