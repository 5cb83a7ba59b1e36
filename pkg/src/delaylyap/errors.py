"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Matrix shapes are incompatible with the requested operation."""


class UnsupportedGeneralization(ValueError):
    """The lifted boundary value problem is only derived for omega = pi, h = 1."""


class GridError(ValueError):
    """A time or delay grid is misaligned or too coarse."""


class InstabilityError(RuntimeError):
    """The fundamental matrix does not decay, so the Lyapunov integral diverges."""
