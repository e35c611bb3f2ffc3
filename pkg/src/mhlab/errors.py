"""Exception types shared across the package."""


class MhlabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MhlabError):
    """Invalid run configuration (unknown keys, inadmissible parameters)."""


class StepFailure(MhlabError):
    """Adaptive step controller could not meet the requested tolerance."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class EmptyWindow(MhlabError):
    """Requested time window is empty or outside the trajectory span."""


class DegenerateDeterminant(MhlabError):
    """det(A + iB) fell below the invertibility floor."""


class RootNotBracketed(MhlabError):
    """A root finder was called on an interval that does not bracket a root."""


class QuadratureFailure(MhlabError):
    """Adaptive quadrature did not reach the requested accuracy."""


class NonPositive(MhlabError):
    """The escape certificate came out non-positive."""


class IllConditioned(MhlabError):
    """Singular-value gap too small to trust a numerical rank decision."""


class UnsupportedFunction(MhlabError):
    """Function outside the closed-form transform family."""


class GridTooCoarse(MhlabError):
    """Grid does not resolve the requested wavelength or packet width."""


class StepTooLarge(MhlabError):
    """Splitting error estimate exceeded the requested bound."""


class NonConvergent(MhlabError):
    """Extrapolation tail did not settle."""


class ZeroField(MhlabError):
    """Operation undefined for an identically zero field."""
