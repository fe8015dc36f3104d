"""Exception types shared across the package."""


class QadsimError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(QadsimError, ValueError):
    """Operand dimensions are inconsistent or an index is out of range."""


class TruncationError(QadsimError, ValueError):
    """Requested operation loses too much norm/population to Fock truncation."""


class ValidationError(QadsimError, ValueError):
    """An input violates its physicality or normalization contract."""


class SolverError(QadsimError, RuntimeError):
    """The master-equation integrator failed to meet its tolerances."""


class GridMismatchError(QadsimError, ValueError):
    """Time grids of traces that must share a grid do not match."""


class FormatError(QadsimError, ValueError):
    """An imported data file does not parse or violates its format contract."""


class CalibrationError(QadsimError, RuntimeError):
    """Displacement-amplitude calibration failed (degenerate or inconsistent data)."""


class ConvergenceError(QadsimError, RuntimeError):
    """An iterative optimizer stopped before reaching its termination criterion."""


class StabilityError(QadsimError, ValueError):
    """The requested cavity geometry does not support stable transverse modes."""


class ResolutionError(QadsimError, ValueError):
    """The transverse grid cannot resolve the field (aliasing or undersampling)."""


class ConfigError(QadsimError, ValueError):
    """Experiment configuration failed validation.

    ``field`` holds a dotted path (e.g. ``system.g0_khz``) when the error is
    attributable to a single entry.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class ConditioningWarning(UserWarning):
    """Data is formally usable but poorly conditioned (e.g. too few Wigner points)."""
