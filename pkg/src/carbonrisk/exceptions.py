"""Exception hierarchy.

Libraries built on top of this package can catch :class:`CarbonRiskError` to
handle every domain failure, or one of the specific subclasses.  The CLI maps
these onto process exit codes (see :mod:`carbonrisk.cli`).
"""


class CarbonRiskError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CarbonRiskError, ValueError):
    """Invalid input values: out-of-range scores, malformed CSV cells,
    misaligned samples, inconsistent dimensions."""


class InsufficientDataError(ValidationError):
    """Too few observations or too few assets for the requested operation."""


class DegenerateSortError(CarbonRiskError):
    """A double sort produced an empty corner portfolio, so the long-short
    factor return is undefined."""


class CollinearityError(CarbonRiskError):
    """Rank-deficient regression design matrix."""


class EstimationError(CarbonRiskError):
    """Numerical estimation failed.  ``best_params`` carries the best
    parameters found before failure, when available."""

    def __init__(self, message, best_params=None, diagnostics=None):
        super().__init__(message)
        self.best_params = best_params
        self.diagnostics = diagnostics or {}


class SingularMatrixError(CarbonRiskError):
    """A matrix inversion or low-rank update hit a (near-)singular pivot."""


class InfeasibleProblemError(CarbonRiskError):
    """The optimization problem has an empty feasible region."""


class EmptyUniverseError(CarbonRiskError):
    """Filters removed every asset from the investment universe."""
