"""Exception types shared across the package.

Plain precondition violations raise ValueError; these classes mark failure
modes callers are expected to branch on (CLI exit codes, tuning exclusion,
bootstrap stability).
"""


class GamsplineError(Exception):
    """Base class for package-specific errors."""


class DatasetError(GamsplineError):
    """A data file or schema manifest failed validation."""


class UndefinedMetricError(GamsplineError):
    """The requested metric is undefined on the given sample
    (e.g., AUROC with a single class present)."""


class UnstableBootstrapError(GamsplineError):
    """More than half of the bootstrap replicates left the metric undefined."""


class NumericalError(GamsplineError):
    """The solver could not make progress even after ridge-boosted retries."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class TuningError(GamsplineError):
    """Every candidate in the tuning grid failed to fit."""


class UnsupportedModelError(GamsplineError):
    """The operation requires a spline-expanded model."""
