"""Tempered space-time fractional negative binomial process: sampling, series and checks."""

from importlib.metadata import PackageNotFoundError, version

from .errors import (CancellationError, ConstraintError, DivergenceError, DomainError,
                     NumericalError, PoleError, QuadratureError, RejectionBudgetError,
                     TruncationError, TstfnbpError)
from .samplers import ProcessParams, RngStream, SamplePath
from .special import SeriesControl, generalized_wright, mittag_leffler, prabhakar_ml

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "ProcessParams", "RngStream", "SamplePath", "SeriesControl",
    "mittag_leffler", "prabhakar_ml", "generalized_wright",
    "TstfnbpError", "DomainError", "PoleError", "ConstraintError", "NumericalError",
    "TruncationError", "DivergenceError", "CancellationError", "QuadratureError",
    "RejectionBudgetError", "__version__",
]
