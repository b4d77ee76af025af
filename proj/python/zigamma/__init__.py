"""Zero-inflated Gamma models for daily wallet panels."""

from ._core import (
    Panel,
    ZigammaError,
    __version__,
    activity_series,
    basis_knots,
    basis_matrix,
    build_panel,
    fit,
    information_criteria,
    loglik,
    loglik_grad,
    n_params,
    run,
    simulate,
    simultaneous_band,
    skewness,
    study_day,
    trailing_mean,
)

__all__ = [
    "Panel",
    "ZigammaError",
    "__version__",
    "activity_series",
    "basis_knots",
    "basis_matrix",
    "build_panel",
    "fit",
    "information_criteria",
    "loglik",
    "loglik_grad",
    "n_params",
    "run",
    "simulate",
    "simultaneous_band",
    "skewness",
    "study_day",
    "trailing_mean",
]
