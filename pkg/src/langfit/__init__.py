"""langfit: polynomial-drift Langevin models for irregularly sampled series.

Fit the SDE  dP/dt = sum_i alpha_i P^i + sigma P eps  to observed series by
maximum likelihood, select the drift order by AIC, sample the flat-prior
posterior with an affine-invariant ensemble sampler, turn the draws into
potential credible bands, and classify time windows into dynamical regimes.
"""

__version__ = "0.1.0"

from . import errors
from .inference import (FitResult, ModelSelection, fit_mle, select_order,
                        step_loglik, total_loglik)
from .mcmc import (McmcConfig, PosteriorEnsemble, PotentialBand, default_band_grid,
                   diagnostics, potential_band, sample_posterior)
from .models import (DriftModel, FixedPoint, drift_eval, fixed_points,
                     potential_eval)
from .regimes import (RegimeLabel, SkippedWindow, classify_window, order_confusion,
                      regime_track)
from .replicate import order_recovery, parameter_recovery
from .sampler import integrated_autocorr_time, run_sampler, stretch_move
from .simulate import (Diverged, SimConfig, random_model, simulate_ensemble,
                       simulate_path)
from .timeseries import (QuoteRecord, Series, Window, clean_quotes, load_series,
                         monthly_windows, resample_last_quote, write_series)

__all__ = [
    "errors",
    "DriftModel", "FixedPoint", "drift_eval", "potential_eval", "fixed_points",
    "Series", "QuoteRecord", "Window", "clean_quotes", "resample_last_quote",
    "load_series", "write_series", "monthly_windows",
    "SimConfig", "Diverged", "simulate_path", "simulate_ensemble", "random_model",
    "FitResult", "ModelSelection", "step_loglik", "total_loglik", "fit_mle",
    "select_order",
    "McmcConfig", "PosteriorEnsemble", "PotentialBand", "sample_posterior",
    "potential_band", "default_band_grid", "diagnostics",
    "stretch_move", "run_sampler", "integrated_autocorr_time",
    "RegimeLabel", "SkippedWindow", "classify_window", "regime_track",
    "order_confusion",
    "order_recovery", "parameter_recovery",
]
