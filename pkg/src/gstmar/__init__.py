"""Gaussian and Student's t mixture autoregressive (G-StMAR) models."""

from .diagnostics import (
    FitReport,
    SelectionConfig,
    fit_report,
    information_criteria,
    quantile_residuals,
    residual_acf,
    select_model,
)
from .estimation import EstimationError, EstimationResult, estimate, local_refine, std_errors
from .genetic import GaConfig, genetic_search
from .io import ingest_spread, load_model, read_series_csv, save_model
from .model import (
    GStmarModel,
    LikelihoodError,
    ModelError,
    ModelOrder,
    Regime,
    canonicalize,
    conditional_cdf,
    conditional_density,
    conditional_logdensity,
    conditional_moments,
    log_likelihood,
    mixing_weights,
    stationary_density,
    stationary_logdensity,
    unconditional_moments,
)
from .params import pack, unpack
from .simulation import forecast, sample_stationary_init, simulate

__version__ = "0.1.0"
