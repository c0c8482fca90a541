"""Forecasting user arrivals and re-trigger activity in A/B tests with the
negative-binomial stable-beta scaled-process model."""

from .baselines import BaselineId, predict_baseline
from .bench import AccuracyReport, accuracy_v, run_benchmark, survival_curve
from .data import (
    FreqSpectrum,
    SuffStats,
    TriggerData,
    compute_spectrum,
    compute_suffstats,
    holdout_truth,
)
from .errors import ConfigError, DataError, InitializationError, UnfitError
from .fit import FitConfig, FitResult, fit_mle, fit_regression
from .model import (
    ForecastReport,
    HyperParams,
    expected_total,
    forecast,
    log_marginal_likelihood,
    predict_new_users,
    predict_new_users_freq,
    predict_old_users_sum,
    predict_total,
)
from .simulate import SimConfig, sample_model, sample_zipf, simulate
from .special import psi, rho

__version__ = "0.1.0"
