"""Incremental Gaussian mixture learners with covariance and precision forms.

The covariance-form learner recomputes inverses and determinants densely at
every step; the precision-form learner keeps the inverse and the log
determinant current with rank-one updates.  Both share one step skeleton and
produce the same mixtures.
"""

__version__ = "0.1.0"

from .data import ColumnStats, Dataset, FoldPlan, column_stats, load_csv, load_iris, one_hot, save_csv, stratified_kfold
from .errors import ConfigError, DegenerateComponent, IGMNError, ParseError, SingularUpdate, SkippedUpdate
from .evaluate import CVReport, cross_validate, fit
from .inference import Partition, Prediction, classify, classify_many, conditional_moments, marginal_log_density, posterior_given_known, predict, predict_many
from .model import DEFAULT_BETA, GaussianComponent, LearnerConfig, Mixture, Representation, UpdateTrace, create_component, novelty_threshold, prune
from .numerics import chi2_cdf, chi2_quantile, det_rank_one, log_sum_exp, quadratic_form, sm_rank_one
from .persist import load_model, save_model
from .train import learn, step

__all__ = [
    "CVReport", "ColumnStats", "ConfigError", "DEFAULT_BETA", "Dataset", "DegenerateComponent",
    "FoldPlan", "GaussianComponent", "IGMNError", "LearnerConfig", "Mixture", "ParseError",
    "Partition", "Prediction", "Representation", "SingularUpdate", "SkippedUpdate", "UpdateTrace",
    "chi2_cdf", "chi2_quantile", "classify", "classify_many", "column_stats", "conditional_moments",
    "create_component", "cross_validate", "det_rank_one", "fit", "learn", "load_csv", "load_iris",
    "load_model", "log_sum_exp", "marginal_log_density", "novelty_threshold", "one_hot",
    "posterior_given_known", "predict", "predict_many", "prune", "quadratic_form", "save_csv",
    "save_model", "sm_rank_one", "step", "stratified_kfold",
]
