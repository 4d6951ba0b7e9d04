"""Bayesian additive quantile regression trees."""

from .classify import fit_classifier, predict_label, predict_proba
from .dists import QuantileSpec
from .draws import PosteriorDraws, TransformRecord
from .io import load_model, read_csv, save_model
from .metrics import auc, check_loss, error_rate, mwad
from .model import fit, inverse_transform, predict_band, predict_draws, predict_quantile, transform_response
from .sampler import SamplerConfig, run_chain
from .simdata import Dataset, simulate
from .studies import replicate, summarize
from .tree import RegressionTree, SplitRule, TreePrior

__all__ = [
    "Dataset", "PosteriorDraws", "QuantileSpec", "RegressionTree", "SamplerConfig", "SplitRule",
    "TransformRecord", "TreePrior", "auc", "check_loss", "error_rate", "fit", "fit_classifier",
    "inverse_transform", "load_model", "mwad", "predict_band", "predict_draws", "predict_label",
    "predict_proba", "predict_quantile", "read_csv", "replicate", "run_chain", "save_model",
    "simulate", "summarize", "transform_response",
]
__version__ = "0.1.0"
