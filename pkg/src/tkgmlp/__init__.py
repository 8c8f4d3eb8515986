"""Tabular classifier combining spline-based KAN layers with gated MLP blocks.

Public surface: the model (`ModelConfig`, `build_model`), feature encoders
(`EncoderSpec`, `fit_bins`, `qle_encode`, ...), training (`TrainConfig`,
`train`, `grid_search`), ranking metrics (`ks`, `auc`, `compute_metrics`),
and the synthetic benchmark generator (`SyntheticTaskSpec`, `synth_generate`).
"""

from .data import (
    Dataset,
    SyntheticColumnSpec,
    SyntheticTaskSpec,
    bayes_metrics,
    chronological_split,
    desk_tiny_spec,
    load_csv,
    synth_generate,
)
from .encoders import (
    BinSpec,
    EncoderSpec,
    clr_encode,
    fit_bins,
    ple_encode,
    qle_encode,
    quantile_encode,
)
from .metrics import MetricReport, auc, compute_metrics, ks, roc_sweep
from .model import ModelConfig, TkgmlpModel, build_model
from .trainer import GridSpace, TrainConfig, early_stop_check, grid_search, lr_schedule, train

__version__ = "0.1.0"

__all__ = [
    "BinSpec",
    "Dataset",
    "EncoderSpec",
    "GridSpace",
    "MetricReport",
    "ModelConfig",
    "SyntheticColumnSpec",
    "SyntheticTaskSpec",
    "TkgmlpModel",
    "TrainConfig",
    "auc",
    "bayes_metrics",
    "build_model",
    "chronological_split",
    "clr_encode",
    "compute_metrics",
    "desk_tiny_spec",
    "early_stop_check",
    "fit_bins",
    "grid_search",
    "ks",
    "load_csv",
    "lr_schedule",
    "ple_encode",
    "qle_encode",
    "quantile_encode",
    "roc_sweep",
    "synth_generate",
    "train",
]
