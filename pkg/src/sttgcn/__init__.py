"""Spatial-temporal tensor graph convolution with Tucker-factorized inputs, for traffic speed forecasting."""
from .data import RawDataset, WindowSet, load_dataset, prepare_windows, synthetic_ring_dataset
from .decomp import TuckerFactors, hooi, hosvd, tucker_ranks
from .graph import SpatialGraph, TemporalAdjacency, build_temporal_adjacency
from .kernels import BACKEND
from .metrics import MetricsReport, compute_metrics
from .model import ModelParams, TrainConfig, evaluate, train
from .stconv import ConvLayerParams, st_conv_factorized, st_conv_full
from .tensor import DataError, mode_product, unfold

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvLayerParams",
    "DataError",
    "MetricsReport",
    "ModelParams",
    "RawDataset",
    "SpatialGraph",
    "TemporalAdjacency",
    "TrainConfig",
    "TuckerFactors",
    "WindowSet",
    "build_temporal_adjacency",
    "compute_metrics",
    "evaluate",
    "hooi",
    "hosvd",
    "load_dataset",
    "mode_product",
    "prepare_windows",
    "st_conv_factorized",
    "st_conv_full",
    "synthetic_ring_dataset",
    "train",
    "tucker_ranks",
    "unfold",
]
