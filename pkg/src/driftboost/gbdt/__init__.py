from .binning import BinMapper, fit_bins
from .core import (
    GbdtModel,
    TrainParams,
    Tree,
    build_tree,
    continue_training,
    leaf_weight,
    logistic_grad_hess,
    predict_margin,
    predict_proba,
    sigmoid,
    split_gain,
    train,
    tree_importances,
)
from ._kernels import BACKEND

__all__ = [
    "BACKEND", "BinMapper", "GbdtModel", "TrainParams", "Tree", "build_tree",
    "continue_training", "fit_bins", "leaf_weight", "logistic_grad_hess",
    "predict_margin", "predict_proba", "sigmoid", "split_gain", "train",
    "tree_importances",
]
