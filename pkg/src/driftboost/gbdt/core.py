"""Second-order gradient boosting for binary logistic loss.

Trees are grown level by level on pre-binned features. A split is accepted
when its gain is positive, at least ``min_split_gain``, and both children carry
at least ``min_child_hessian``. Boosting stops early once a round produces no
accepted split, since every further round would see the same gradients.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .._accel import thread_limit
from ..errors import DataError
from ..metrics import auc
from . import _kernels
from .binning import BinMapper, fit_bins

HESS_FLOOR = 1e-16


@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 0.1
    num_iterations_max: int = 100
    early_stopping_rounds: int = 20
    reg_alpha: float = 0.0
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0
    max_depth: int = 6
    min_child_hessian: float = 1e-3
    max_bins: int = 255
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.num_iterations_max < 0:
            raise ValueError("num_iterations_max must be >= 0")
        if self.early_stopping_rounds < 0:
            raise ValueError("early_stopping_rounds must be >= 0")
        for name in ("reg_alpha", "reg_lambda", "min_split_gain", "min_child_hessian"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 2 <= self.max_bins <= 255:
            raise ValueError("max_bins must lie in [2, 255]")

    def with_lr(self, lr):
        return replace(self, learning_rate=lr)


@dataclass
class Tree:
    feature: np.ndarray    # int32, -1 marks a leaf
    threshold: np.ndarray  # int32 bin id; bin <= threshold goes left
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # leaf margin contribution (0 on internal nodes)
    gain: np.ndarray       # split gain (0 on leaves)

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_splits(self):
        return int(np.count_nonzero(self.feature >= 0))

    def predict_binned(self, binned):
        return _kernels.predict_binned(binned, self.feature, self.threshold,
                                       self.left, self.right, self.value)


@dataclass
class GbdtModel:
    bin_mapper: BinMapper
    trees: list = field(default_factory=list)
    shrinkages: list = field(default_factory=list)
    importances: np.ndarray = None
    feature_names: list = None
    params: TrainParams = None
    best_iteration: int = None

    def __post_init__(self):
        if self.importances is None:
            self.importances = tree_importances(self.trees, self.bin_mapper.n_features)
        if self.feature_names is None:
            self.feature_names = [f"f{i}" for i in range(self.bin_mapper.n_features)]

    @property
    def n_features(self):
        return self.bin_mapper.n_features


# --- loss -----------------------------------------------------------------

def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_grad_hess(margin, label):
    p = float(sigmoid(np.array([margin]))[0])
    return p - label, max(p * (1.0 - p), HESS_FLOOR)


def _grad_hess(margins, y):
    p = sigmoid(margins)
    return p - y, np.maximum(p * (1.0 - p), HESS_FLOOR)


# --- split arithmetic -----------------------------------------------------

def _soft_threshold(g, alpha):
    return math.copysign(max(abs(g) - alpha, 0.0), g)


def _score(g, h, reg_lambda, reg_alpha):
    t = _soft_threshold(g, reg_alpha)
    return 0.0 if t == 0.0 else t * t / (h + reg_lambda)


def split_gain(gl, hl, gr, hr, reg_lambda, reg_alpha):
    return 0.5 * (_score(gl, hl, reg_lambda, reg_alpha) + _score(gr, hr, reg_lambda, reg_alpha)
                  - _score(gl + gr, hl + hr, reg_lambda, reg_alpha))


def leaf_weight(g, h, reg_lambda, reg_alpha):
    t = _soft_threshold(g, reg_alpha)
    return 0.0 if t == 0.0 else -t / (h + reg_lambda)


# --- tree growing ---------------------------------------------------------

def build_tree(binned, grad, hess, params, n_bins=None):
    """Grow one tree level by level on feature-major ``binned`` data.

    Returns the tree and the per-feature sum of accepted split gains.
    """
    binned = np.ascontiguousarray(binned)
    n_features, n_rows = binned.shape
    if n_bins is None:
        n_bins = binned.max(axis=1).astype(np.int64) + 1 if n_rows else np.ones(n_features, np.int64)
    n_bins = np.asarray(n_bins, dtype=np.int64)
    width = int(n_bins.max()) if n_features else 1
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    hess = np.ascontiguousarray(hess, dtype=np.float64)
    lam, alpha = float(params.reg_lambda), float(params.reg_alpha)
    min_gain, min_hess = float(params.min_split_gain), float(params.min_child_hessian)

    feature, threshold, left, right, value, gain = [-1], [-1], [-1], [-1], [0.0], [0.0]
    gains = np.zeros(n_features)
    # level-local slot of every row; -1 once the row sits in a finished leaf
    slot = np.zeros(n_rows, dtype=np.int64)
    level = [0]  # tree node id of each slot
    depth = 0
    while level:
        n_slots = len(level)
        g_sum, h_sum, counts = _kernels.node_totals(slot, grad, hess, n_slots)
        can_split = depth < params.max_depth and n_features > 0
        hist = None
        if can_split and counts.max(initial=0) >= 2:
            hist = _kernels.build_histograms(binned, slot, grad, hess, n_slots, width)
        split_f = np.full(n_slots, -1, dtype=np.int64)
        split_t = np.zeros(n_slots, dtype=np.int64)
        next_slot = np.full(n_slots * 2, -1, dtype=np.int64)
        next_level = []
        for k, node in enumerate(level):
            f = -1
            if hist is not None and counts[k] >= 2:
                f, t, best = _kernels.find_best_split(
                    hist[k], n_bins, float(g_sum[k]), float(h_sum[k]), lam, alpha,
                    min_gain, min_hess)
            if f < 0:
                value[node] = leaf_weight(float(g_sum[k]), float(h_sum[k]), lam, alpha)
                continue
            lid = len(feature)
            for _ in range(2):
                feature.append(-1); threshold.append(-1); left.append(-1); right.append(-1)
                value.append(0.0); gain.append(0.0)
            feature[node], threshold[node] = int(f), int(t)
            left[node], right[node], gain[node] = lid, lid + 1, float(best)
            gains[f] += best
            split_f[k], split_t[k] = f, t
            next_slot[2 * k] = len(next_level)
            next_level.append(lid)
            next_slot[2 * k + 1] = len(next_level)
            next_level.append(lid + 1)
        if not next_level:
            break
        _kernels.route_rows(binned, slot, split_f, split_t, next_slot)
        level = next_level
        depth += 1

    i32 = np.int32
    tree = Tree(np.array(feature, i32), np.array(threshold, i32), np.array(left, i32),
                np.array(right, i32), np.array(value, np.float64), np.array(gain, np.float64))
    return tree, gains


def tree_importances(trees, n_features):
    imp = np.zeros(n_features)
    for tree in trees:
        internal = tree.feature >= 0
        # add.at applies updates in node order, matching a plain re-walk
        np.add.at(imp, tree.feature[internal], tree.gain[internal])
    return imp


# --- boosting -------------------------------------------------------------

def _as_values(matrix):
    return np.ascontiguousarray(getattr(matrix, "values", matrix), dtype=np.float64)


def _as_labels(labels, n):
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (n,):
        raise DataError(f"expected {n} labels, got {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0 or 1")
    return y


def _boost(binned, n_bins, y, margins, params, valid, on_round, n_threads):
    """Run boosting rounds from ``margins``; returns (trees, best_iteration)."""
    trees = []
    es = params.early_stopping_rounds > 0 and valid is not None
    if es:
        v_binned, v_y, v_margins = valid
        if v_y.size == 0 or v_y.min() == v_y.max():
            raise DataError("degenerate validation: early stopping needs both classes")
        best_score, best_round = auc(v_margins, v_y), 0
    lr = params.learning_rate
    with thread_limit(n_threads):
        for r in range(params.num_iterations_max):
            t0 = time.perf_counter()
            grad, hess = _grad_hess(margins, y)
            tree, _ = build_tree(binned, grad, hess, params, n_bins)
            if tree.n_splits == 0:
                break
            trees.append(tree)
            margins = margins + lr * tree.predict_binned(binned)
            stop = False
            if es:
                v_margins = v_margins + lr * tree.predict_binned(v_binned)
                score = auc(v_margins, v_y)
                if score > best_score:
                    best_score, best_round = score, r + 1
                elif r + 1 - best_round >= params.early_stopping_rounds:
                    stop = True
            if on_round is not None and on_round(r, time.perf_counter() - t0):
                stop = True
            if stop:
                break
    if es:
        return trees[:best_round], best_round
    return trees, len(trees)


def _prepare_valid(valid, mapper, base_model=None):
    if valid is None:
        return None
    if len(valid) == 2:
        v_matrix, v_labels = valid
        v_init = None
    else:
        v_matrix, v_labels, v_init = valid
    vx = _as_values(v_matrix)
    vy = _as_labels(v_labels, vx.shape[0])
    if v_init is None:
        v_init = predict_margin(base_model, vx) if base_model is not None else np.zeros(len(vy))
    return mapper.transform(vx), vy, np.array(v_init, dtype=np.float64)


def train(matrix, labels, init_margins=None, params=None, valid=None, *,
          bin_mapper=None, n_threads=None, on_round=None):
    """Fit a model from ``init_margins`` (zeros for a cold start).

    ``valid`` is ``(matrix, labels)`` or ``(matrix, labels, init_margins)``;
    with ``early_stopping_rounds > 0`` the model is truncated at the round
    with the best validation AUC. ``on_round(round, seconds)`` returning True
    ends training after that round.
    """
    params = params or TrainParams()
    x = _as_values(matrix)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("cannot train on empty data")
    y = _as_labels(labels, x.shape[0])
    margins = np.zeros(len(y)) if init_margins is None else np.array(init_margins, dtype=np.float64)
    if margins.shape != y.shape:
        raise DataError("init_margins length must equal row count")
    mapper = bin_mapper or fit_bins(x, params.max_bins)
    binned = mapper.transform(x)
    trees, best = _boost(binned, mapper.n_bins, y, margins, params,
                         _prepare_valid(valid, mapper), on_round, n_threads)
    names = list(getattr(matrix, "feature_names", None) or [f"f{i}" for i in range(x.shape[1])])
    return GbdtModel(mapper, trees, [params.learning_rate] * len(trees),
                     tree_importances(trees, x.shape[1]), names, params, best)


def continue_training(model, matrix, labels, params=None, valid=None, *,
                      n_threads=None, on_round=None):
    """Append trees fitted from the model's own margins on new data."""
    params = params or model.params or TrainParams()
    x = _as_values(matrix)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DataError(f"feature-count mismatch: model has {model.n_features}, "
                        f"data has {x.shape[1] if x.ndim == 2 else '?'}")
    if x.shape[0] == 0:
        raise DataError("cannot train on empty data")
    y = _as_labels(labels, x.shape[0])
    margins = predict_margin(model, x)
    binned = model.bin_mapper.transform(x)
    new, best = _boost(binned, model.bin_mapper.n_bins, y, margins, params,
                       _prepare_valid(valid, model.bin_mapper, model), on_round, n_threads)
    trees = model.trees + new
    shrink = model.shrinkages + [params.learning_rate] * len(new)
    return GbdtModel(model.bin_mapper, trees, shrink,
                     tree_importances(trees, model.n_features),
                     list(model.feature_names), params, len(model.trees) + best)


def predict_margin(model, matrix):
    x = _as_values(matrix)
    binned = model.bin_mapper.transform(x)
    margin = np.zeros(x.shape[0])
    for tree, s in zip(model.trees, model.shrinkages):
        margin = margin + s * tree.predict_binned(binned)
    return margin


def predict_proba(model, matrix):
    return sigmoid(predict_margin(model, matrix))
