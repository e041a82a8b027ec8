from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class BinMapper:
    """Per-feature upper edges. Bin id = number of edges strictly below the value."""

    edges: list

    @property
    def n_features(self):
        return len(self.edges)

    @property
    def n_bins(self):
        return np.array([len(e) + 1 for e in self.edges], dtype=np.int64)

    def transform(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != self.n_features:
            raise DataError(
                f"feature-count mismatch: model expects {self.n_features}, got "
                f"{values.shape[1] if values.ndim == 2 else values.shape}"
            )
        out = np.empty((self.n_features, values.shape[0]), dtype=np.uint8)
        for f, e in enumerate(self.edges):
            out[f] = np.searchsorted(e, values[:, f], side="left")
        return out


def feature_edges(column, max_bins):
    distinct = np.unique(column)
    if distinct.size <= 1:
        return np.empty(0)
    if distinct.size <= max_bins:
        edges = (distinct[:-1] + distinct[1:]) / 2.0
    else:
        edges = np.quantile(distinct, np.arange(1, max_bins) / max_bins)
    return np.unique(edges)


def fit_bins(matrix, max_bins=255):
    values = getattr(matrix, "values", matrix)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] < 1:
        raise DataError("cannot bin an empty matrix")
    if not 2 <= max_bins <= 255:
        raise ValueError("max_bins must lie in [2, 255]")
    return BinMapper([feature_edges(values[:, f], max_bins) for f in range(values.shape[1])])
