"""Dual categorical encoding plus MVC and TIME expansion to a dense matrix.

Every CAT column is emitted twice: as an ordinal id (first-seen order over the
fit window, 0 for unseen tokens) and as its raw occurrence count in the fit
window (0 for unseen).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .schema import Role

SECONDS_PER_DAY = 86400
EPOCH_WEEKDAY = 3  # 1970-01-01 was a Thursday; Monday == 0


@dataclass(frozen=True)
class EncoderState:
    ordinal_maps: dict   # CAT column -> {token: id >= 1}
    freq_tables: dict    # CAT column -> {token: count}
    mvc_freq: dict       # MVC column -> {token: count over token occurrences}
    output_layout: tuple  # ((source column, feature name, kind), ...)

    @property
    def feature_names(self):
        return [name for _, name, _ in self.output_layout]


@dataclass
class FeatureMatrix:
    values: np.ndarray
    feature_names: list

    @property
    def row_count(self):
        return self.values.shape[0]

    @property
    def feature_count(self):
        return self.values.shape[1]

    def select(self, mask):
        mask = np.asarray(mask, dtype=bool)
        names = [n for n, keep in zip(self.feature_names, mask) if keep]
        return FeatureMatrix(np.ascontiguousarray(self.values[:, mask]), names)


_EXPANSION = {
    Role.CAT: (("ord", "ordinal"), ("freq", "frequency")),
    Role.NUM: ((None, "numeric"),),
    Role.TIME: (("epoch", "epoch"), ("hour", "hour"), ("dow", "weekday")),
    Role.MVC: (("count", "mvc_count"), ("maxfreq", "mvc_maxfreq")),
}


def output_layout(schema):
    """Feature layout; depends on the schema only."""
    layout = []
    for name, role in schema.columns:
        for suffix, kind in _EXPANSION[role]:
            layout.append((name, name if suffix is None else f"{name}__{suffix}", kind))
    return tuple(layout)


def mvc_tokens(cell):
    if cell is None or cell == "":
        return []
    return [t for t in cell.split(",") if t != ""]


def fit_encoders(window, schema):
    if not window or sum(b.row_count for b in window) == 0:
        raise DataError("cannot fit encoders on an empty window")
    ordinal, freq, mvc = {}, {}, {}
    for name in schema.of_role(Role.CAT):
        ids, counts = {}, {}
        for b in window:
            for tok in b.columns[name]:
                if tok not in ids:
                    ids[tok] = len(ids) + 1
                    counts[tok] = 1
                else:
                    counts[tok] += 1
        ordinal[name], freq[name] = ids, counts
    for name in schema.of_role(Role.MVC):
        counts = {}
        for b in window:
            for cell in b.columns[name]:
                for tok in mvc_tokens(cell):
                    counts[tok] = counts.get(tok, 0) + 1
        mvc[name] = counts
    return EncoderState(ordinal, freq, mvc, output_layout(schema))


def _lookup(column, table):
    get = table.get
    return np.fromiter((get(tok, 0) for tok in column), dtype=np.float64, count=len(column))


def transform_batch(batch, state, schema):
    if state.output_layout != output_layout(schema):
        raise DataError("encoder layout does not match schema")
    n = batch.row_count
    blocks = []
    for name, role in schema.columns:
        col = batch.columns[name]
        if role == Role.CAT:
            blocks.append(_lookup(col, state.ordinal_maps[name]))
            blocks.append(_lookup(col, state.freq_tables[name]))
        elif role == Role.NUM:
            blocks.append(np.asarray(col, dtype=np.float64))
        elif role == Role.TIME:
            t = np.asarray(col, dtype=np.float64)
            days = np.floor_divide(t, SECONDS_PER_DAY)
            blocks.append(t)
            blocks.append(np.floor_divide(t - days * SECONDS_PER_DAY, 3600))
            blocks.append(np.mod(days + EPOCH_WEEKDAY, 7))
        else:
            table = state.mvc_freq[name]
            count = np.empty(n)
            best = np.empty(n)
            for i, cell in enumerate(col):
                toks = mvc_tokens(cell)
                count[i] = len(toks)
                best[i] = max((table.get(t, 0) for t in toks), default=0)
            blocks.append(count)
            blocks.append(best)
    values = np.column_stack(blocks) if blocks else np.empty((n, 0))
    values = np.ascontiguousarray(values, dtype=np.float64).reshape(n, len(state.output_layout))
    return FeatureMatrix(values, state.feature_names)
