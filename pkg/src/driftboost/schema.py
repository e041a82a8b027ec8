"""Dataset manifests, TSV batch files, missing-value filling and row capping.

Batches are stored column-wise: NUM and TIME columns are float64 arrays with
NaN for missing cells, CAT and MVC columns are object arrays holding ``str``
or ``None``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DataError

MISSING_TOKEN = "__MISSING__"
DEFAULT_ROW_CAP = 2_000_000


class Role(str, Enum):
    CAT = "CAT"
    NUM = "NUM"
    MVC = "MVC"
    TIME = "TIME"


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple  # ((name, Role), ...)
    label: str
    positive_label: str = "1"

    def __post_init__(self):
        cols = tuple((str(n), Role(r)) for n, r in self.columns)
        object.__setattr__(self, "columns", cols)
        names = [n for n, _ in cols]
        if not names:
            raise DataError("schema needs at least one feature column")
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DataError(f"duplicate column names: {', '.join(dupes)}")
        if self.label in names:
            raise DataError(f"label column {self.label!r} is also listed as a feature")

    @property
    def names(self):
        return [n for n, _ in self.columns]

    def role(self, name):
        for n, r in self.columns:
            if n == name:
                return r
        raise KeyError(name)

    def of_role(self, role):
        return [n for n, r in self.columns if r == role]


@dataclass
class Batch:
    index: int
    columns: dict
    labels: np.ndarray | None = None

    @property
    def row_count(self):
        if self.labels is not None:
            return len(self.labels)
        for col in self.columns.values():
            return len(col)
        return 0

    def take(self, rows):
        """Row subset (``rows`` is an index array or slice), same batch index."""
        cols = {k: v[rows] for k, v in self.columns.items()}
        labels = None if self.labels is None else self.labels[rows]
        return Batch(self.index, cols, labels)


@dataclass(frozen=True)
class DatasetManifest:
    schema: FeatureSchema
    batch_paths: tuple
    budget_seconds: float


@dataclass(frozen=True)
class WindowStats:
    """Fill values computed over one window: NUM medians and TIME minima."""

    medians: dict = field(default_factory=dict)
    time_min: dict = field(default_factory=dict)


# --- manifest -------------------------------------------------------------

def load_manifest(path):
    if not os.path.isfile(path):
        raise DataError(f"manifest not found: {path}")
    base = os.path.dirname(os.path.abspath(path))
    budget = label = None
    positive = "1"
    columns, batches = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = key.strip(), value.strip()
            if key == "budget_seconds":
                try:
                    budget = float(value)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: budget_seconds is not a number") from None
            elif key == "label":
                label = value
            elif key == "positive_label":
                positive = value
            elif key == "column":
                name, sep, role = value.rpartition(":")
                if not sep or not name:
                    raise DataError(f"{path}:{lineno}: column must be <name>:<role>")
                if role not in Role.__members__:
                    raise DataError(f"{path}:{lineno}: unknown role {role!r}")
                columns.append((name, Role(role)))
            elif key == "batch":
                batches.append(value if os.path.isabs(value) else os.path.join(base, value))
            else:
                raise DataError(f"{path}:{lineno}: unknown key {key!r}")
    if budget is None or not budget > 0 or not math.isfinite(budget):
        raise DataError(f"{path}: budget_seconds must be a positive number")
    if not label:
        raise DataError(f"{path}: missing label=")
    if not batches:
        raise DataError(f"{path}: no batch= entries")
    schema = FeatureSchema(tuple(columns), label, positive)
    return DatasetManifest(schema, tuple(batches), budget)


def write_manifest(path, manifest, relative_to=None):
    base = relative_to or os.path.dirname(os.path.abspath(path))
    lines = [
        f"budget_seconds={manifest.budget_seconds!r}",
        f"label={manifest.schema.label}",
        f"positive_label={manifest.schema.positive_label}",
    ]
    lines += [f"column={n}:{r.value}" for n, r in manifest.schema.columns]
    for p in manifest.batch_paths:
        rel = os.path.relpath(p, base) if os.path.isabs(p) else p
        lines.append(f"batch={rel}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# --- batch files ----------------------------------------------------------

def _parse_num(cell, row, col):
    if cell == "" or cell.lower() == "nan":
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: non-numeric value {cell!r}") from None


def _parse_time(cell, row, col):
    if cell == "":
        return math.nan
    try:
        return float(int(cell))
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: non-integer time {cell!r}") from None


def load_batch(path, schema, index):
    """Read one TSV batch. Row numbers in errors are 1-based data rows."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"{path}: empty batch file")
    header = lines[0].rstrip("\r").split("\t")
    feature_names = schema.names
    allowed = set(feature_names) | {schema.label}
    extra = [h for h in header if h not in allowed]
    missing = [n for n in feature_names if n not in header]
    if extra or missing or len(set(header)) != len(header):
        raise DataError(
            f"{path}: header mismatch (unexpected: {extra or '-'}, missing: {missing or '-'})"
        )
    pos = {h: i for i, h in enumerate(header)}
    has_label = schema.label in pos
    raw = []
    for r, line in enumerate(lines[1:], 1):
        cells = line.rstrip("\r").split("\t")
        if len(cells) != len(header):
            raise DataError(f"{path}: row {r} has {len(cells)} cells, header has {len(header)}")
        raw.append(cells)

    columns = {}
    for name, role in schema.columns:
        j = pos[name]
        if role == Role.NUM:
            columns[name] = np.array([_parse_num(c[j], r, name) for r, c in enumerate(raw, 1)],
                                     dtype=np.float64)
        elif role == Role.TIME:
            columns[name] = np.array([_parse_time(c[j], r, name) for r, c in enumerate(raw, 1)],
                                     dtype=np.float64)
        else:
            columns[name] = np.array([c[j] if c[j] != "" else None for c in raw], dtype=object)
    labels = None
    if has_label:
        j = pos[schema.label]
        for r, c in enumerate(raw, 1):
            if c[j] == "":
                raise DataError(f"{path}: row {r} has an empty label")
        labels = np.array([c[j] == schema.positive_label for c in raw], dtype=np.int8)
    return Batch(index, columns, labels)


def _format_cell(value, role):
    if role == Role.NUM:
        return "" if math.isnan(value) else repr(float(value))
    if role == Role.TIME:
        return "" if math.isnan(value) else str(int(value))
    return "" if value is None else value


def write_batch(path, batch, schema):
    negative = "0" if schema.positive_label != "0" else "1"
    names = schema.names
    header = names + ([schema.label] if batch.labels is not None else [])
    out = ["\t".join(header)]
    roles = [schema.role(n) for n in names]
    cols = [batch.columns[n] for n in names]
    for i in range(batch.row_count):
        cells = [_format_cell(col[i], role) for col, role in zip(cols, roles)]
        if batch.labels is not None:
            cells.append(schema.positive_label if batch.labels[i] else negative)
        out.append("\t".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


# --- filling and capping --------------------------------------------------

def compute_window_stats(batches, schema):
    medians, tmin = {}, {}
    for name in schema.of_role(Role.NUM):
        vals = np.concatenate([b.columns[name] for b in batches]) if batches else np.empty(0)
        vals = vals[~np.isnan(vals)]
        medians[name] = float(np.median(vals)) if vals.size else 0.0
    for name in schema.of_role(Role.TIME):
        vals = np.concatenate([b.columns[name] for b in batches]) if batches else np.empty(0)
        vals = vals[~np.isnan(vals)]
        tmin[name] = float(vals.min()) if vals.size else 0.0
    return WindowStats(medians, tmin)


def fill_missing(batch, schema, stats):
    """Return a copy of ``batch`` with every missing cell replaced."""
    cols = {}
    for name, role in schema.columns:
        col = batch.columns[name]
        if role == Role.NUM:
            cols[name] = np.where(np.isnan(col), stats.medians.get(name, 0.0), col)
        elif role == Role.TIME:
            cols[name] = np.where(np.isnan(col), stats.time_min.get(name, 0.0), col)
        else:
            filled = col.copy()
            filled[np.equal(col, None)] = MISSING_TOKEN
            cols[name] = filled
    return Batch(batch.index, cols, batch.labels)


def subsample_rows(batches, cap, seed):
    """Cap the total row count at ``cap``, sampling each batch proportionally.

    Each batch keeps ceil(cap * rows / total) rows; the surplus from rounding
    up is trimmed one row per batch starting from the oldest, so the newest
    batch is trimmed last. Row order within a batch is preserved.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    total = sum(b.row_count for b in batches)
    if total <= cap:
        return list(batches)
    keep = [math.ceil(cap * b.row_count / total) for b in batches]
    surplus = sum(keep) - cap
    i = 0
    while surplus > 0:
        if keep[i % len(keep)] > 0:
            keep[i % len(keep)] -= 1
            surplus -= 1
        i += 1
    rng = np.random.default_rng(seed)
    out = []
    for b, k in zip(batches, keep):
        rows = np.sort(rng.choice(b.row_count, size=k, replace=False))
        out.append(b.take(rows))
    return out
