"""Reproducible drifting batch streams covering all four column roles.

A latent Gaussian vector ``z`` drives NUM columns directly and CAT/MVC
columns through discretization. Labels are Bernoulli(sigmoid(w . z)). From
batch ``drift_at`` on, the concept changes abruptly:

* FLIP   -- ``w`` is negated;
* ROTATE -- ``w`` is multiplied by a fixed random orthogonal matrix;
* SHIFT  -- ``z`` is translated (covariate shift).
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DataError
from .schema import Batch, DatasetManifest, FeatureSchema, Role, write_batch, write_manifest

START_EPOCH = 1_533_081_600  # 2018-08-01 00:00 UTC
CAT_EDGES = np.linspace(-2.5, 2.5, 11)


class DriftKind(str, Enum):
    FLIP = "FLIP"
    ROTATE = "ROTATE"
    SHIFT = "SHIFT"


@dataclass(frozen=True)
class DriftSpec:
    batches: int = 10
    rows_per_batch: int = 5000
    n_cat: int = 4
    n_num: int = 4
    n_mvc: int = 1
    n_time: int = 1
    drift_at: int = 6
    drift_kind: DriftKind = DriftKind.FLIP
    seed: int = 0
    n_informative: int = None   # latent dims with nonzero weight; None = all
    signal: float = 4.0         # norm of the weight vector
    missing_rate: float = 0.01
    budget_seconds: float = 600.0

    def __post_init__(self):
        object.__setattr__(self, "drift_kind", DriftKind(self.drift_kind))
        if self.batches < 1 or self.rows_per_batch < 1:
            raise ValueError("batches and rows_per_batch must be >= 1")
        if min(self.n_cat, self.n_num, self.n_mvc, self.n_time) < 0:
            raise ValueError("feature counts must be >= 0")
        if self.latent_dim < 1:
            raise ValueError("need at least one CAT, NUM or MVC column to carry signal")
        if self.n_informative is not None and not 1 <= self.n_informative <= self.latent_dim:
            raise ValueError("n_informative must lie in [1, n_cat + n_num + n_mvc]")
        # drift_at past the last batch means the stream never drifts
        if self.drift_at < 1:
            raise ValueError("drift_at must be >= 1")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")

    @property
    def latent_dim(self):
        return self.n_num + self.n_cat + self.n_mvc


def stream_schema(spec):
    cols = ([(f"n{i}", Role.NUM) for i in range(spec.n_num)]
            + [(f"c{i}", Role.CAT) for i in range(spec.n_cat)]
            + [(f"m{i}", Role.MVC) for i in range(spec.n_mvc)]
            + [(f"t{i}", Role.TIME) for i in range(spec.n_time)])
    return FeatureSchema(tuple(cols), "label", "1")


def _concept(spec, rng):
    d = spec.latent_dim
    k = d if spec.n_informative is None else spec.n_informative
    w = np.zeros(d)
    informative = rng.permutation(d)[:k]
    # magnitudes bounded away from zero so every informative column matters
    w[informative] = rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.5, 1.0, size=k)
    w *= spec.signal / np.linalg.norm(w)
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    rotation = q * np.sign(np.diag(r))
    shift = rng.normal(size=d)
    shift *= 1.5 / np.linalg.norm(shift)
    return w, informative, rotation, shift


def _batch(spec, schema, rng, index, w, shift, token_perm, t_start):
    n = spec.rows_per_batch
    z = rng.normal(size=(n, spec.latent_dim))
    drifted = index >= spec.drift_at
    if drifted and spec.drift_kind == DriftKind.SHIFT:
        z = z + shift
    margin = z @ w
    labels = (rng.random(n) < 1.0 / (1.0 + np.exp(-margin))).astype(np.int8)

    cols, j = {}, 0
    for i in range(spec.n_num):
        v = np.round(z[:, j], 6)
        v[rng.random(n) < spec.missing_rate] = np.nan
        cols[f"n{i}"] = v
        j += 1
    for i in range(spec.n_cat):
        bins = np.searchsorted(CAT_EDGES, z[:, j])
        col = np.array([f"c{i}v{token_perm[b]}" for b in bins], dtype=object)
        col[rng.random(n) < spec.missing_rate] = None
        cols[f"c{i}"] = col
        j += 1
    for i in range(spec.n_mvc):
        bins = np.searchsorted(CAT_EDGES, z[:, j])
        extra = rng.integers(0, 3, size=n)
        noise = rng.integers(0, 20, size=(n, 2))
        cells = []
        for r in range(n):
            toks = [f"m{i}v{token_perm[bins[r]]}"] + [f"m{i}x{noise[r, k]}" for k in range(extra[r])]
            cells.append(",".join(toks))
        col = np.array(cells, dtype=object)
        col[rng.random(n) < spec.missing_rate] = None
        cols[f"m{i}"] = col
        j += 1
    t = t_start + np.cumsum(rng.integers(1, 30, size=n))
    for i in range(spec.n_time):
        cols[f"t{i}"] = t.astype(np.float64)
    return Batch(index, cols, labels), int(t[-1])


def generate_batches(spec):
    """Yield in-memory batches (1-based indices) without touching disk."""
    rng = np.random.default_rng(spec.seed)
    w, _, rotation, shift = _concept(spec, rng)
    token_perm = rng.permutation(len(CAT_EDGES) + 1)
    schema = stream_schema(spec)
    t = START_EPOCH
    for index in range(1, spec.batches + 1):
        w_now = w
        if index >= spec.drift_at:
            if spec.drift_kind == DriftKind.FLIP:
                w_now = -w
            elif spec.drift_kind == DriftKind.ROTATE:
                w_now = rotation @ w
        batch, t = _batch(spec, schema, rng, index, w_now, shift, token_perm, t)
        yield batch


def informative_columns(spec):
    """Column names whose latent dimension carries nonzero weight."""
    rng = np.random.default_rng(spec.seed)
    _, informative, _, _ = _concept(spec, rng)
    names = ([f"n{i}" for i in range(spec.n_num)] + [f"c{i}" for i in range(spec.n_cat)]
             + [f"m{i}" for i in range(spec.n_mvc)])
    return sorted(names[k] for k in informative)


def gen_stream(spec, out_dir):
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out_dir}: {exc}") from None
    if not os.access(out_dir, os.W_OK):
        raise DataError(f"output directory not writable: {out_dir}")
    schema = stream_schema(spec)
    width = len(str(spec.batches))
    paths = []
    for batch in generate_batches(spec):
        path = os.path.join(out_dir, f"batch_{batch.index:0{width}d}.tsv")
        write_batch(path, batch, schema)
        paths.append(os.path.abspath(path))
    manifest = DatasetManifest(schema, tuple(paths), float(spec.budget_seconds))
    write_manifest(os.path.join(out_dir, "manifest.txt"), manifest)
    return manifest
