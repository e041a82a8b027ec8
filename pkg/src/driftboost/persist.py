"""Model files: a version line followed by a JSON body.

JSON floats are written with ``repr`` so every value round-trips exactly.
A file holds a bare GBDT or, for stream runs, the GBDT plus everything needed
to turn a raw batch into its input (schema, fill values, encoders, mask).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .encode import EncoderState, output_layout, transform_batch
from .errors import DataError, ModelFileError
from .gbdt import BinMapper, GbdtModel, TrainParams, Tree, predict_proba
from .schema import FeatureSchema, WindowStats, fill_missing, load_batch

MAGIC = "driftboost-model"
VERSION = 1


@dataclass
class Predictor:
    schema: FeatureSchema
    stats: WindowStats
    encoders: EncoderState
    selected: np.ndarray
    model: GbdtModel

    def predict(self, batch):
        filled = fill_missing(batch, self.schema, self.stats)
        x = transform_batch(filled, self.encoders, self.schema).select(self.selected)
        return predict_proba(self.model, x)

    def predict_file(self, path):
        return self.predict(load_batch(path, self.schema, 0))


def _tree_dict(tree, shrinkage):
    return {
        "shrinkage": float(shrinkage),
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
        "gain": tree.gain.tolist(),
    }


def model_to_dict(model):
    return {
        "params": asdict(model.params) if model.params is not None else None,
        "feature_names": list(model.feature_names),
        "bin_edges": [e.tolist() for e in model.bin_mapper.edges],
        "trees": [_tree_dict(t, s) for t, s in zip(model.trees, model.shrinkages)],
        "importances": model.importances.tolist(),
        "best_iteration": model.best_iteration,
    }


def model_from_dict(d):
    mapper = BinMapper([np.array(e, dtype=np.float64) for e in d["bin_edges"]])
    trees, shrink = [], []
    for t in d["trees"]:
        i32 = np.int32
        trees.append(Tree(np.array(t["feature"], i32), np.array(t["threshold"], i32),
                          np.array(t["left"], i32), np.array(t["right"], i32),
                          np.array(t["value"], np.float64), np.array(t["gain"], np.float64)))
        shrink.append(float(t["shrinkage"]))
    params = TrainParams(**d["params"]) if d.get("params") else None
    return GbdtModel(mapper, trees, shrink, np.array(d["importances"], np.float64),
                     list(d["feature_names"]), params, d.get("best_iteration"))


def _preprocess_dict(predictor):
    s = predictor.schema
    e = predictor.encoders
    return {
        "schema": {
            "columns": [[n, r.value] for n, r in s.columns],
            "label": s.label,
            "positive_label": s.positive_label,
        },
        "fill": {"medians": predictor.stats.medians, "time_min": predictor.stats.time_min},
        "encoders": {
            "ordinal_maps": e.ordinal_maps,
            "freq_tables": e.freq_tables,
            "mvc_freq": e.mvc_freq,
        },
        "selected": [bool(b) for b in predictor.selected],
    }


def _predictor_from(pre, model):
    sc = pre["schema"]
    schema = FeatureSchema(tuple((n, r) for n, r in sc["columns"]), sc["label"],
                           sc["positive_label"])
    stats = WindowStats(dict(pre["fill"]["medians"]), dict(pre["fill"]["time_min"]))
    enc = pre["encoders"]
    encoders = EncoderState(enc["ordinal_maps"], enc["freq_tables"], enc["mvc_freq"],
                            output_layout(schema))
    return Predictor(schema, stats, encoders, np.array(pre["selected"], dtype=bool), model)


def dumps(obj):
    """Serialize a ``GbdtModel`` or a ``Predictor``."""
    if isinstance(obj, Predictor):
        body = {"kind": "pipeline", "model": model_to_dict(obj.model),
                "preprocess": _preprocess_dict(obj)}
    else:
        body = {"kind": "gbdt", "model": model_to_dict(obj)}
    return f"{MAGIC} v{VERSION}\n" + json.dumps(body, indent=1, allow_nan=False) + "\n"


def loads(text):
    head, _, body = text.partition("\n")
    if not head.startswith(MAGIC):
        raise ModelFileError("unreadable model: missing header")
    if head.strip() != f"{MAGIC} v{VERSION}":
        raise ModelFileError(f"unsupported model version {head.strip()!r}")
    try:
        d = json.loads(body)
        model = model_from_dict(d["model"])
        if d.get("kind") == "pipeline":
            return _predictor_from(d["preprocess"], model)
        return model
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFileError(f"unreadable model: {exc}") from None


def save(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from None
    return loads(text)


def predictor_from_state(state):
    if state.model is None:
        raise DataError("no model has been trained yet")
    return Predictor(state.schema, state.stats, state.encoders, state.selected, state.model)
