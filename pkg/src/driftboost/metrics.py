"""ROC AUC via the Mann-Whitney rank statistic and per-batch reporting."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def midranks(values):
    """1-based ranks with ties sharing the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    n = len(values)
    # tie groups are runs of equal sorted values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], n]
    group_rank = (starts + 1 + ends) / 2.0
    ranks = np.empty(n)
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def auc(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: labels contain a single class")
    rank_sum = midranks(scores)[pos].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class BatchScore:
    index: int
    auc: float | None
    rows: int
    mode: str
    seconds: float


@dataclass
class BatchReport:
    batches: list = field(default_factory=list)
    average_auc: float = float("nan")

    def to_tsv(self, include_seconds=True):
        lines = ["batch\tauc\trows\tmode\tseconds"]
        for b in self.batches:
            a = "NA" if b.auc is None else repr(b.auc)
            s = f"{b.seconds:.6f}" if include_seconds else "-"
            lines.append(f"{b.index}\t{a}\t{b.rows}\t{b.mode}\t{s}")
        lines.append(f"average\t{self.average_auc!r}")
        return "\n".join(lines) + "\n"

    def write(self, path, include_seconds=True):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_tsv(include_seconds))


def batch_report(history):
    """Score a test-then-train history.

    ``history`` holds ``(batch_index, predictions, labels, mode, seconds)``
    tuples. Entries with ``predictions`` set to None are listed but not
    scored (no model existed yet). The average is unweighted over scored
    batches.
    """
    if not history:
        raise DataError("empty history: nothing to report")
    rows = []
    for index, preds, labels, mode, seconds in history:
        score = None
        if preds is not None:
            try:
                score = auc(preds, labels)
            except DataError as exc:
                raise DataError(f"batch {index}: {exc}") from None
        rows.append(BatchScore(int(index), score, len(labels), str(mode), float(seconds)))
    scored = [r.auc for r in rows if r.auc is not None]
    if not scored:
        raise DataError("no scored batches in history")
    return BatchReport(rows, float(np.mean(scored)))
