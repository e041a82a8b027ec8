"""Sliding-window lifelong learner: test-then-train over a batch stream.

Each labeled batch is first scored by the current model, then learned from.
Learning either retrains from scratch on the window (FULL) or appends trees
fitted on the newest batch from the current model's margins (INCREMENTAL).
The per-tree shrinkage grows with the batch ordinal so newer batches take
larger steps.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .encode import FeatureMatrix, fit_encoders, transform_batch
from .errors import DataError
from .gbdt import TrainParams, continue_training, predict_margin, predict_proba, train
from .schema import DEFAULT_ROW_CAP, compute_window_stats, fill_missing, subsample_rows

SAFETY_FACTOR = 1.5
_SUBSAMPLE_STREAM = 1


class Mode(str, Enum):
    FULL = "FULL"
    INCREMENTAL = "INCREMENTAL"
    SKIPPED = "SKIPPED"      # labeled batch, but the budget was spent
    PREDICT = "PREDICT"      # unlabeled batch, nothing to learn


class RetrainPolicy(str, Enum):
    ALWAYS = "ALWAYS"
    BUDGETED = "BUDGETED"
    NEVER = "NEVER"


@dataclass(frozen=True)
class LrSchedule:
    p0: float = 0.1
    step_coeff: float = 0.01
    p: float = None
    n: int = 0

    def __post_init__(self):
        if self.p is None:
            object.__setattr__(self, "p", self.p0)


def next_lr(schedule):
    n = schedule.n + 1
    return replace(schedule, n=n, p=schedule.p + schedule.step_coeff * n)


class BudgetClock:
    """Wall-clock budget shared by every batch of one stream."""

    def __init__(self, budget_seconds, batches_remaining, timer=time.perf_counter):
        if not budget_seconds > 0:
            raise ValueError("budget_seconds must be positive")
        self.budget_seconds = float(budget_seconds)
        self.consumed_seconds = 0.0
        self.batches_remaining = int(batches_remaining)
        self.max_round_seconds = 0.0
        self.round_seconds_total = 0.0
        self.overshoot_seconds = 0.0
        self._timer = timer
        self._t0 = None

    def begin(self):
        self._t0 = self._timer()

    def end(self):
        self.consumed_seconds = self.live()
        self._t0 = None

    def live(self):
        if self._t0 is None:
            return self.consumed_seconds
        return self.consumed_seconds + (self._timer() - self._t0)

    @property
    def remaining(self):
        return self.budget_seconds - self.live()

    def exhausted(self):
        return self.live() >= self.budget_seconds

    def note_learning_end(self):
        self.overshoot_seconds = max(self.overshoot_seconds, self.live() - self.budget_seconds)

    def round_guard(self, _round, seconds):
        """``on_round`` hook for training.

        Stops when another round as long as the last one would cross the
        budget, so learning overruns by at most one (longer than usual) round.
        """
        self.max_round_seconds = max(self.max_round_seconds, seconds)
        self.round_seconds_total += seconds
        return self.live() + seconds >= self.budget_seconds


@dataclass(frozen=True)
class WindowConfig:
    window_batches: int = 3
    select_proportion: float = 0.7
    pretrain_rounds: int = 30
    full_retrain: RetrainPolicy = RetrainPolicy.BUDGETED
    valid_fraction: float = 0.2
    row_cap: int = DEFAULT_ROW_CAP
    p0: float = 0.1
    step_coeff: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "full_retrain", RetrainPolicy(self.full_retrain))
        if self.window_batches < 1:
            raise ValueError("window_batches must be >= 1")
        if not 0.0 < self.select_proportion <= 1.0:
            raise ValueError("select_proportion must lie in (0, 1]")
        if self.pretrain_rounds < 1:
            raise ValueError("pretrain_rounds must be >= 1")
        if not 0.0 <= self.valid_fraction < 1.0:
            raise ValueError("valid_fraction must lie in [0, 1)")
        if self.row_cap < 1:
            raise ValueError("row_cap must be >= 1")
        if not self.p0 > 0 or self.step_coeff < 0:
            raise ValueError("p0 must be positive and step_coeff non-negative")


@dataclass
class StepInfo:
    index: int
    mode: Mode
    seconds: float
    trees_added: int = 0
    learning_rate: float = None


@dataclass
class PipelineState:
    schema: object
    config: WindowConfig
    params: TrainParams
    clock: BudgetClock
    schedule: LrSchedule = None
    window: list = field(default_factory=list)
    # preprocessing fitted on the current window (refit on every slide)
    window_stats: object = None
    window_encoders: object = None
    # preprocessing the current model was trained with
    stats: object = None
    encoders: object = None
    model: object = None
    selected: np.ndarray = None
    last_full_cost: float = None
    setup_cost: dict = field(default_factory=dict)
    n_threads: int = None
    last_step: StepInfo = None

    def __post_init__(self):
        if self.schedule is None:
            self.schedule = LrSchedule(self.config.p0, self.config.step_coeff)


def init_state(schema, config=None, params=None, budget_seconds=float("inf"),
               n_batches=1, n_threads=None, timer=time.perf_counter):
    config = config or WindowConfig()
    budget = budget_seconds if math.isfinite(budget_seconds) else 1e18
    return PipelineState(schema, config, params or TrainParams(),
                         BudgetClock(budget, n_batches, timer), n_threads=n_threads)


# --- operations -----------------------------------------------------------

def update_window(state, batch):
    if batch.labels is None:
        raise DataError("only labeled batches enter the window")
    if state.window and batch.index <= state.window[-1].index:
        raise DataError(f"batch {batch.index} arrives after batch {state.window[-1].index}")
    state.window.append(batch)
    while len(state.window) > state.config.window_batches:
        state.window.pop(0)
    state.window_stats = compute_window_stats(state.window, state.schema)
    filled = [fill_missing(b, state.schema, state.window_stats) for b in state.window]
    state.window_encoders = fit_encoders(filled, state.schema)
    return state


def selection_count(q, n_features):
    # round first so 0.3 * 10 does not ceil to 4
    return min(n_features, max(1, math.ceil(round(q * n_features, 9))))


def rank_features(importances):
    return sorted(range(len(importances)), key=lambda f: (-importances[f], f))


def select_features(matrix, labels, q, params=None, pretrain_rounds=30, n_threads=None,
                    on_round=None):
    """Mask of the top ceil(q * F) features by gain of a short pre-model."""
    labels = np.asarray(labels)
    if labels.size == 0 or labels.min() == labels.max():
        raise DataError("feature selection needs both classes in the window")
    n_features = matrix.values.shape[1]
    k = selection_count(q, n_features)
    mask = np.zeros(n_features, dtype=bool)
    if k == n_features:
        mask[:] = True
        return mask
    pre_params = replace(params or TrainParams(), num_iterations_max=pretrain_rounds,
                         early_stopping_rounds=0)
    pre = train(matrix, labels, None, pre_params, n_threads=n_threads, on_round=on_round)
    mask[rank_features(pre.importances)[:k]] = True
    return mask


def decide_mode(clock, last_full_cost, policy=RetrainPolicy.BUDGETED, safety_factor=SAFETY_FACTOR):
    if last_full_cost is None:
        return Mode.FULL
    policy = RetrainPolicy(policy)
    if policy == RetrainPolicy.ALWAYS:
        return Mode.FULL
    if policy == RetrainPolicy.NEVER:
        return Mode.INCREMENTAL
    per_batch = (clock.budget_seconds - clock.live()) / max(clock.batches_remaining, 1)
    return Mode.FULL if per_batch >= safety_factor * last_full_cost else Mode.INCREMENTAL


def carry_margins(model, matrix):
    return predict_margin(model, matrix)


def _encode(batches, schema, stats, encoders, mask=None):
    mats = [transform_batch(fill_missing(b, schema, stats), encoders, schema) for b in batches]
    values = np.vstack([m.values for m in mats]) if mats else np.empty((0, len(encoders.output_layout)))
    matrix = FeatureMatrix(values, encoders.feature_names)
    return matrix.select(mask) if mask is not None else matrix


def _split_newest(batch, valid_fraction):
    n_valid = int(math.floor(batch.row_count * valid_fraction))
    cut = batch.row_count - n_valid
    return batch.take(slice(0, cut)), batch.take(slice(cut, None))


def _valid_or_none(matrix, labels):
    if labels.size < 2 or labels.min() == labels.max():
        return None
    return matrix, labels


def predict_batch(state, batch):
    if state.model is None:
        return np.full(batch.row_count, 0.5)
    x = _encode([batch], state.schema, state.stats, state.encoders, state.selected)
    return predict_proba(state.model, x)


def _learn_full(state, lr):
    cfg, schema = state.config, state.schema
    *older, newest = state.window
    train_part, valid_part = _split_newest(newest, cfg.valid_fraction)
    sub_seed = int(np.random.SeedSequence([cfg.seed, _SUBSAMPLE_STREAM, newest.index])
                   .generate_state(1)[0])
    batches = subsample_rows(older + [train_part], cfg.row_cap, sub_seed)
    x = _encode(batches, schema, state.window_stats, state.window_encoders)
    y = np.concatenate([b.labels for b in batches])
    if y.size == 0 or y.min() == y.max():
        return None
    params = state.params.with_lr(lr)
    if state.clock.exhausted():
        return None
    mask = select_features(x, y, cfg.select_proportion, params, cfg.pretrain_rounds,
                           state.n_threads, state.clock.round_guard)
    if state.clock.exhausted():
        return None
    xv = _encode([valid_part], schema, state.window_stats, state.window_encoders, mask)
    model = train(x.select(mask), y, None, params, _valid_or_none(xv, valid_part.labels),
                  n_threads=state.n_threads, on_round=state.clock.round_guard)
    state.model, state.selected = model, mask
    state.stats, state.encoders = state.window_stats, state.window_encoders
    return len(model.trees)


def _learn_incremental(state, lr):
    train_part, valid_part = _split_newest(state.window[-1], state.config.valid_fraction)
    if train_part.row_count == 0:
        return 0
    enc = (state.schema, state.stats, state.encoders, state.selected)
    x = _encode([train_part], *enc)
    xv = _encode([valid_part], *enc)
    if state.clock.exhausted():
        return None
    before = len(state.model.trees)
    state.model = continue_training(
        state.model, x, train_part.labels, state.params.with_lr(lr),
        _valid_or_none(xv, valid_part.labels),
        n_threads=state.n_threads, on_round=state.clock.round_guard)
    return len(state.model.trees) - before


def process_batch(state, batch):
    """Predict ``batch``, then learn from it when it carries labels.

    Returns ``(probabilities, state)``; ``state.last_step`` records the mode.
    """
    clock = state.clock
    consumed_before = clock.consumed_seconds
    clock.begin()
    preds = predict_batch(state, batch)
    info = StepInfo(batch.index, Mode.PREDICT, 0.0)
    if batch.labels is not None:
        mode = decide_mode(clock, state.last_full_cost, state.config.full_retrain)
        # skip when the remaining budget cannot even cover the data preparation;
        # an unseen mode borrows the FULL estimate, which is the larger one
        setup = state.setup_cost.get(mode, state.setup_cost.get(Mode.FULL, 0.0))
        # the rate tracks the batch ordinal, so it advances even on skipped batches
        state.schedule = next_lr(state.schedule)
        if clock.exhausted() or clock.remaining <= setup:
            info.mode = Mode.SKIPPED
        else:
            t0 = time.perf_counter()
            rounds_before = clock.round_seconds_total
            update_window(state, batch)
            lr = min(state.schedule.p, 1.0)
            if mode == Mode.FULL:
                added = _learn_full(state, lr)
            else:
                added = _learn_incremental(state, lr)
            spent = time.perf_counter() - t0
            state.setup_cost[mode] = max(spent - (clock.round_seconds_total - rounds_before), 0.0)
            if added is None:
                mode, added = Mode.SKIPPED, 0
            elif mode == Mode.FULL:
                state.last_full_cost = spent
            info.mode, info.trees_added, info.learning_rate = mode, added, lr
            clock.note_learning_end()
    clock.batches_remaining = max(clock.batches_remaining - 1, 0)
    clock.end()
    info.seconds = clock.consumed_seconds - consumed_before
    state.last_step = info
    return preds, state
