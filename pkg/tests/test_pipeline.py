import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftboost.encode import transform_batch
from driftboost.errors import DataError
from driftboost.gbdt import TrainParams, predict_margin
from driftboost.metrics import auc
from driftboost.pipeline import (
    BudgetClock, LrSchedule, Mode, RetrainPolicy, WindowConfig, carry_margins, decide_mode,
    init_state, next_lr, process_batch, select_features, selection_count, update_window,
)
from driftboost.schema import Batch, fill_missing
from driftboost.synth import DriftSpec, generate_batches, informative_columns, stream_schema

SMALL = DriftSpec(batches=6, rows_per_batch=600, n_cat=2, n_num=3, n_mvc=1, n_time=1,
                  drift_at=7, seed=3)
FAST = TrainParams(num_iterations_max=20, early_stopping_rounds=5, max_depth=4)


class TestLrSchedule:
    def test_first_three(self):
        s = LrSchedule(p0=0.1)
        seen = []
        for _ in range(3):
            s = next_lr(s)
            seen.append(s.p)
        assert seen == [0.1 + 0.01, 0.1 + 0.01 + 0.02, 0.1 + 0.01 + 0.02 + 0.03]
        assert [round(p, 12) for p in seen] == [0.11, 0.13, 0.16]

    def test_zero_step(self):
        s = LrSchedule(p0=0.2, step_coeff=0.0)
        for _ in range(5):
            s = next_lr(s)
        assert s.p == 0.2

    def test_ten_updates(self):
        s = LrSchedule()
        for _ in range(10):
            s = next_lr(s)
        assert s.n == 10 and math.isclose(s.p, 0.65, rel_tol=0, abs_tol=1e-15)

    @given(st.floats(0.001, 1.0), st.one_of(st.just(0.0), st.floats(1e-6, 0.1)), st.integers(1, 60))
    def test_closed_form_and_monotone(self, p0, c, t):
        s = LrSchedule(p0=p0, step_coeff=c)
        prev = s.p
        for _ in range(t):
            s = next_lr(s)
            assert s.p >= prev if c == 0 else s.p > prev
            prev = s.p
        assert math.isclose(s.p, p0 + c * t * (t + 1) / 2, rel_tol=1e-12, abs_tol=1e-12)


def _labeled(index, n=4):
    return Batch(index, {"n0": np.zeros(n)}, np.array([0, 1] * (n // 2), dtype=np.int8))


class TestWindow:
    def _state(self, k):
        from driftboost.schema import FeatureSchema, Role
        schema = FeatureSchema((("n0", Role.NUM),), "label")
        return init_state(schema, WindowConfig(window_batches=k))

    def test_fifo_eviction(self):
        st_ = self._state(3)
        for i in (1, 2, 3, 4):
            update_window(st_, _labeled(i))
        assert [b.index for b in st_.window] == [2, 3, 4]
        assert st_.window_encoders is not None

    def test_no_eviction(self):
        st_ = self._state(3)
        update_window(st_, _labeled(1))
        update_window(st_, _labeled(2))
        assert [b.index for b in st_.window] == [1, 2]

    def test_out_of_order(self):
        st_ = self._state(3)
        update_window(st_, _labeled(3))
        with pytest.raises(DataError, match="arrives after"):
            update_window(st_, _labeled(2))

    @given(st.integers(1, 5), st.lists(st.integers(1, 3), min_size=1, max_size=12))
    def test_window_holds_highest_indices(self, k, gaps):
        st_ = self._state(k)
        seen, idx = [], 0
        for g in gaps:
            idx += g
            update_window(st_, _labeled(idx))
            seen.append(idx)
            assert len(st_.window) <= k
            assert [b.index for b in st_.window] == seen[-k:]


class TestSelectFeatures:
    def _matrix(self, seed, n_features=5, n=800):
        from driftboost.encode import FeatureMatrix
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, n_features))
        y = (x[:, 0] > 0).astype(int)
        return FeatureMatrix(x, [f"f{i}" for i in range(n_features)]), y

    @pytest.mark.parametrize("q,n_features,expected", [(0.3, 10, 3), (0.2, 5, 1), (0.7, 17, 12),
                                                        (1.0, 8, 8), (0.01, 4, 1)])
    def test_count(self, q, n_features, expected):
        assert selection_count(q, n_features) == expected

    def test_exact_count_mask(self):
        x, y = self._matrix(0, n_features=10)
        assert select_features(x, y, 0.3, FAST, 10).sum() == 3

    def test_identity_at_one(self):
        x, y = self._matrix(1)
        assert select_features(x, y, 1.0, FAST, 10).all()

    def test_signal_feature_selected(self):
        x, y = self._matrix(2)
        mask = select_features(x, y, 0.2, FAST, 10)
        assert mask.tolist() == [True, False, False, False, False]

    def test_zero_importance_fill_in_index_order(self):
        x, y = self._matrix(3, n_features=6)
        # only feature 0 carries signal; depth-1 stumps on a clean threshold never use the others
        mask = select_features(x, y, 0.5, TrainParams(max_depth=1), 3)
        assert mask.tolist() == [True, True, True, False, False, False]

    def test_single_class(self):
        x, _ = self._matrix(4)
        with pytest.raises(DataError, match="both classes"):
            select_features(x, np.zeros(x.row_count), 0.5)


class FakeTimer:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now


class TestDecideMode:
    def _clock(self, budget, consumed, left):
        c = BudgetClock(budget, left)
        c.consumed_seconds = consumed
        return c

    def test_full_when_affordable(self):
        assert decide_mode(self._clock(400, 100, 5), 20.0) == Mode.FULL

    def test_incremental_under_pressure(self):
        assert decide_mode(self._clock(400, 360, 5), 20.0) == Mode.INCREMENTAL

    def test_policies(self):
        c = self._clock(400, 0, 5)
        assert decide_mode(c, 20.0, RetrainPolicy.NEVER) == Mode.INCREMENTAL
        assert decide_mode(self._clock(400, 399, 5), 20.0, RetrainPolicy.ALWAYS) == Mode.FULL

    def test_first_batch_full(self):
        assert decide_mode(self._clock(1, 0.99, 5), None, RetrainPolicy.NEVER) == Mode.FULL

    @given(st.floats(1, 1e4), st.floats(0, 1), st.integers(1, 20), st.floats(0.001, 100),
           st.sampled_from(list(RetrainPolicy)))
    def test_pure(self, budget, frac, left, cost, policy):
        a = decide_mode(self._clock(budget, budget * frac, left), cost, policy)
        b = decide_mode(self._clock(budget, budget * frac, left), cost, policy)
        assert a == b


def _stream(spec=SMALL):
    return list(generate_batches(spec)), stream_schema(spec)


class TestProcessBatch:
    def test_cold_start(self):
        batches, schema = _stream()
        st_ = init_state(schema, WindowConfig(), FAST, n_batches=6)
        preds, st_ = process_batch(st_, batches[0])
        assert np.all(preds == 0.5)
        assert st_.model is not None and st_.last_step.mode == Mode.FULL
        assert st_.selected.sum() == selection_count(0.7, st_.selected.size)

    def test_unlabeled_batch_leaves_state_alone(self):
        batches, schema = _stream()
        st_ = init_state(schema, WindowConfig(), FAST, n_batches=6)
        process_batch(st_, batches[0])
        snapshot = (st_.model, st_.encoders, list(st_.window), st_.schedule, st_.selected)
        consumed = st_.clock.consumed_seconds
        unlabeled = Batch(2, batches[1].columns, None)
        preds, st_ = process_batch(st_, unlabeled)
        assert (st_.model, st_.encoders, st_.window, st_.schedule) == snapshot[:4]
        assert st_.selected is snapshot[4]
        assert st_.clock.consumed_seconds > consumed
        assert st_.last_step.mode == Mode.PREDICT
        assert preds.shape == (batches[1].row_count,) and not np.all(preds == 0.5)

    def test_lr_and_window_follow_stream(self):
        batches, schema = _stream()
        st_ = init_state(schema, WindowConfig(window_batches=2), FAST, n_batches=6)
        for b in batches[:4]:
            process_batch(st_, b)
        assert [b.index for b in st_.window] == [3, 4]
        assert math.isclose(st_.schedule.p, 0.1 + 0.01 * 10)
        assert math.isclose(st_.model.shrinkages[-1], 0.2)

    def test_lr_advances_on_skipped_batches(self):
        batches, schema = _stream()
        st_ = init_state(schema, WindowConfig(), FAST, budget_seconds=1e-9, n_batches=6)
        for b in batches[:3]:
            process_batch(st_, b)
            assert st_.last_step.mode == Mode.SKIPPED
        assert st_.schedule.n == 3 and math.isclose(st_.schedule.p, 0.16)

    def test_shrinkage_clamped_at_one(self):
        batches, schema = _stream()
        cfg = WindowConfig(p0=0.9, step_coeff=0.2)
        st_ = init_state(schema, cfg, FAST, n_batches=6)
        process_batch(st_, batches[0])
        assert st_.schedule.p > 1.0 and st_.model.shrinkages == [1.0] * len(st_.model.trees)

    def test_incremental_appends_from_carried_margins(self):
        batches, schema = _stream()
        cfg = WindowConfig(full_retrain=RetrainPolicy.NEVER)
        st_ = init_state(schema, cfg, FAST, n_batches=6)
        process_batch(st_, batches[0])
        first = st_.model
        process_batch(st_, batches[1])
        assert st_.last_step.mode == Mode.INCREMENTAL
        assert st_.model.trees[:len(first.trees)] == first.trees
        assert st_.encoders is not st_.window_encoders  # model keeps its own encoding

    def test_incremental_zero_trees_keeps_predictions(self):
        batches, schema = _stream()
        st_ = init_state(schema, WindowConfig(full_retrain=RetrainPolicy.NEVER), FAST,
                         n_batches=6)
        process_batch(st_, batches[0])
        before, _ = process_batch(st_, Batch(9, batches[2].columns, None))
        st_.params = TrainParams(min_split_gain=1e9)
        process_batch(st_, batches[1])
        assert st_.last_step.trees_added == 0
        after, _ = process_batch(st_, Batch(10, batches[2].columns, None))
        assert np.array_equal(before, after)

    def test_carry_margins_definitional(self):
        batches, schema = _stream()
        st_ = init_state(schema, WindowConfig(), FAST, n_batches=6)
        process_batch(st_, batches[0])
        filled = fill_missing(batches[1], schema, st_.stats)
        x = transform_batch(filled, st_.encoders, schema).select(st_.selected)
        assert np.array_equal(carry_margins(st_.model, x), predict_margin(st_.model, x))
        empty = type(st_.model)(st_.model.bin_mapper)
        assert np.all(carry_margins(empty, x) == 0.0)

    def test_replay_identical(self):
        batches, schema = _stream()
        runs = []
        for _ in range(2):
            st_ = init_state(schema, WindowConfig(window_batches=99,
                                                  full_retrain=RetrainPolicy.ALWAYS),
                             FAST, n_batches=6)
            runs.append([process_batch(st_, b)[0] for b in batches])
        for a, b in zip(*runs):
            assert np.array_equal(a, b)

    def test_exhausted_budget_still_predicts(self):
        batches, schema = _stream()
        timer = FakeTimer()
        st_ = init_state(schema, WindowConfig(), FAST, budget_seconds=10.0, n_batches=6,
                         timer=timer)
        process_batch(st_, batches[0])
        timer.now = 50.0  # consumed the whole budget elsewhere
        st_.clock.consumed_seconds = 11.0
        model = st_.model
        preds, st_ = process_batch(st_, batches[1])
        assert st_.last_step.mode == Mode.SKIPPED
        assert st_.model is model and preds.shape == (batches[1].row_count,)

    def test_selected_count_invariant(self):
        batches, schema = _stream()
        for q in (0.2, 0.5, 1.0):
            st_ = init_state(schema, WindowConfig(select_proportion=q), FAST, n_batches=6)
            for b in batches[:2]:
                process_batch(st_, b)
            assert st_.selected.sum() == selection_count(q, st_.selected.size)


def test_selection_finds_informative_pair():
    spec = DriftSpec(batches=1, rows_per_batch=2000, n_cat=0, n_num=20, n_mvc=0, n_time=0,
                     n_informative=2, drift_at=2, seed=1)
    batches, schema = _stream(spec)
    st_ = init_state(schema, WindowConfig(select_proportion=0.2), FAST, n_batches=1)
    process_batch(st_, batches[0])
    chosen = {n for n, keep in zip(st_.encoders.feature_names, st_.selected) if keep}
    assert set(informative_columns(spec)) <= chosen


def test_config_validation():
    with pytest.raises(ValueError):
        WindowConfig(window_batches=0)
    with pytest.raises(ValueError):
        WindowConfig(select_proportion=0.0)
    with pytest.raises(ValueError):
        WindowConfig(valid_fraction=1.0)
    with pytest.raises(ValueError):
        WindowConfig(full_retrain="SOMETIMES")
