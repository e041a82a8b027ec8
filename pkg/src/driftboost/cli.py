"""Command-line entry points: ``simulate``, ``gen-drift`` and ``predict``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import persist
from .errors import DataError
from .gbdt import TrainParams
from .metrics import batch_report
from .pipeline import RetrainPolicy, WindowConfig, init_state, process_batch
from .schema import DEFAULT_ROW_CAP, load_batch, load_manifest
from .synth import DriftKind, DriftSpec, gen_stream

log = logging.getLogger("driftboost")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _add_train_flags(p):
    d = TrainParams()
    g = p.add_argument_group("boosting")
    g.add_argument("--num-iterations-max", type=int, default=d.num_iterations_max)
    g.add_argument("--early-stopping-rounds", type=int, default=d.early_stopping_rounds)
    g.add_argument("--reg-alpha", type=float, default=d.reg_alpha)
    g.add_argument("--reg-lambda", type=float, default=d.reg_lambda)
    g.add_argument("--min-split-gain", type=float, default=d.min_split_gain)
    g.add_argument("--max-depth", type=int, default=d.max_depth)
    g.add_argument("--min-child-hessian", type=float, default=d.min_child_hessian)
    g.add_argument("--max-bins", type=int, default=d.max_bins)


def build_parser():
    parser = argparse.ArgumentParser(prog="driftboost", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a manifest through test-then-train")
    sim.add_argument("--manifest", required=True)
    sim.add_argument("--out", required=True, help="report TSV path")
    sim.add_argument("--model-out", help="model file (default: report path with .model)")
    w = WindowConfig()
    sim.add_argument("--window", type=int, default=w.window_batches)
    sim.add_argument("--select-q", type=float, default=w.select_proportion)
    sim.add_argument("--pretrain-rounds", type=int, default=w.pretrain_rounds)
    sim.add_argument("--p0", type=float, default=w.p0)
    sim.add_argument("--step-coeff", type=float, default=w.step_coeff)
    sim.add_argument("--full-retrain", choices=[p.value for p in RetrainPolicy],
                     default=w.full_retrain.value)
    sim.add_argument("--valid-fraction", type=float, default=w.valid_fraction)
    sim.add_argument("--row-cap", type=int, default=DEFAULT_ROW_CAP)
    sim.add_argument("--budget", type=float, help="override the manifest budget (seconds)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--threads", type=int, default=None)
    _add_train_flags(sim)

    gen = sub.add_parser("gen-drift", help="write a synthetic drifting stream")
    s = DriftSpec()
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--batches", type=int, default=s.batches)
    gen.add_argument("--rows", type=int, default=s.rows_per_batch)
    gen.add_argument("--n-cat", type=int, default=s.n_cat)
    gen.add_argument("--n-num", type=int, default=s.n_num)
    gen.add_argument("--n-mvc", type=int, default=s.n_mvc)
    gen.add_argument("--n-time", type=int, default=s.n_time)
    gen.add_argument("--informative", type=int, default=None)
    gen.add_argument("--drift-at", type=int, default=s.drift_at)
    gen.add_argument("--drift-kind", choices=[k.value for k in DriftKind], default=s.drift_kind.value)
    gen.add_argument("--signal", type=float, default=s.signal)
    gen.add_argument("--budget", type=float, default=s.budget_seconds)
    gen.add_argument("--seed", type=int, default=s.seed)

    pred = sub.add_parser("predict", help="score a batch file with a saved model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--batch", required=True)
    pred.add_argument("--out", help="output path (default: stdout)")
    return parser


def _train_params(args):
    return TrainParams(
        num_iterations_max=args.num_iterations_max,
        early_stopping_rounds=args.early_stopping_rounds,
        reg_alpha=args.reg_alpha, reg_lambda=args.reg_lambda,
        min_split_gain=args.min_split_gain, max_depth=args.max_depth,
        min_child_hessian=args.min_child_hessian, max_bins=args.max_bins, seed=args.seed,
    )


def cmd_simulate(args):
    try:
        params = _train_params(args)
        config = WindowConfig(
            window_batches=args.window, select_proportion=args.select_q,
            pretrain_rounds=args.pretrain_rounds, full_retrain=args.full_retrain,
            valid_fraction=args.valid_fraction, row_cap=args.row_cap,
            p0=args.p0, step_coeff=args.step_coeff, seed=args.seed)
        if args.budget is not None and not args.budget > 0:
            raise ValueError("--budget must be positive")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    manifest = load_manifest(args.manifest)
    budget = args.budget if args.budget is not None else manifest.budget_seconds
    state = init_state(manifest.schema, config, params, budget,
                       n_batches=len(manifest.batch_paths), n_threads=args.threads)
    history = []
    for index, path in enumerate(manifest.batch_paths, 1):
        batch = load_batch(path, manifest.schema, index)
        had_model = state.model is not None
        preds, state = process_batch(state, batch)
        step = state.last_step
        log.info("batch %d: %s, %d trees added, %.2fs", index, step.mode.value,
                 step.trees_added, step.seconds)
        if batch.labels is not None:
            history.append((index, preds if had_model else None, batch.labels,
                            step.mode.value, step.seconds))
    report = batch_report(history)
    report.write(args.out)
    model_out = args.model_out or os.path.splitext(args.out)[0] + ".model"
    if state.model is not None:
        persist.save(model_out, persist.predictor_from_state(state))
    print(f"average AUC {report.average_auc:.4f} over "
          f"{sum(b.auc is not None for b in report.batches)} scored batches; "
          f"{state.clock.consumed_seconds:.1f}s of {budget:.1f}s budget")
    return EXIT_OK


def cmd_gen_drift(args):
    try:
        spec = DriftSpec(
            batches=args.batches, rows_per_batch=args.rows, n_cat=args.n_cat,
            n_num=args.n_num, n_mvc=args.n_mvc, n_time=args.n_time,
            drift_at=args.drift_at, drift_kind=args.drift_kind, seed=args.seed,
            n_informative=args.informative, signal=args.signal, budget_seconds=args.budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    manifest = gen_stream(spec, args.out_dir)
    print(os.path.join(args.out_dir, "manifest.txt"))
    log.info("wrote %d batches", len(manifest.batch_paths))
    return EXIT_OK


def cmd_predict(args):
    predictor = persist.load(args.model)
    if not isinstance(predictor, persist.Predictor):
        raise DataError(f"{args.model} holds a bare model without preprocessing")
    probs = predictor.predict_file(args.batch)
    text = "".join(f"{p!r}\n" for p in probs.tolist())
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "gen-drift": cmd_gen_drift, "predict": cmd_predict}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"driftboost: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"driftboost: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"driftboost: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
