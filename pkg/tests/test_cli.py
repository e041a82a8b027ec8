import os

import numpy as np
import pytest

from driftboost import cli, persist
from driftboost.gbdt import TrainParams
from driftboost.metrics import auc
from driftboost.pipeline import RetrainPolicy, WindowConfig, init_state, process_batch
from driftboost.schema import load_batch, load_manifest

QUICK = ["--num-iterations-max", "30", "--max-depth", "4", "--pretrain-rounds", "10"]


@pytest.fixture(scope="module")
def stream(tmp_path_factory):
    out = tmp_path_factory.mktemp("stream")
    assert cli.main(["gen-drift", "--out-dir", str(out), "--rows", "800", "--seed", "42"]) == 0
    return out


def read_report(path):
    lines = open(path, encoding="utf-8").read().splitlines()
    header, body, avg = lines[0], lines[1:-1], lines[-1]
    return header, [line.split("\t") for line in body], avg


def test_gen_drift_default_layout(tmp_path):
    assert cli.main(["gen-drift", "--out-dir", str(tmp_path)]) == 0
    files = sorted(os.listdir(tmp_path))
    assert files == [f"batch_{i:02d}.tsv" for i in range(1, 11)] + ["manifest.txt"]
    assert len(open(tmp_path / "batch_01.tsv").read().splitlines()) == 5001


def test_gen_drift_deterministic(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["gen-drift", "--out-dir", str(tmp_path / d), "--batches", "2",
                         "--rows", "100", "--seed", "3"]) == 0
    for name in ("batch_1.tsv", "batch_2.tsv", "manifest.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_drift_bad_counts(tmp_path, capsys):
    assert cli.main(["gen-drift", "--out-dir", str(tmp_path), "--n-num", "-1"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_usage_error_from_argparse():
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate"])
    assert exc.value.code == 2


def test_simulate_report(stream, tmp_path):
    out = tmp_path / "report.tsv"
    assert cli.main(["simulate", "--manifest", str(stream / "manifest.txt"),
                     "--out", str(out), *QUICK]) == 0
    header, rows, avg = read_report(out)
    assert header == "batch\tauc\trows\tmode\tseconds"
    assert [r[0] for r in rows] == [str(i) for i in range(1, 11)]
    assert rows[0][1] == "NA"
    aucs = [float(r[1]) for r in rows[1:]]
    assert avg.startswith("average\t")
    assert float(avg.split("\t")[1]) == pytest.approx(np.mean(aucs), abs=1e-12)
    assert (tmp_path / "report.model").exists()


def test_simulate_missing_manifest(tmp_path, capsys):
    path = str(tmp_path / "missing.txt")
    assert cli.main(["simulate", "--manifest", path, "--out", str(tmp_path / "r.tsv")]) == 3
    assert path in capsys.readouterr().err


def test_simulate_bad_config(stream, tmp_path):
    assert cli.main(["simulate", "--manifest", str(stream / "manifest.txt"),
                     "--out", str(tmp_path / "r.tsv"), "--select-q", "0"]) == 2


def test_small_window_recovers_faster(tmp_path):
    # without a time column the large window cannot isolate the flipped batch
    assert cli.main(["gen-drift", "--out-dir", str(tmp_path), "--rows", "800",
                     "--n-time", "0", "--seed", "42"]) == 0
    common = ["--manifest", str(tmp_path / "manifest.txt"), "--seed", "1", *QUICK]
    assert cli.main(["simulate", *common, "--out", str(tmp_path / "k1.tsv"),
                     "--window", "1", "--full-retrain", "ALWAYS"]) == 0
    assert cli.main(["simulate", *common, "--out", str(tmp_path / "k99.tsv"),
                     "--window", "99"]) == 0
    batch7 = lambda p: float(read_report(p)[1][6][1])  # noqa: E731
    assert batch7(tmp_path / "k1.tsv") > batch7(tmp_path / "k99.tsv")


def test_report_reproducible(stream, tmp_path):
    args = ["simulate", "--manifest", str(stream / "manifest.txt"), "--seed", "5",
            "--full-retrain", "ALWAYS", *QUICK]
    assert cli.main([*args, "--out", str(tmp_path / "a.tsv")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "b.tsv")]) == 0
    strip = lambda p: [r[:4] for r in read_report(p)[1]] + [read_report(p)[2]]  # noqa: E731
    assert strip(tmp_path / "a.tsv") == strip(tmp_path / "b.tsv")
    assert (tmp_path / "a.model").read_bytes() == (tmp_path / "b.model").read_bytes()


def test_predict_round_trip(stream, tmp_path):
    assert cli.main(["simulate", "--manifest", str(stream / "manifest.txt"), "--out",
                     str(tmp_path / "r.tsv"), "--full-retrain", "ALWAYS", *QUICK]) == 0
    batch_path = str(stream / "batch_10.tsv")
    assert cli.main(["predict", "--model", str(tmp_path / "r.model"), "--batch", batch_path,
                     "--out", str(tmp_path / "p.txt")]) == 0
    from_cli = np.array([float(v) for v in open(tmp_path / "p.txt").read().split()])

    manifest = load_manifest(str(stream / "manifest.txt"))
    cfg = WindowConfig(full_retrain=RetrainPolicy.ALWAYS, pretrain_rounds=10)
    params = TrainParams(num_iterations_max=30, max_depth=4)
    state = init_state(manifest.schema, cfg, params, manifest.budget_seconds, 10)
    for i, p in enumerate(manifest.batch_paths, 1):
        process_batch(state, load_batch(p, manifest.schema, i))
    in_process = persist.predictor_from_state(state).predict(
        load_batch(batch_path, manifest.schema, 0))
    assert from_cli.shape == in_process.shape
    assert np.max(np.abs(from_cli - in_process)) <= 1e-12


def test_predict_empty_model(stream, tmp_path, capsys):
    empty = tmp_path / "empty.model"
    empty.write_text("")
    rc = cli.main(["predict", "--model", str(empty), "--batch", str(stream / "batch_01.tsv")])
    assert rc == 3 and "unreadable model" in capsys.readouterr().err


def test_predict_schema_mismatch(stream, tmp_path, capsys):
    assert cli.main(["simulate", "--manifest", str(stream / "manifest.txt"),
                     "--out", str(tmp_path / "r.tsv"), *QUICK]) == 0
    lines = open(stream / "batch_01.tsv").read().splitlines()
    extra = tmp_path / "extra.tsv"
    extra.write_text("\n".join([lines[0] + "\tbogus"] + [l + "\t1" for l in lines[1:]]) + "\n")
    rc = cli.main(["predict", "--model", str(tmp_path / "r.model"), "--batch", str(extra)])
    assert rc == 3 and "header mismatch" in capsys.readouterr().err


def test_internal_error_exit_code(monkeypatch, stream, tmp_path):
    def boom(args):
        raise RuntimeError("invariant broken")
    monkeypatch.setitem(cli.COMMANDS, "predict", boom)
    assert cli.main(["predict", "--model", "x", "--batch", "y"]) == 4
