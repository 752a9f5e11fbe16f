import csv
import json

import numpy as np
import pytest

from mlbatch import cli
from mlbatch.data import make_synthetic, write_csv
from mlbatch.experiment import (CURVES_HEADER, DENSITY_HEADER, METRICS_HEADER, SUMMARY_HEADER,
                                ExperimentConfig, compare, run_experiment, run_id)
from mlbatch.metrics import METRIC_NAMES, evaluate
from mlbatch.trainer import TrainConfig


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def dataset_csv(tmp_path_factory):
    ds = make_synthetic(n=200, d=6, q=4, rare_labels=1, rare_rate=0.05, seed=2)
    path = tmp_path_factory.mktemp("data") / "toy.csv"
    write_csv(ds, path)
    return path


@pytest.fixture(scope="module")
def toy_run(dataset_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = cli.main(["run", "--dataset", str(dataset_csv), "--labels", "4",
                     "--strategies", "random,adaptive", "--folds", "5", "--seeds", "1",
                     "--epochs", "4", "--warmup", "1", "--batch-size", "32",
                     "--density-epochs", "2", "--dump-scores", "--debug-batches",
                     "--out", str(out)])
    assert code == 0
    return out


def test_run_counts(toy_run):
    summary = read(toy_run / "summary.csv")
    assert summary[0] == SUMMARY_HEADER
    assert len(summary) - 1 == 10
    ids = {row[0] for row in summary[1:]}
    assert ids == {run_id(s, f, 1) for s in ("random", "adaptive") for f in range(5)}
    tests = [r for r in read(toy_run / "metrics.csv")[1:] if r[5] == "test"]
    assert len(tests) == 10


def test_headers_exact(toy_run):
    assert ",".join(read(toy_run / "curves.csv")[0]) == \
        "run_id,strategy,seed,fold,epoch,batch,wallclock_ms,train_loss"
    assert ",".join(read(toy_run / "metrics.csv")[0]) == \
        "run_id,strategy,seed,fold,epoch,split," \
        "macro_f,micro_f,macro_auc,ranking_loss,hamming_loss,one_error"
    assert ",".join(read(toy_run / "density.csv")[0]) == "run_id,epoch,bucket,sample_index,log_loss"
    assert read(toy_run / "curves.csv")[0] == CURVES_HEADER
    assert read(toy_run / "metrics.csv")[0] == METRICS_HEADER
    assert read(toy_run / "density.csv")[0] == DENSITY_HEADER


def test_curves_ordered(toy_run):
    rows = read(toy_run / "curves.csv")[1:]
    by_run = {}
    for r in rows:
        by_run.setdefault(r[0], []).append(r)
    assert len(by_run) == 10
    for run_rows in by_run.values():
        keys = [(int(r[4]), int(r[5])) for r in run_rows]
        assert keys == sorted(keys) and len(set(keys)) == len(keys)
        times = [float(r[6]) for r in run_rows]
        assert times == sorted(times)


def test_density_rows_cover_training_split(toy_run):
    rows = read(toy_run / "density.csv")[1:]
    run = run_id("adaptive", 0, 1)
    mine = [r for r in rows if r[0] == run]
    assert {r[1] for r in mine} == {"2"}
    assert {r[2] for r in mine} <= {"0", "1", "2", ">2"}
    indices = [int(r[3]) for r in mine]
    assert len(indices) == len(set(indices)) == 120  # 3 of 5 folds of 200


def test_summary_matches_score_dumps(toy_run):
    for row in read(toy_run / "summary.csv")[1:]:
        dump = np.load(toy_run / "scores" / f"{row[0]}.npz")
        report = evaluate(dump["scores"], dump["labels"], float(dump["threshold"]))
        for name, value in zip(METRIC_NAMES, row[6:]):
            assert abs(getattr(report, name) - float(value)) <= 1e-12


def test_debug_stream(toy_run):
    lines = (toy_run / "debug" / f"{run_id('adaptive', 0, 1)}.jsonl").read_text().splitlines()
    first = json.loads(lines[0])
    assert set(first) == {"run_id", "epoch", "batch", "indices", "p"}
    assert len(first["indices"]) == len(first["p"])


def test_config_written(toy_run):
    text = (toy_run / "config.txt").read_text()
    assert "strategies = random,adaptive" in text
    assert "epochs = 4" in text


def test_rerun_identical_except_wallclock(dataset_csv, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["run", "--dataset", str(dataset_csv), "--labels", "4",
                         "--strategies", "adaptive,adaptive-chain,hard", "--folds", "3",
                         "--seeds", "0,1", "--epochs", "3", "--warmup", "1",
                         "--batch-size", "32", "--out", str(out)]) == 0
        outs.append(out)
    for name in ("metrics.csv", "density.csv", "summary.csv", "epochs.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    strip = [[r[:6] + r[7:] for r in read(o / "curves.csv")] for o in outs]
    assert strip[0] == strip[1]


def test_parallel_matches_serial(dataset_csv, tmp_path):
    from mlbatch.data import load_csv
    ds = load_csv(dataset_csv, 4)
    base = dict(strategies=["random", "adaptive"], folds=3, seeds=[0, 1],
                train=TrainConfig(epochs=2, warmup=1, batch_size=32))
    run_experiment(ds, ExperimentConfig(threads=1, **base), tmp_path / "serial")
    run_experiment(ds, ExperimentConfig(threads=2, **base), tmp_path / "parallel")
    for name in ("metrics.csv", "summary.csv"):
        assert (tmp_path / "serial" / name).read_bytes() == \
            (tmp_path / "parallel" / name).read_bytes()


def test_missing_dataset_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["run", "--strategies", "random"])
    assert err.value.code == 2


def test_bad_flags_are_usage_errors(dataset_csv):
    for extra in (["--strategies", "nope"], ["--batch-size", "0"], ["--format", "xml"],
                  ["--folds", "2"]):
        with pytest.raises(SystemExit) as err:
            cli.main(["run", "--dataset", str(dataset_csv), "--labels", "4", *extra])
        assert err.value.code == 2


def test_bad_data_is_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,2\n")
    assert cli.main(["run", "--dataset", str(bad), "--labels", "1", "--out",
                     str(tmp_path / "o")]) == 1
    assert cli.main(["run", "--dataset", str(tmp_path / "absent.csv"), "--labels", "1",
                     "--out", str(tmp_path / "o")]) == 1


def test_config_file_with_cli_override(dataset_csv, tmp_path):
    conf = tmp_path / "exp.conf"
    conf.write_text(f"# toy\ndataset = {dataset_csv}\nlabels = 4\nstrategies = random\n"
                    "folds = 3\nepochs = 3\nwarmup = 1\nbatch_size = 64\n")
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(conf), "--epochs", "2", "--out", str(out)]) == 0
    rows = read(out / "metrics.csv")[1:]
    assert max(int(r[4]) for r in rows) == 2
    assert {r[1] for r in rows} == {"random"}


def _summary(path, strategies, values, dataset="d"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for s, vals in zip(strategies, values):
            for fold, v in enumerate(vals):
                w.writerow([run_id(s, fold, 0), dataset, s, 0, fold, 1] + [v] * 6)
    return path


def test_compare_identical_is_tie(tmp_path):
    vals = [0.5 + 0.01 * i for i in range(6)]
    path = _summary(tmp_path / "s.csv", ["random", "adaptive"], [vals, vals])
    rows = compare([path])
    assert [r.metric for r in rows] == list(METRIC_NAMES)
    assert all(r.verdict == "tie" and r.p_value == 1.0 for r in rows)


def test_compare_thirteen_wins(tmp_path):
    base = [0.5 + 0.01 * i for i in range(13)]
    better = [b + 0.001 * (i + 1) for i, b in enumerate(base)]
    a = _summary(tmp_path / "a.csv", ["random"], [base])
    b = _summary(tmp_path / "b.csv", ["adaptive"], [better])
    auc = compare([a, b], metric="macro_auc")[0]
    assert auc.verdict == "win"
    assert abs(auc.p_value - 0.000244) < 1e-6
    assert auc.label() == "win (0.0002)"
    # higher values are worse for the loss-type metrics
    assert compare([a, b], metric="hamming_loss")[0].verdict == "loss"


def test_compare_errors(tmp_path):
    a = _summary(tmp_path / "a.csv", ["random"], [[0.1, 0.2, 0.3]])
    with pytest.raises(ValueError):
        compare([a])
    with pytest.raises(ValueError):
        compare([a, tmp_path / "missing.csv"])
    b = _summary(tmp_path / "b.csv", ["adaptive"], [[0.1, 0.2]])
    with pytest.raises(ValueError):
        compare([a, b])
    assert cli.main(["compare", str(a)]) == 2


def test_compare_cli_output(tmp_path, capsys):
    vals = [0.5 + 0.01 * i for i in range(6)]
    path = _summary(tmp_path / "s.csv", ["random", "adaptive"], [vals, vals])
    assert cli.main(["compare", str(path), "--metric", "macro_f",
                     "--out", str(tmp_path / "cmp.csv")]) == 0
    assert "macro_f  tie (1.0000)" in capsys.readouterr().out
    assert read(tmp_path / "cmp.csv")[0] == ["metric", "verdict", "p_value", "statistic", "pairs"]


def test_stats_and_synth_commands(tmp_path, capsys):
    out = tmp_path / "syn.csv"
    assert cli.main(["synth", "--out", str(out), "--n", "120", "--d", "5", "--q", "4"]) == 0
    assert cli.main(["stats", "--dataset", str(out), "--labels", "4",
                     "--dump", str(tmp_path / "dump")]) == 0
    text = capsys.readouterr().out
    assert "n=120 d=5 q=4" in text
    assert (tmp_path / "dump" / "weights.csv").exists()
