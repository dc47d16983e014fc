import csv
import json

import numpy as np
import pytest

from scorecard.cli import (
    EXIT_INFEASIBLE,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    Metrics,
    RunConfig,
    cross_validate,
    main,
    regularization_path,
    stratified_folds,
    train,
)
from scorecard.data import save_csv
from scorecard.scoring import load_model, norms

from conftest import toy_dataset


def toy_csv(tmp_path, n=24, p=3, seed=3, separable=True):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, size=(n, p)).astype(float)
    if separable:
        rule = x[:, 0] + x[:, 1] if p > 1 else x[:, 0]
        y = np.where(rule >= 1, 1, -1)
    else:
        y = rng.choice([-1, 1], size=n)
    ds = toy_dataset(x, y)
    path = tmp_path / "toy.csv"
    save_csv(ds, path)
    return path, ds


class TestConfig:
    def test_from_file_and_overrides(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "dataset": "d.csv", "label_column": "y", "c0": 0.05,
            "lambda_max": 5, "folds": 4,
        }))
        config = RunConfig.from_file(cfg_path)
        assert config.lambda_max == 5
        assert config.folds == 4

    def test_unknown_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"dataset": "d.csv", "zap": 1}))
        with pytest.raises(Exception, match="zap"):
            RunConfig.from_file(cfg_path)

    def test_default_c0_list(self, tmp_path):
        path, ds = toy_csv(tmp_path)
        config = RunConfig(dataset=str(path), c0=["default"])
        vals = config.c0_list(ds)
        assert vals[:5] == [0.01, 0.075, 0.05, 0.025, 0.001]
        assert vals[5] == pytest.approx(0.9 / (ds.n * ds.p))


class TestFolds:
    def test_stratified_and_deterministic(self, tmp_path):
        _, ds = toy_csv(tmp_path, n=40)
        a = stratified_folds(ds, 5, seed=7)
        b = stratified_folds(ds, 5, seed=7)
        assert np.array_equal(a, b)
        for cls in (1, -1):
            counts = np.bincount(a[ds.labels == cls], minlength=5)
            assert counts.max() - counts.min() <= 1

    def test_seed_changes_assignment(self, tmp_path):
        _, ds = toy_csv(tmp_path, n=40)
        a = stratified_folds(ds, 5, seed=1)
        b = stratified_folds(ds, 5, seed=2)
        assert not np.array_equal(a, b)


class TestTrainAndCv:
    def test_train_perfect_toy(self, tmp_path):
        path, _ = toy_csv(tmp_path)
        config = RunConfig(dataset=str(path), c0=0.01, lambda_max=3,
                           intercept_max=5, time_limit=30.0)
        model, result, metrics = train(config)
        assert result.status == "optimal"
        assert metrics.train_error == 0.0
        assert norms(model)[0] <= 2

    def test_metrics_identity(self, tmp_path):
        path, ds = toy_csv(tmp_path, separable=False, n=18)
        config = RunConfig(dataset=str(path), c0=0.05, lambda_max=2,
                           intercept_max=3, time_limit=20.0)
        model, _, m = train(config)
        errors = round(m.train_error * ds.n)
        identity = ds.n_pos * (1 - m.tpr) + ds.n_neg * m.fpr
        assert round(identity) == errors

    def test_leave_one_out_cv_runs(self, tmp_path):
        path, _ = toy_csv(tmp_path, n=6, p=1)
        config = RunConfig(dataset=str(path), c0=0.1, lambda_max=2,
                           intercept_max=2, time_limit=10.0, folds=3, seed=1)
        metrics = cross_validate(config, k=3)
        assert len(metrics.folds) == 3
        agg = metrics.aggregate()
        assert 0.0 <= agg["test_error"]["mean"] <= 1.0

    def test_cv_deterministic(self, tmp_path):
        path, _ = toy_csv(tmp_path, n=20)
        config = RunConfig(dataset=str(path), c0=0.05, lambda_max=2,
                           intercept_max=3, time_limit=10.0, folds=4, seed=5)
        a = cross_validate(config)
        b = cross_validate(config)
        assert [f.test_error for f in a.folds] == [f.test_error for f in b.folds]

    def test_hard_fpr_cap_respected(self, tmp_path):
        path, ds = toy_csv(tmp_path, n=30, separable=False, seed=11)
        config = RunConfig(
            dataset=str(path), c0=0.01, lambda_max=3, intercept_max=5,
            time_limit=20.0, weights="max_sensitivity",
            constraints=[{"type": "max_fpr", "gamma_fpr": 0.25}],
        )
        model, result, metrics = train(config)
        assert metrics.fpr <= 0.25 + 1e-12

    def test_model_persist_round_trip(self, tmp_path):
        path, ds = toy_csv(tmp_path)
        out = tmp_path / "out"
        config = RunConfig(dataset=str(path), c0=0.01, lambda_max=3,
                           intercept_max=5, time_limit=20.0,
                           output_dir=str(out))
        model, result, _ = train(config)
        from scorecard.scoring import save_model
        save_model(model, out_path := tmp_path / "m.json")
        back = load_model(out_path)
        for i in range(ds.n):
            assert back.predict(ds.features[i]) == model.predict(ds.features[i])


class TestPath:
    def test_path_over_two_values(self, tmp_path):
        path, _ = toy_csv(tmp_path, n=16, p=2)
        config = RunConfig(dataset=str(path), c0=[0.05, 0.9],
                           lambda_max=2, intercept_max=3, time_limit=10.0,
                           folds=4, seed=0)
        rows = regularization_path(config)
        assert len(rows) == 2
        sizes = [norms(model)[0] for _, model, _, _ in rows if model]
        # model size is nonincreasing along increasing c0
        assert sizes == sorted(sizes, reverse=True)


class TestCliEntry:
    def test_train_command(self, tmp_path, capsys):
        path, _ = toy_csv(tmp_path)
        out = tmp_path / "run"
        rc = main([
            "train", "--dataset", str(path), "--c0", "0.01",
            "--lambda-max", "3", "--intercept-max", "5",
            "--time-limit", "20", "--output", str(out),
        ])
        assert rc == EXIT_OK
        assert (out / "model.json").exists()
        assert (out / "model.txt").exists()
        assert (out / "metrics.csv").exists()
        assert (out / "trace.tsv").exists()
        text = capsys.readouterr().out
        assert "PREDICT Y = +1 IF SCORE >" in text

    def test_missing_dataset_is_input_error(self, tmp_path, capsys):
        rc = main(["train", "--dataset", str(tmp_path / "nope.csv")])
        assert rc == EXIT_INPUT_ERROR

    def test_infeasible_exit_code(self, tmp_path, capsys):
        # identical rows with opposite labels + perfect-TPR + zero-FP budget
        ds = toy_dataset([[1.0], [1.0]], [1, -1])
        path = tmp_path / "clash.csv"
        save_csv(ds, path)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "dataset": str(path), "label_column": "y", "c0": 0.1,
            "lambda_max": 2, "intercept_max": 2, "time_limit": 10.0,
            "constraints": [
                {"type": "min_tpr", "min_tpr": 1.0},
                {"type": "max_fpr", "gamma_fpr": 0.5},
            ],
        }))
        rc = main(["train", "--config", str(cfg)])
        assert rc == EXIT_INFEASIBLE
        err = capsys.readouterr().err
        assert "bind" in err

    def test_reduce_command(self, tmp_path):
        path, _ = toy_csv(tmp_path)
        out = tmp_path / "red"
        rc = main([
            "reduce", "--dataset", str(path), "--c0", "0.05",
            "--lambda-max", "2", "--intercept-max", "3",
            "--epsilon", "zero-model", "--output", str(out),
        ])
        assert rc == EXIT_OK
        report = json.loads((out / "reduction.json").read_text())
        assert 0.0 <= report["removed_fraction"] <= 1.0
        assert (out / "reduced.csv").exists()

    def test_bounds_command(self, capsys):
        rc = main(["bounds", "--p", "2", "--lam-max", "3", "--n", "100"])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        lines = [l for l in out.splitlines() if l.strip()]
        assert lines[0].startswith("lambda")
        assert len(lines) == 4

    def test_render_command(self, tmp_path, capsys):
        from scorecard.scoring import ScoringSystem, save_model

        model = ScoringSystem(-1, (4, -6), ("age", "female"))
        save_model(model, tmp_path / "m.json")
        rc = main(["render", str(tmp_path / "m.json"), "--note", "RISK"])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("PREDICT RISK IF SCORE > 1")

    def test_path_command_writes_csv(self, tmp_path):
        path, _ = toy_csv(tmp_path, n=14, p=2)
        out = tmp_path / "p"
        rc = main([
            "path", "--dataset", str(path), "--c0", "0.05,0.9",
            "--lambda-max", "2", "--intercept-max", "3",
            "--time-limit", "10", "--folds", "3", "--output", str(out),
        ])
        assert rc == EXIT_OK
        with open(out / "path.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "c0"
        assert len(rows) == 3


class TestPipelineDetails:
    def test_missing_cells_raise_feature_penalty(self, tmp_path):
        from scorecard.cli import _build_instance

        path = tmp_path / "m.csv"
        path.write_text("y,a,b\n1,1,\n-1,0,1\n1,1,0\n-1,0,\n")
        config = RunConfig(dataset=str(path), c0=0.1, lambda_max=2,
                           intercept_max=2)
        from scorecard.data import load_csv

        ds = load_csv(path, "y")
        inst, _ = _build_instance(config, ds, 0.1)
        # feature b has 2 of 4 cells imputed: penalty 0.1 + 2/4
        assert inst.c0 == (pytest.approx(0.1), pytest.approx(0.6))

    def test_parallel_cv_matches_serial(self, tmp_path):
        path, _ = toy_csv(tmp_path, n=16, p=2)
        base = RunConfig(dataset=str(path), c0=0.05, lambda_max=2,
                         intercept_max=3, time_limit=10.0, folds=4, seed=2)
        serial = cross_validate(base)
        from dataclasses import replace

        parallel = cross_validate(replace(base, workers=2))
        assert [f.test_error for f in serial.folds] == \
            [f.test_error for f in parallel.folds]
        assert [f.model_size for f in serial.folds] == \
            [f.model_size for f in parallel.folds]


class TestMetricsCsv:
    def test_csv_layout(self, tmp_path):
        from scorecard.cli import FoldMetrics

        m = Metrics(folds=[
            FoldMetrics(0, 0.1, 0.2, 0.9, 0.1, 3, 0.0, 1.0, "optimal"),
            FoldMetrics(1, 0.12, 0.18, 0.88, 0.12, 3, 0.0, 1.1, "optimal"),
        ])
        out = tmp_path / "m.csv"
        m.to_csv(out)
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "fold"
        assert len(rows) == 1 + 2 + 4  # header + folds + aggregate rows
