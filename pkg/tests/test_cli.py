import json

import numpy as np

from sevpred.cli import main
from tests.conftest import strip_meta


def run(csv_workspace, *args):
    return main(["--config", str(csv_workspace / "config.json"), *args])


def run_cmd(csv_workspace, command, *args):
    return main([command, "--config", str(csv_workspace / "config.json"), *args])


def read_json(csv_workspace, name):
    with open(csv_workspace / "out" / name, encoding="utf-8") as fh:
        return json.load(fh)


class TestStats:
    def test_writes_summary(self, csv_workspace):
        assert run_cmd(csv_workspace, "stats") == 0
        stats = read_json(csv_workspace, "stats.json")
        assert stats["n_rows"] == 400
        assert "severity" in stats["columns"]
        assert "meta" in stats
        num = stats["columns"]["num_0"]
        assert {"kind", "missing_rate", "min", "median", "max"} <= set(num)


class TestAssociate:
    def test_matrix_csv_and_selection(self, csv_workspace):
        assert run_cmd(csv_workspace, "associate") == 0
        selection = read_json(csv_workspace, "selection.json")
        assert selection["threshold"] == 0.02
        assert [v for _, v in selection["ranked"]] == sorted(
            [v for _, v in selection["ranked"]], reverse=True
        )
        lines = (csv_workspace / "out" / "association_matrix.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[0] == ""
        assert len(lines) == len(header)  # header + one row per label


class TestPreprocessTrainChain:
    def test_full_chain_artifacts(self, csv_workspace):
        for cmd in ("associate", "preprocess", "train-ae", "encode", "train"):
            assert run_cmd(csv_workspace, cmd) == 0, cmd
        out = csv_workspace / "out"
        for name in ("features.fmx", "splits.json", "preprocessor.json", "targets.json",
                     "autoencoder.model", "ae_history.json", "latent.fmx",
                     "classifier.model", "history.json", "test_metrics.json"):
            assert (out / name).exists(), name

        from sevpred.preprocess import load_feature_matrix

        latent = load_feature_matrix(out / "latent.fmx")
        assert latent.d == 4  # configured latent width

    def test_preprocess_requires_selection(self, csv_workspace):
        assert run_cmd(csv_workspace, "preprocess") == 2

    def test_missing_data_path_is_config_error(self, csv_workspace, capsys):
        code = main([
            "stats", "--config", str(csv_workspace / "config.json"),
            "--set", "data.csv=does_not_exist.csv",
        ])
        assert code == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "ConfigError"

    def test_bad_threshold_rejected(self, csv_workspace):
        assert main([
            "associate", "--config", str(csv_workspace / "config.json"),
            "--set", "association.threshold=1.5",
        ]) == 1

    def test_unknown_command_usage_error(self, csv_workspace):
        assert main(["frobnicate"]) == 1


class TestGridCommand:
    def test_grid_report_rows(self, csv_workspace):
        for cmd in ("associate", "preprocess"):
            assert run_cmd(csv_workspace, cmd) == 0
        assert run_cmd(csv_workspace, "grid") == 0
        report = read_json(csv_workspace, "grid_report.json")
        assert report["n_cells"] == 2 == len(report["ranked"])
        csv_lines = (csv_workspace / "out" / "grid_report.csv").read_text().splitlines()
        assert len(csv_lines) == 3  # header + 2 cells


class TestCvCommand:
    def test_cv_report_shape(self, csv_workspace):
        for cmd in ("associate", "preprocess"):
            assert run_cmd(csv_workspace, cmd) == 0
        assert run_cmd(csv_workspace, "cv") == 0
        report = read_json(csv_workspace, "cv_report.json")
        assert len(report["folds"]) == 3
        assert {"mean_ber", "std_ber", "mean_accuracy", "std_accuracy"} <= set(report)


class TestPredict:
    def test_predictions_reproduce_test_confusion(self, csv_workspace):
        for cmd in ("associate", "preprocess", "train", "predict"):
            assert run_cmd(csv_workspace, cmd) == 0, cmd
        out = csv_workspace / "out"
        rows = (out / "predictions.csv").read_text().splitlines()[1:]
        preds = np.array([int(r.split(",")[1]) for r in rows])
        targets = read_json(csv_workspace, "targets.json")
        splits = read_json(csv_workspace, "splits.json")
        saved = read_json(csv_workspace, "test_metrics.json")["test"]["confusion"]
        labels = np.array(targets["labels"])
        test_idx = np.array(splits["test"])
        k = targets["target_cardinality"]
        cm = np.zeros((k, k), dtype=int)
        for t, p in zip(labels[test_idx], preds[test_idx]):
            cm[t - 1, p - 1] += 1
        assert cm.tolist() == saved

    def test_predict_without_target_column(self, csv_workspace, tmp_path):
        for cmd in ("associate", "preprocess", "train"):
            assert run_cmd(csv_workspace, cmd) == 0
        # strip the severity column from a copy of the data
        src = (csv_workspace / "data.csv").read_text().splitlines()
        header = src[0].split(",")
        keep = [i for i, name in enumerate(header) if name != "severity"]
        stripped = "\n".join(
            ",".join(line.split(",")[i] for i in keep) for line in src
        )
        unlabeled = tmp_path / "new_data.csv"
        unlabeled.write_text(stripped + "\n")
        code = run_cmd(csv_workspace, "predict", "--set", f"predict.input={unlabeled}")
        assert code == 0
        rows = (csv_workspace / "out" / "predictions.csv").read_text().splitlines()[1:]
        assert len(rows) == 400


class TestPipeline:
    def test_pipeline_and_idempotence(self, csv_workspace):
        assert run_cmd(csv_workspace, "pipeline") == 0
        report1 = strip_meta(read_json(csv_workspace, "pipeline_report.json"))
        cv1 = strip_meta(read_json(csv_workspace, "cv_report.json"))
        assert run_cmd(csv_workspace, "pipeline") == 0
        report2 = strip_meta(read_json(csv_workspace, "pipeline_report.json"))
        cv2 = strip_meta(read_json(csv_workspace, "cv_report.json"))
        assert report1 == report2
        assert cv1 == cv2
        models = [row["model"] for row in report1["comparison"]]
        assert models == ["encoder+dnn", "dnn"]

    def test_no_class_weights_flag(self, csv_workspace):
        for cmd in ("associate", "preprocess"):
            assert run_cmd(csv_workspace, cmd) == 0
        assert run_cmd(csv_workspace, "train", "--no-class-weights") == 0
        history = read_json(csv_workspace, "history.json")
        assert history["config"]["use_class_weights"] is False


class TestConfigPlumbing:
    def test_set_override_nested(self, csv_workspace):
        assert run_cmd(csv_workspace, "stats", "--set", "work_dir=" + str(csv_workspace / "alt")) == 0
        assert (csv_workspace / "alt" / "stats.json").exists()

    def test_seed_flag_changes_split(self, csv_workspace):
        run_cmd(csv_workspace, "associate")
        assert run_cmd(csv_workspace, "preprocess") == 0
        splits_a = read_json(csv_workspace, "splits.json")
        assert main([
            "preprocess", "--config", str(csv_workspace / "config.json"), "--seed", "99",
        ]) == 0
        splits_b = read_json(csv_workspace, "splits.json")
        assert splits_a["train"] != splits_b["train"]
