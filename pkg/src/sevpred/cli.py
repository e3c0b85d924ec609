"""Command-line pipeline driver.

Stages exchange artifacts through files in the work directory, so the
workflow the evaluation harness implies (tune, cross-validate, ablate class
weights) can re-run any stage independently. All randomness flows from one
master seed via labeled derivation, making every report a deterministic
function of the config; wall-clock metadata lives under a separate "meta"
key so reports stay byte-comparable.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv as csv_module
import datetime
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .association import association_matrix, select_features
from .dataset import ColumnKind, Table, impute, ingest_csv, load_schema, summarize
from .errors import DataError, NumericError, PipelineError
from .evaluation import GridSpec, cross_validate, evaluate_predictions, grid_search
from .models import (
    AutoencoderConfig,
    ClassifierConfig,
    ClassWeights,
    build_autoencoder,
    build_classifier,
    compute_class_weights,
    encode,
    predict,
    train_autoencoder,
    train_classifier,
)
from .neural import load_model, save_model
from .preprocess import (
    FeatureMatrix,
    assemble,
    fit_one_hot,
    fit_standardizer,
    load_feature_matrix,
    load_preprocessor,
    load_splits,
    save_feature_matrix,
    save_preprocessor,
    save_splits,
    stratified_split,
)
from .rng import derive_seed

DEFAULTS: dict = {
    "data": {"csv": None, "schema": None},
    "work_dir": "sevpred_out",
    "seed": 7,
    "jobs": 1,
    "association": {"n_bins": 10, "threshold": 0.2, "bias_corrected": False},
    "split": {"ratios": [0.6, 0.2, 0.2]},
    "autoencoder": {
        "encoder_widths": [512, 256],
        "epochs": 200,
        "batch_size": 1000,
        "learning_rate": 0.001,
    },
    "classifier": {
        "initial_neurons": 1218,
        "initial_dropout": 0.3,
        "batch_size": 5000,
        "l2_penalty": 0.0001,
        "epochs": 50,
        "learning_rate": 0.001,
        "use_class_weights": True,
    },
    "train": {"use_encoder": False},
    "grid": {
        "initial_neurons": [1218, 2436, 3654],
        "initial_dropout": [0.2, 0.3, 0.4],
        "batch_size": [2000, 5000, 10000],
        "l2_penalty": [0.001, 0.0001],
    },
    "cv": {"folds": 10, "use_encoder": False},
    "predict": {"input": None, "model": None, "use_encoder": False},
}


class ConfigError(PipelineError):
    """Bad configuration or usage; maps to exit code 1."""


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class PipelineConfig:
    """Merged configuration: defaults <- config file <- --set <- flags."""

    settings: dict

    def __getitem__(self, key: str):
        return self.settings[key]

    def validate(self) -> None:
        threshold = self["association"]["threshold"]
        if not (0.0 <= threshold <= 1.0):
            raise ConfigError(f"association.threshold must be in [0, 1], got {threshold}")
        ratios = self["split"]["ratios"]
        if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split.ratios must be three positive values summing to 1, got {ratios}")
        if self["cv"]["folds"] < 2:
            raise ConfigError("cv.folds must be at least 2")

    def data_paths(self) -> tuple[Path, Path]:
        csv_path, schema_path = self["data"]["csv"], self["data"]["schema"]
        if not csv_path or not schema_path:
            raise ConfigError("data.csv and data.schema must be set")
        csv_path, schema_path = Path(csv_path), Path(schema_path)
        for p in (csv_path, schema_path):
            if not p.exists():
                raise ConfigError(f"input path does not exist: {p}")
        return csv_path, schema_path

    def work_dir(self) -> Path:
        path = Path(self["work_dir"])
        path.mkdir(parents=True, exist_ok=True)
        return path

    def seed(self) -> int:
        return int(self["seed"])


def _parse_set(expr: str) -> tuple[list[str], object]:
    if "=" not in expr:
        raise ConfigError(f"--set expects key=value, got {expr!r}")
    key, raw = expr.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def build_config(args: argparse.Namespace) -> PipelineConfig:
    settings = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from None
        settings = _deep_merge(settings, file_cfg)
    for expr in args.set or []:
        keys, value = _parse_set(expr)
        node = settings
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {'.'.join(keys)} crosses a non-object key")
        node[keys[-1]] = value
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.jobs is not None:
        settings["jobs"] = args.jobs
    if args.work_dir is not None:
        settings["work_dir"] = args.work_dir
    if args.no_class_weights:
        settings = _deep_merge(settings, {"classifier": {"use_class_weights": False}})
    config = PipelineConfig(settings)
    config.validate()
    return config


# -- artifact writing -----------------------------------------------------------

def _meta(stage: str) -> dict:
    return {
        "stage": stage,
        "tool_version": __version__,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _write_csv_rows(path: Path, header: list[str], rows: list[list]) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv_module.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _load_table(config: PipelineConfig, *, imputed: bool = True) -> Table:
    csv_path, schema_path = config.data_paths()
    table = ingest_csv(csv_path, load_schema(schema_path))
    return impute(table) if imputed else table


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise DataError(f"missing artifact {path.name}; run `{hint}` first")
    return path


# -- stages ---------------------------------------------------------------------

def stage_stats(config: PipelineConfig) -> dict:
    table = _load_table(config, imputed=False)
    payload = summarize(table)
    payload["meta"] = _meta("stats")
    _write_json(config.work_dir() / "stats.json", payload)
    return payload


def stage_associate(config: PipelineConfig) -> dict:
    table = _load_table(config)
    assoc_cfg = config["association"]
    matrix = association_matrix(
        table, n_bins=assoc_cfg["n_bins"], bias_corrected=assoc_cfg["bias_corrected"]
    )
    rows = [
        [label, *[repr(float(v)) for v in matrix.values[i]]]
        for i, label in enumerate(matrix.labels)
    ]
    work = config.work_dir()
    _write_csv_rows(work / "association_matrix.csv", ["", *matrix.labels], rows)
    report = select_features(
        table, assoc_cfg["threshold"], n_bins=assoc_cfg["n_bins"],
        bias_corrected=assoc_cfg["bias_corrected"],
    )
    payload = {
        "threshold": report.threshold,
        "ranked": [[name, v] for name, v in report.ranked],
        "selected": list(report.selected),
        "meta": _meta("associate"),
    }
    _write_json(work / "selection.json", payload)
    return payload


def stage_preprocess(config: PipelineConfig) -> dict:
    table = _load_table(config)
    work = config.work_dir()
    with open(_require(work / "selection.json", "sevpred associate"), encoding="utf-8") as fh:
        selected = json.load(fh)["selected"]
    if not selected:
        raise DataError("feature selection is empty; lower association.threshold")

    splits = stratified_split(
        table.target, tuple(config["split"]["ratios"]), seed=derive_seed(config.seed(), "split")
    )
    categorical = [
        n for n in selected
        if table.schema.kind_of(n) in (ColumnKind.CATEGORICAL, ColumnKind.BOOLEAN)
    ]
    numeric = [n for n in selected if table.schema.kind_of(n) == ColumnKind.NUMERIC]
    codec = fit_one_hot(table, categorical, rows=splits.train)
    standardizer = fit_standardizer(table, numeric, rows=splits.train)
    column_order = [n for n in table.schema.names if n in set(selected)]
    features = assemble(table, codec, standardizer, column_order)

    save_feature_matrix(work / "features.fmx", features)
    save_splits(work / "splits.json", splits)
    save_preprocessor(work / "preprocessor.json", codec, standardizer, column_order)
    payload = {
        "n_rows": table.n_rows,
        "n_dropped_missing_target": table.n_dropped,
        "width": features.d,
        "selected": list(selected),
        "split_sizes": {k: int(len(v)) for k, v in splits.parts().items()},
        "labels": table.target.tolist(),
        "target_cardinality": table.schema.target_cardinality,
        "meta": _meta("preprocess"),
    }
    _write_json(work / "targets.json", payload)
    return payload


def _load_features(config: PipelineConfig, *, encoded: bool) -> tuple[FeatureMatrix, np.ndarray, int]:
    work = config.work_dir()
    name = "latent.fmx" if encoded else "features.fmx"
    hint = "sevpred encode" if encoded else "sevpred preprocess"
    features = load_feature_matrix(_require(work / name, hint))
    with open(_require(work / "targets.json", "sevpred preprocess"), encoding="utf-8") as fh:
        targets = json.load(fh)
    labels = np.asarray(targets["labels"], dtype=np.int64)
    if len(labels) != features.n:
        raise DataError("targets.json row count does not match the feature matrix")
    return features, labels, int(targets["target_cardinality"])


def stage_train_ae(config: PipelineConfig) -> dict:
    work = config.work_dir()
    features, _, _ = _load_features(config, encoded=False)
    splits = load_splits(_require(work / "splits.json", "sevpred preprocess"))
    ae_cfg = config["autoencoder"]
    cfg = AutoencoderConfig(
        input_dim=features.d,
        encoder_widths=tuple(ae_cfg["encoder_widths"]),
        epochs=ae_cfg["epochs"],
        batch_size=ae_cfg["batch_size"],
        learning_rate=ae_cfg["learning_rate"],
        seed=derive_seed(config.seed(), "train-ae"),
    )
    params, history = train_autoencoder(
        cfg,
        FeatureMatrix(features.values[splits.train], features.column_labels),
        FeatureMatrix(features.values[splits.val], features.column_labels),
    )
    spec = build_autoencoder(cfg)
    meta = {"kind": "autoencoder", "config": dict(ae_cfg), "seed": cfg.seed, "latent_dim": cfg.latent_dim}
    save_model(work / "autoencoder.model", spec, params, meta)
    payload = {"history": history, "config": dict(ae_cfg), "seed": cfg.seed, "meta": _meta("train-ae")}
    _write_json(work / "ae_history.json", payload)
    return payload


def stage_encode(config: PipelineConfig) -> dict:
    work = config.work_dir()
    features, _, _ = _load_features(config, encoded=False)
    spec, params, _ = load_model(_require(work / "autoencoder.model", "sevpred train-ae"))
    latent = encode(spec, params, features)
    save_feature_matrix(work / "latent.fmx", latent)
    return {"n": latent.n, "latent_dim": latent.d, "meta": _meta("encode")}


def _classifier_config(config: PipelineConfig, seed_label: str) -> ClassifierConfig:
    c = config["classifier"]
    return ClassifierConfig(
        initial_neurons=c["initial_neurons"],
        initial_dropout=c["initial_dropout"],
        batch_size=c["batch_size"],
        l2_penalty=c["l2_penalty"],
        epochs=c["epochs"],
        learning_rate=c["learning_rate"],
        use_class_weights=c["use_class_weights"],
        seed=derive_seed(config.seed(), seed_label),
    )


def _maybe_weights(config: PipelineConfig, labels: np.ndarray, k: int) -> ClassWeights | None:
    if not config["classifier"]["use_class_weights"]:
        return None
    return compute_class_weights(labels, k)


def stage_train(config: PipelineConfig) -> dict:
    work = config.work_dir()
    encoded = bool(config["train"]["use_encoder"])
    suffix = "_encoded" if encoded else ""
    features, labels, k = _load_features(config, encoded=encoded)
    splits = load_splits(_require(work / "splits.json", "sevpred preprocess"))

    cfg = _classifier_config(config, f"train{suffix}")
    weights = _maybe_weights(config, labels[splits.train], k)
    params, history = train_classifier(
        cfg,
        features.values[splits.train], labels[splits.train],
        features.values[splits.val], labels[splits.val],
        class_weights=weights, n_classes=k,
    )
    spec = build_classifier(cfg, features.d, k)
    meta = {
        "kind": "classifier",
        "encoded_input": encoded,
        "config": dict(config["classifier"]),
        "seed": cfg.seed,
        "class_weights": None if weights is None else weights.w.tolist(),
    }
    save_model(work / f"classifier{suffix}.model", spec, params, meta)

    preds = predict(params, spec, features.values[splits.test])
    report = evaluate_predictions(preds, labels[splits.test], k)
    _write_json(work / f"history{suffix}.json", {
        "history": history, "config": dict(config["classifier"]),
        "seed": cfg.seed, "meta": _meta("train"),
    })
    payload = {"test": report.to_dict(), "encoded_input": encoded, "meta": _meta("train")}
    _write_json(work / f"test_metrics{suffix}.json", payload)
    return payload


def stage_grid(config: PipelineConfig) -> dict:
    work = config.work_dir()
    features, labels, k = _load_features(config, encoded=False)
    splits = load_splits(_require(work / "splits.json", "sevpred preprocess"))
    g = config["grid"]
    grid = GridSpec(
        initial_neurons=tuple(g["initial_neurons"]),
        initial_dropout=tuple(g["initial_dropout"]),
        batch_size=tuple(g["batch_size"]),
        l2_penalty=tuple(g["l2_penalty"]),
    )
    base = _classifier_config(config, "grid-base")
    weights = _maybe_weights(config, labels[splits.train], k)
    results = grid_search(
        grid,
        features.values[splits.train], labels[splits.train],
        features.values[splits.val], labels[splits.val],
        base_config=base, class_weights=weights,
        seed=derive_seed(config.seed(), "grid"),
        jobs=int(config["jobs"]), n_classes=k,
    )
    payload = {
        "grid": {key: list(g[key]) for key in ("initial_neurons", "initial_dropout", "batch_size", "l2_penalty")},
        "n_cells": grid.size(),
        "ranked": [r.to_dict() for r in results],
        "meta": _meta("grid"),
    }
    _write_json(work / "grid_report.json", payload)
    header = ["rank", "cell", "initial_neurons", "initial_dropout", "batch_size",
              "l2_penalty", "seed", "val_ber", "val_accuracy", "best_epoch"]
    rows = [
        [rank, r.index, r.config["initial_neurons"], r.config["initial_dropout"],
         r.config["batch_size"], r.config["l2_penalty"], r.seed,
         repr(r.val_ber), repr(r.val_accuracy), r.best_epoch]
        for rank, r in enumerate(results)
    ]
    _write_csv_rows(work / "grid_report.csv", header, rows)
    return payload


def _cv_runner(config: PipelineConfig, k: int, seed_label: str):
    base = config["classifier"]

    def runner(train_x, train_y, val_x, val_y, seed):
        cfg = ClassifierConfig(
            initial_neurons=base["initial_neurons"],
            initial_dropout=base["initial_dropout"],
            batch_size=base["batch_size"],
            l2_penalty=base["l2_penalty"],
            epochs=base["epochs"],
            learning_rate=base["learning_rate"],
            use_class_weights=base["use_class_weights"],
            seed=seed,
        )
        weights = compute_class_weights(train_y, k) if base["use_class_weights"] else None
        params, _ = train_classifier(
            cfg, train_x, train_y, val_x, val_y, class_weights=weights, n_classes=k
        )
        spec = build_classifier(cfg, train_x.shape[1], k)
        return lambda x: predict(params, spec, x)

    return runner


def stage_cv(config: PipelineConfig) -> dict:
    work = config.work_dir()
    encoded = bool(config["cv"]["use_encoder"])
    suffix = "_encoded" if encoded else ""
    features, labels, k = _load_features(config, encoded=encoded)
    result = cross_validate(
        _cv_runner(config, k, f"cv{suffix}"),
        features.values, labels,
        k=int(config["cv"]["folds"]),
        seed=derive_seed(config.seed(), f"cv{suffix}"),
        n_classes=k,
    )
    payload = {
        "encoded_input": encoded,
        "config": dict(config["classifier"]),
        **result.to_dict(),
        "meta": _meta("cv"),
    }
    _write_json(work / f"cv_report{suffix}.json", payload)
    rows = [
        [i, repr(r.accuracy), repr(r.ber)] for i, r in enumerate(result.fold_reports)
    ]
    rows.append(["mean", repr(result.mean_accuracy), repr(result.mean_ber)])
    rows.append(["std", repr(result.std_accuracy), repr(result.std_ber)])
    _write_csv_rows(work / f"cv_report{suffix}.csv", ["fold", "accuracy", "ber"], rows)
    return payload


def stage_predict(config: PipelineConfig) -> dict:
    work = config.work_dir()
    p = config["predict"]
    input_path = p["input"] or config["data"]["csv"]
    if not input_path or not Path(input_path).exists():
        raise ConfigError(f"predict.input path does not exist: {input_path}")
    schema_path = config["data"]["schema"]
    if not schema_path or not Path(schema_path).exists():
        raise ConfigError("data.schema must be set for predict")
    schema = load_schema(schema_path)
    table = impute(ingest_csv(input_path, schema, require_target=False))
    codec, standardizer, column_order = load_preprocessor(
        _require(work / "preprocessor.json", "sevpred preprocess")
    )
    features = assemble(table, codec, standardizer, column_order)
    if p["use_encoder"]:
        ae_spec, ae_params, _ = load_model(_require(work / "autoencoder.model", "sevpred train-ae"))
        features = encode(ae_spec, ae_params, features)
        default_model = work / "classifier_encoded.model"
    else:
        default_model = work / "classifier.model"
    model_path = Path(p["model"]) if p["model"] else default_model
    spec, params, _ = load_model(_require(model_path, "sevpred train"))
    preds = predict(params, spec, features)
    _write_csv_rows(
        work / "predictions.csv", ["row", "severity_pred"],
        [[i, int(label)] for i, label in enumerate(preds)],
    )
    return {
        "n_rows": table.n_rows,
        "n_dropped_missing_target": table.n_dropped,
        "output": str(work / "predictions.csv"),
        "meta": _meta("predict"),
    }


def stage_pipeline(config: PipelineConfig) -> dict:
    """Full chain: associate -> preprocess -> train-ae -> encode ->
    train x2 variants -> cv x2 variants, ending in a two-row comparison."""
    stage_associate(config)
    stage_preprocess(config)
    stage_train_ae(config)
    stage_encode(config)

    raw_cfg = PipelineConfig(_deep_merge(config.settings, {"train": {"use_encoder": False}}))
    enc_cfg = PipelineConfig(_deep_merge(config.settings, {"train": {"use_encoder": True}}))
    stage_train(raw_cfg)
    stage_train(enc_cfg)

    cv_raw = stage_cv(PipelineConfig(_deep_merge(config.settings, {"cv": {"use_encoder": False}})))
    cv_enc = stage_cv(PipelineConfig(_deep_merge(config.settings, {"cv": {"use_encoder": True}})))

    def row(name: str, report: dict) -> dict:
        return {
            "model": name,
            "mean_ber": report["mean_ber"],
            "std_ber": report["std_ber"],
            "mean_accuracy": report["mean_accuracy"],
            "std_accuracy": report["std_accuracy"],
        }

    payload = {
        "comparison": [row("encoder+dnn", cv_enc), row("dnn", cv_raw)],
        "class_weights_enabled": bool(config["classifier"]["use_class_weights"]),
        "meta": _meta("pipeline"),
    }
    _write_json(config.work_dir() / "pipeline_report.json", payload)
    return payload


STAGES = {
    "stats": stage_stats,
    "associate": stage_associate,
    "preprocess": stage_preprocess,
    "train-ae": stage_train_ae,
    "encode": stage_encode,
    "train": stage_train,
    "grid": stage_grid,
    "cv": stage_cv,
    "predict": stage_predict,
    "pipeline": stage_pipeline,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        print(json.dumps({"error": {"type": "UsageError", "message": message}}), file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sevpred", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(STAGES), help="pipeline stage to run")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config scalar, e.g. --set association.threshold=0.1")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--jobs", type=int, help="parallel workers for grid/cv")
    parser.add_argument("--work-dir", help="artifact directory override")
    parser.add_argument("--no-class-weights", action="store_true",
                        help="train without class weights (the ablation switch)")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    stage_name = args.command
    try:
        config = build_config(args)
        payload = STAGES[stage_name](config)
        print(json.dumps(payload, indent=2))
        return 0
    except ConfigError as exc:
        _emit_error(stage_name, exc)
        return 1
    except NumericError as exc:
        _emit_error(stage_name, exc)
        return 3
    except PipelineError as exc:
        _emit_error(stage_name, exc)
        return 2
    except OSError as exc:
        _emit_error(stage_name, exc)
        return 2


def _emit_error(stage: str, exc: Exception) -> None:
    print(
        json.dumps({"error": {"type": type(exc).__name__, "message": str(exc), "stage": stage}}),
        file=sys.stderr,
    )


if __name__ == "__main__":
    sys.exit(main())
