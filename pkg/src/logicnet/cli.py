"""Command-line entry points: train, predict, explain, evaluate.

Data comes in as UTF-8 CSV with a header row; the label column is named with
``--label``.  Hyper-parameters are read from a flat ``key = value`` config
file (``--config``) and/or repeated ``--set key=value`` flags; both routes
resolve to the same effective configuration.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from . import explain as xp
from . import metrics, model_io, preprocess, training
from .bandit import BanditPolicy
from .config import RunConfig, parse_config_text, resolve_run_config
from .network import init_network, parameter_count


class UsageError(Exception):
    pass


def _load_csv(path: str, label: str | None = None):
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise UsageError(f"cannot read data file: {path}")
    except Exception as exc:  # malformed csv
        raise UsageError(f"cannot parse {path}: {exc}")
    if label is not None and label not in frame.columns:
        raise UsageError(f"label column {label!r} not found in {path}")
    n_before = len(frame)
    frame = frame.dropna()
    dropped = n_before - len(frame)
    if dropped:
        print(f"warning: dropped {dropped} rows with missing values", file=sys.stderr)
    y = None
    if label is not None:
        y_col = frame[label].to_numpy()
        uniq = set(np.unique(y_col).tolist())
        if not uniq <= {0, 1} or len(uniq) != 2:
            raise UsageError(f"label column {label!r} must be binary 0/1, found values {sorted(uniq)}")
        y = y_col.astype(np.float64)
        frame = frame.drop(columns=[label])
    bad = [c for c in frame.columns if not np.issubdtype(frame[c].dtype, np.number)]
    if bad:
        raise UsageError(f"non-numeric feature columns: {bad}")
    X = frame.to_numpy(dtype=np.float64)
    return X, y, list(frame.columns)


def _resolve_config(args) -> RunConfig:
    overrides: dict = {}
    if args.config:
        try:
            overrides.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise UsageError(f"cannot read config file: {args.config}")
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        from .config import _parse_scalar

        overrides[key.strip()] = _parse_scalar(val)
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        return resolve_run_config(overrides)
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    X, y, names = _load_csv(args.data, args.label)
    if X.shape[0] < 10:
        raise UsageError("need at least 10 rows to train")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    tr_idx, val_idx, te_idx = preprocess.split_dataset(X.shape[0], cfg.seed)
    space = preprocess.PredicateSpace.fit(
        X[tr_idx],
        y[tr_idx],
        names,
        binarize=cfg.pre.binarize,
        tree_num=cfg.pre.fbft_tree_num,
        tree_depth=cfg.pre.fbft_tree_depth,
        feature_fraction=cfg.pre.fbft_feature_selection,
        thresh_round=cfg.pre.fbft_thresh_round,
        seed=cfg.seed,
    )
    rows_tr = space.transform(X[tr_idx])
    rows_val = space.transform(X[val_idx])

    priors = preprocess.association_scores(X[tr_idx], y[tr_idx])
    policy = BanditPolicy(priors, ucb_scale=cfg.train.ucb_scale)
    net = init_network(space.predicates, cfg.arch, cfg.seed)
    t0 = time.perf_counter()
    result = training.train(net, policy, rows_tr, y[tr_idx], rows_val, y[val_idx], cfg.train)
    train_secs = time.perf_counter() - t0

    model = model_io.TrainedModel(
        space,
        result.network,
        metadata={
            "seed": cfg.seed,
            "config_hash": cfg.config_hash(),
            "best_epoch": result.best_epoch,
            "val_auc": result.best_val_auc,
            "label": args.label,
        },
    )
    model_path = out_dir / "model.json"
    model_io.save_model(model, model_path)

    with open(out_dir / "history.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.history:
            fh.write(json.dumps(dataclasses.asdict(rec), sort_keys=True) + "\n")

    report = _evaluate(model, X[te_idx], y[te_idx], seed=cfg.seed)
    report.timings["train"] = train_secs
    (out_dir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    (out_dir / "report.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    print(f"model written to {model_path}")
    print(report.to_text())
    return 0


def _check_schema(model: model_io.TrainedModel, names: list[str]) -> None:
    expected = model.feature_names
    missing = [n for n in expected if n not in names]
    extra = [n for n in names if n not in expected]
    if missing or extra:
        raise UsageError(f"schema mismatch: missing columns {missing}, unexpected columns {extra}")


def _bind_columns(X: np.ndarray, names: list[str], expected: list[str]) -> np.ndarray:
    index = {n: i for i, n in enumerate(names)}
    return X[:, [index[n] for n in expected]]


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    X, _, names = _load_csv(args.data)
    _check_schema(model, names)
    X = _bind_columns(X, names, model.feature_names)
    scores = model.predict_raw(X) if X.shape[0] else np.empty(0)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(f"{s:.17g}\n")
    print(f"{scores.size} scores written to {out}")
    return 0


def _load_model(path: str) -> model_io.TrainedModel:
    try:
        return model_io.load_model(path)
    except FileNotFoundError:
        raise UsageError(f"cannot read model file: {path}")
    except model_io.ModelDecodeError as exc:
        raise UsageError(str(exc))


def cmd_explain(args) -> int:
    model = _load_model(args.model)
    X, _, names = _load_csv(args.data)
    _check_schema(model, names)
    X = _bind_columns(X, names, model.feature_names)
    doc: dict
    if args.global_:
        rows = model.space.transform(X)
        from .network import predict

        predictions = predict(model.network, rows)
        views = {}
        for label, pct in (
            ("positive", args.confidence_percentile),
            ("negative", 100.0 - args.confidence_percentile),
        ):
            tree = xp.global_explanation(model.network, predictions, pct, args.weight_quantile)
            views[label] = tree
            print(f"[{label} class @ {pct:g}th percentile]")
            print(xp.to_text(tree) or "(empty)")
        doc = {k: xp.to_doc(v) for k, v in views.items()}
    else:
        if args.sample is None:
            raise UsageError("explain needs --sample INDEX or --global")
        if not 0 <= args.sample < X.shape[0]:
            raise UsageError(f"sample index {args.sample} out of range for {X.shape[0]} rows")
        row = model.space.transform(X[args.sample : args.sample + 1])[0]
        sample_exp = xp.explain_and_simplify(model.network, row)
        print(sample_exp.render())
        print(f"confidence: {sample_exp.confidence:.6f}")
        doc = {
            "rules": [dataclasses.asdict(r) for r in sample_exp.rules],
            "confidence": sample_exp.confidence,
        }
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _evaluate(model: model_io.TrainedModel, X: np.ndarray, y: np.ndarray, seed: int, k: int = 100):
    timer = metrics.PhaseTimer()
    with timer.phase("auc"):
        auc = metrics.roc_auc(model.predict_raw(X), y)
    rows = model.space.transform(X)
    with timer.phase("explanation_size"):
        size = metrics.explanation_size(
            lambda i: len(xp.explain_and_simplify(model.network, rows[i]).rules),
            X.shape[0],
            k,
            seed,
        )
    with timer.phase("single_deletion"):
        importance = xp.feature_importance(model.network)
        sd_s, sd_p = metrics.single_deletion(model.predict_raw, importance, X, y, seed)
    return metrics.EvalReport(
        auc=auc,
        explanation_size=size,
        sd_spearman=sd_s,
        sd_pearson=sd_p,
        parameter_count=parameter_count(model.network),
        timings=timer.timings,
    )


def cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    X, y, names = _load_csv(args.data, args.label)
    _check_schema(model, names)
    X = _bind_columns(X, names, model.feature_names)
    report = _evaluate(model, X, y, seed=args.seed if args.seed is not None else 0)
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logicnet", description="Train and inspect logic-network classifiers over CSV data."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False, label=False):
        p.add_argument("--data", required=True, help="CSV file with a header row")
        if label:
            p.add_argument("--label", required=True, help="name of the binary label column")
        if model:
            p.add_argument("--model", required=True, help="model document from train")
        p.add_argument("--seed", type=int, default=None)

    p_train = sub.add_parser("train", help="fit a model and write model/history/report files")
    common(p_train, label=True)
    p_train.add_argument("--config", help="flat key = value config file")
    p_train.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="score rows with a trained model")
    common(p_pred, model=True)
    p_pred.add_argument("--out", required=True, help="scores file, one per row")
    p_pred.set_defaults(func=cmd_predict)

    p_exp = sub.add_parser("explain", help="explain one sample or the whole model")
    common(p_exp, model=True)
    p_exp.add_argument("--sample", type=int, help="row index to explain")
    p_exp.add_argument("--global", dest="global_", action="store_true", help="model-level view")
    p_exp.add_argument("--confidence-percentile", type=float, default=75.0)
    p_exp.add_argument("--weight-quantile", type=float, default=1.0)
    p_exp.add_argument("--out", help="write the structured explanation here")
    p_exp.set_defaults(func=cmd_explain)

    p_eval = sub.add_parser("evaluate", help="metrics for a trained model on labeled data")
    common(p_eval, model=True, label=True)
    p_eval.add_argument("--out", help="write the JSON report here")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
