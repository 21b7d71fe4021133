"""Command-line frontend.

Subcommands: train, score, evaluate, features, diversity, generate,
classify-nn. Every command is a pure function of its config and input
files; output files embed the resolved config hash and master seed in
leading ``#`` comment lines so reruns are byte-identical and auditable.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import ensemble as ens
from . import mlp as mlp_mod
from .config import MlpSettings, config_hash, load_run_config, resolved_config_text
from .diversity import similarity_matrix
from .errors import DataError, NumericError, ParameterError
from .hmm import sample
from .metrics import EvalReport


def _provenance_lines(cfg_hash: str, master_seed: int, extra: dict | None = None) -> list[str]:
    lines = [f"# config_hash={cfg_hash}", f"# master_seed={master_seed}"]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}={value}")
    return lines


def _write_csv(
    path: Path, header: list[str], rows, cfg_hash: str, master_seed: int,
    extra: dict | None = None,
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in _provenance_lines(cfg_hash, master_seed, extra):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise DataError(f"file not found: {path}")
    return path


def _load_model(path: str) -> tuple[ens.EnsembleModel, dict]:
    """Returns the model and whatever provenance block the file carries."""
    with open(_require_file(path), encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid model JSON ({exc})") from None
    return ens.EnsembleModel.from_dict(payload), payload.get("provenance", {})


def _load_corpus(model: ens.EnsembleModel, path: str, labels_required: bool):
    """Encode a corpus CSV against the model's own vocabulary."""
    texts, labels = data_mod.read_csv_rows(
        _require_file(path), label_column="label" if labels_required else None
    )
    try:
        sequences = [model.vocabulary.encode(t) for t in texts]
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None
    return sequences, (np.asarray(labels, dtype=np.int64) if labels_required else None)


def _resolve_workers(threads: int) -> int:
    if threads < 0:
        raise ParameterError("--threads must be >= 0")
    return threads if threads > 0 else (os.cpu_count() or 1)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if not cfg.train_csv:
        raise DataError("config has no [data] train_csv")
    dataset = data_mod.load_csv(
        _require_file(cfg.train_csv), cfg.sequence_column, cfg.label_column
    )
    if cfg.imbalance_ratio and cfg.imbalance_ratio > 0:
        dataset = data_mod.subsample_imbalance(dataset, cfg.imbalance_ratio, cfg.imbalance_seed)
    resolved = resolved_config_text(cfg)
    cfg_hash = config_hash(resolved)
    model = ens.train_ensemble(dataset, cfg.ensemble_config(), _resolve_workers(args.threads))
    out = _out_dir(args)
    payload = model.to_dict()
    payload["provenance"] = {
        "config_hash": cfg_hash,
        "master_seed": cfg.master_seed,
        "dataset": dataset.provenance.to_dict(),
    }
    _write_json(out / "model.json", payload)
    _write_json(
        out / "histories.json",
        {
            "config_hash": cfg_hash,
            "master_seed": cfg.master_seed,
            "histories": model.histories,
        },
    )
    with open(out / "config.resolved.txt", "w", encoding="utf-8") as fh:
        for line in _provenance_lines(cfg_hash, cfg.master_seed):
            fh.write(line + "\n")
        fh.write(resolved)
    print(f"trained {len(model.models)} models -> {out / 'model.json'}")
    return 0


def _model_hash_seed(model: ens.EnsembleModel) -> tuple[str, int]:
    text = json.dumps(model.config.to_dict(), sort_keys=True)
    return config_hash(text), model.config.master_seed


def cmd_score(args) -> int:
    model, _ = _load_model(args.model)
    sequences, _ = _load_corpus(model, args.data, labels_required=False)
    ll = ens.log_likelihood_matrix(model, sequences)
    n_pos = model.config.n_pos_models
    scores = [ens.matchup_count(row[:n_pos], row[n_pos:]) for row in ll]
    cfg_hash, seed = _model_hash_seed(model)
    header = (
        ["index", "composite_score"]
        + [f"loglik_pos_{i}" for i in range(n_pos)]
        + [f"loglik_neg_{j}" for j in range(model.config.n_neg_models)]
    )
    rows = [
        [i, scores[i]] + [repr(float(v)) for v in ll[i]] for i in range(len(sequences))
    ]
    out = _out_dir(args)
    _write_csv(out / "scores.csv", header, rows, cfg_hash, seed, {"data": args.data})
    print(f"scored {len(sequences)} sequences -> {out / 'scores.csv'}")
    return 0


def cmd_evaluate(args) -> int:
    model, model_prov = _load_model(args.model)
    sequences, labels = _load_corpus(model, args.data, labels_required=True)
    if not (np.any(labels == 1) and np.any(labels == 0)):
        raise DataError("labeled corpus must contain both classes")
    cfg_hash, seed = _model_hash_seed(model)
    if args.seed is not None:
        seed = args.seed
    if not 0.0 < args.calibration_fraction < 1.0:
        raise ParameterError("--calibration-fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    calib_idx, eval_idx = [], []
    for label in (0, 1):
        class_idx = np.flatnonzero(labels == label)
        n_cal = max(1, int(np.floor(class_idx.size * args.calibration_fraction + 0.5)))
        if n_cal >= class_idx.size:
            raise DataError(f"class {label} too small for calibration split")
        perm = rng.permutation(class_idx)
        calib_idx.extend(perm[:n_cal])
        eval_idx.extend(perm[n_cal:])
    calib_idx = np.sort(np.array(calib_idx))
    eval_idx = np.sort(np.array(eval_idx))
    all_scores = np.array(ens.score_corpus(model, sequences), dtype=np.float64)
    threshold = ens.choose_threshold(all_scores[calib_idx], labels[calib_idx])
    report = EvalReport.from_scores(labels[eval_idx], all_scores[eval_idx], threshold)
    out = _out_dir(args)
    payload = report.to_dict()
    payload["auc_roc_x100"] = round(report.auc_roc * 100, 4)
    payload["average_precision_x100"] = round(report.average_precision * 100, 4)
    payload["provenance"] = {
        "config_hash": cfg_hash,
        "master_seed": seed,
        "calibration_fraction": args.calibration_fraction,
        "imbalance_ratio": model_prov.get("dataset", {}).get("imbalance_ratio"),
        "data": str(args.data),
    }
    _write_json(out / "evaluation.json", payload)
    print(
        f"AUC {payload['auc_roc_x100']:.1f}  AP {payload['average_precision_x100']:.1f}  "
        f"threshold {report.threshold:g} -> {out / 'evaluation.json'}"
    )
    return 0


def cmd_features(args) -> int:
    model, _ = _load_model(args.model)
    sequences, _ = _load_corpus(model, args.data, labels_required=False)
    feats = ens.feature_vectors(model, sequences)
    cfg_hash, seed = _model_hash_seed(model)
    header = ["index"] + [f"f{i}" for i in range(feats.shape[1])]
    rows = [[i] + [repr(float(v)) for v in row] for i, row in enumerate(feats)]
    out = _out_dir(args)
    _write_csv(out / "features.csv", header, rows, cfg_hash, seed, {"data": args.data})
    print(f"wrote {feats.shape[0]}x{feats.shape[1]} features -> {out / 'features.csv'}")
    return 0


def cmd_diversity(args) -> int:
    model, _ = _load_model(args.model)
    sim = similarity_matrix(model)
    cfg_hash, seed = _model_hash_seed(model)
    out = _out_dir(args)
    path = out / "similarity.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in _provenance_lines(cfg_hash, seed):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(sim.to_rows())
    print(f"wrote {len(sim.labels)}x{len(sim.labels)} similarity matrix -> {path}")
    return 0


def cmd_generate(args) -> int:
    model, _ = _load_model(args.model)
    if args.count < 1 or args.length < 1:
        raise ParameterError("--count and --length must be >= 1")
    members = model.positive_models if args.label == 1 else model.negative_models
    rng = np.random.default_rng(args.seed)
    rows = []
    for i in range(args.count):
        member = members[int(rng.integers(len(members)))]
        seq = sample(member, args.length, rng)
        rows.append([model.vocabulary.decode(seq), args.label])
    cfg_hash, _ = _model_hash_seed(model)
    out = _out_dir(args)
    _write_csv(out / "generated.csv", ["sequence", "label"], rows, cfg_hash, args.seed)
    print(f"generated {args.count} sequences -> {out / 'generated.csv'}")
    return 0


def _read_feature_csv(path: str) -> np.ndarray:
    """Wide numeric CSV as written by cmd_features: index column then floats."""
    rows = []
    with open(_require_file(path), encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    if not rows:
        raise DataError(f"{path}: no feature rows")
    return np.array(rows)


def _read_label_csv(path: str) -> np.ndarray:
    with open(_require_file(path), encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = [h.strip() for h in next(reader)]
        if "label" not in header:
            raise DataError(f"{path}: missing column 'label'")
        col = header.index("label")
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            raw = row[col].strip()
            if raw not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {raw!r}")
            labels.append(int(raw))
    if not labels:
        raise DataError(f"{path}: no label rows")
    return np.array(labels, dtype=np.int64)


def cmd_classify_nn(args) -> int:
    settings = MlpSettings()
    if args.config:
        settings = load_run_config(args.config).mlp
    if args.seed is not None:
        settings.seed = args.seed
    features = _read_feature_csv(args.features)
    labels = _read_label_csv(args.labels)
    if features.shape[0] != labels.shape[0]:
        raise DataError("feature and label row counts differ")
    config = mlp_mod.MlpConfig(
        input_dim=features.shape[1],
        hidden_dims=settings.hidden_dims,
        dropout=settings.dropout,
        learning_rate=settings.learning_rate,
        batch_size=settings.batch_size,
        epochs=settings.epochs,
        seed=settings.seed,
    )
    model = mlp_mod.mlp_train(features, labels, config)
    if args.eval_features and args.eval_labels:
        eval_x = _read_feature_csv(args.eval_features)
        eval_y = _read_label_csv(args.eval_labels)
    else:
        eval_x, eval_y = features, labels
    scores = mlp_mod.mlp_predict(model, eval_x)
    report = EvalReport.from_scores(eval_y, scores, threshold=0.5)
    out = _out_dir(args)
    _write_json(out / "mlp.json", model.to_dict())
    payload = report.to_dict()
    payload["auc_roc_x100"] = round(report.auc_roc * 100, 4)
    payload["average_precision_x100"] = round(report.average_precision * 100, 4)
    payload["provenance"] = {"seed": settings.seed, "features": str(args.features)}
    _write_json(out / "nn_evaluation.json", payload)
    print(
        f"AUC {payload['auc_roc_x100']:.1f}  AP {payload['average_precision_x100']:.1f} "
        f"-> {out / 'nn_evaluation.json'}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmm-ensemble",
        description="Train and run class-conditional HMM ensembles for sequence classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker count (0 = auto)")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="train an ensemble from a labeled CSV")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="composite scores for a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="calibrate a threshold and report AUC/AP")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--calibration-fraction", type=float, default=0.2)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("features", help="normalized log-likelihood feature vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("diversity", help="pairwise model similarity matrix")
    p.add_argument("--model", required=True)
    common(p)
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("generate", help="sample synthetic sequences from one class")
    p.add_argument("--model", required=True)
    p.add_argument("--label", type=int, choices=(0, 1), required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--length", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("classify-nn", help="train the MLP head on feature vectors")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--eval-features", default=None)
    p.add_argument("--eval-labels", default=None)
    p.add_argument("--config", default=None)
    common(p)
    p.set_defaults(func=cmd_classify_nn)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:  # includes ConfigError
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
