"""Command-line surface over the full pipeline.

Every command prints exactly one JSON document to stdout on success;
diagnostics go to stderr. Exit codes: 0 success, 1 user error (bad
flags, unreadable inputs, insufficient history), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import nn
from .assessment import StutterProfile, bucketize, improvement_bucket
from .audio import MalformedHeader, UnsupportedEncoding, read_wav_file
from .detectors import (
    DetectorKind,
    DiagnosisReport,
    EmptyClass,
    diagnose,
    load_detector,
    save_detector,
    train_detector,
)
from .errors import IoFailure, StutterKitError
from .features import FeatureConfig
from .sessions import InsufficientHistory, OutOfOrderTimestamp, SessionRecord, SessionStore, improvement_inputs
from .synth import CorpusSpec, build_corpus
from .therapy import (
    NotTrained,
    Recommender,
    SingleClass,
    TherapyCatalog,
    TherapySpec,
    generate_rule_dataset,
    read_rule_dataset_csv,
    recommend,
    train_recommender,
    write_rule_dataset_csv,
)

USER_ERRORS = (
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    MalformedHeader,
    UnsupportedEncoding,
    EmptyClass,
    InsufficientHistory,
    OutOfOrderTimestamp,
    NotTrained,
    SingleClass,
    nn.CorruptModel,
    IoFailure,
    ValueError,
    json.JSONDecodeError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on flag errors; the contract reserves 2 for internal faults
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, indent=2))


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    config = json.loads(Path(path).read_text())
    if not isinstance(config, dict):
        raise ValueError("--config must contain a JSON object")
    return config


def _cmd_gen_corpus(args) -> int:
    spec = CorpusSpec(args.n, args.ratio, args.seed, args.clip_seconds)
    manifest = build_corpus(spec, args.out)
    from .synth import corpus_plan

    plan = corpus_plan(spec)
    counts = {cls: plan.count(cls) for cls in sorted(set(plan))}
    _emit({"manifest": str(manifest), "n_clips": spec.n_clips, "counts": counts})
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    feature_config = FeatureConfig(**config.get("feature", {}))
    train_overrides = dict(config.get("train", {}))
    train_overrides.update(batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)
    cfg = nn.TrainConfig(**train_overrides)

    detector, metrics = train_detector(DetectorKind(args.kind), args.manifest, cfg, feature_config)
    save_detector(detector, args.out_model)
    _emit({"kind": args.kind, "model": str(args.out_model), **metrics})
    return 0


def _cmd_diagnose(args) -> int:
    pro = load_detector(args.model_prolongation)
    rep = load_detector(args.model_repetition)
    clip = read_wav_file(args.wav)
    report = diagnose(pro, rep, clip, clip_id=Path(args.wav).stem)
    text = report.to_json()
    if args.report_out:
        Path(args.report_out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_session_add(args) -> int:
    report = DiagnosisReport.from_dict(json.loads(Path(args.report).read_text()))
    if report.severity_prolongation is None or report.severity_repetition is None:
        raise ValueError("report has undefined severities (empty clip); nothing to record")
    record = SessionRecord(
        patient_id=args.patient,
        timestamp=args.timestamp if args.timestamp is not None else time.time(),
        prolongation_severity=report.severity_prolongation,
        repetition_severity=report.severity_repetition,
        report_path=str(args.report),
    )
    SessionStore(args.store).append(record)
    _emit(json.loads(record.to_line()))
    return 0


def _cmd_recommend(args) -> int:
    recommender = Recommender.from_json(Path(args.recommender).read_text())
    if args.catalog:
        catalog = _read_catalog(args.catalog)
        if catalog != recommender.catalog:
            raise ValueError("--catalog does not match the catalog the recommender was trained on")

    store = SessionStore(args.store)
    ip, cp, ir, cr = improvement_inputs(store, args.patient, window=args.window)
    profile = StutterProfile(
        prolongation=bucketize(cp),
        repetition=bucketize(cr),
        improvement=improvement_bucket(ip, cp, ir, cr),
    )
    assignment = recommend(recommender, profile)
    payload = json.loads(assignment.to_json())
    payload["profile"] = json.loads(profile.to_json())
    _emit(payload)
    return 0


def _read_catalog(path: str) -> TherapyCatalog:
    entries = json.loads(Path(path).read_text())
    return TherapyCatalog(tuple(TherapySpec(e["name"], e["driver"]) for e in entries))


def _cmd_gen_therapy_data(args) -> int:
    catalog = _read_catalog(args.catalog) if args.catalog else TherapyCatalog.default()
    rows = generate_rule_dataset(catalog)
    write_rule_dataset_csv(rows, args.out, catalog)
    _emit({"path": str(args.out), "rows": len(rows), "therapies": catalog.names})
    return 0


def _cmd_train_recommender(args) -> int:
    rows, names = read_rule_dataset_csv(args.data)
    catalog = (
        _read_catalog(args.catalog)
        if args.catalog
        else TherapyCatalog(tuple(TherapySpec(n, "repetition" if i % 2 else "prolongation")
                                  for i, n in enumerate(names)))
    )
    if catalog.names != names:
        raise ValueError(f"catalog names {catalog.names} do not match CSV columns {names}")
    recommender = train_recommender(rows, catalog)

    import numpy as np

    x = np.asarray([r.features for r in rows], dtype=float)
    accuracy = {}
    for column, (therapy, model) in enumerate(zip(catalog.therapies, recommender.models)):
        truth = np.asarray([r.labels[column] for r in rows])
        accuracy[therapy.name] = float(np.mean(model.predict(x) == truth))

    Path(args.out_model).write_text(recommender.to_json() + "\n")
    _emit({"model": str(args.out_model), "training_accuracy": accuracy})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stutterkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a labeled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--ratio", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip-seconds", type=float, default=3.0)
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("train", help="train a detector from a manifest")
    p.add_argument("--kind", required=True, choices=[k.value for k in DetectorKind])
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file overriding feature/train defaults")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("diagnose", help="score a wav with both detectors")
    p.add_argument("--model-prolongation", required=True)
    p.add_argument("--model-repetition", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--report-out")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("session-add", help="record a diagnosis report for a patient")
    p.add_argument("--store", required=True)
    p.add_argument("--patient", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--timestamp", type=float, help="override the record time (UTC seconds)")
    p.set_defaults(func=_cmd_session_add)

    p = sub.add_parser("recommend", help="suggest therapies from a patient's history")
    p.add_argument("--store", required=True)
    p.add_argument("--patient", required=True)
    p.add_argument("--recommender", required=True)
    p.add_argument("--catalog", help="JSON catalog to cross-check against the model")
    p.add_argument("--window", type=int, default=1, help="average the last N sessions as current")
    p.set_defaults(func=_cmd_recommend)

    p = sub.add_parser("gen-therapy-data", help="emit the 64-row rule dataset CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--catalog")
    p.set_defaults(func=_cmd_gen_therapy_data)

    p = sub.add_parser("train-recommender", help="train the therapy SVMs from a rule CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--catalog")
    p.set_defaults(func=_cmd_train_recommender)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StutterKitError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary maps everything
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
