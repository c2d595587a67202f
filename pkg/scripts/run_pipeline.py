"""End-to-end demo: corpus -> detectors -> diagnosis -> sessions -> therapy.

Writes everything under --workdir and prints progress to stderr, one
JSON summary to stdout at the end.

    python scripts/run_pipeline.py --workdir /tmp/stutterkit-demo --epochs 15
"""

import argparse
import json
import sys
from pathlib import Path

from stutterkit import nn
from stutterkit.assessment import StutterProfile, bucketize, improvement_bucket
from stutterkit.detectors import DetectorKind, diagnose, save_detector, train_detector
from stutterkit.sessions import SessionRecord, SessionStore, improvement_inputs
from stutterkit.synth import CorpusSpec, build_corpus, gen_repetition_clip
from stutterkit.therapy import TherapyCatalog, generate_rule_dataset, recommend, train_recommender


def log(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="pipeline_out")
    parser.add_argument("--n-clips", type=int, default=120)
    parser.add_argument("--epochs", type=int, default=15)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    log(f"[1/5] generating {args.n_clips}-clip corpus ...")
    spec = CorpusSpec(n_clips=args.n_clips, ratio_stutter=0.25, seed=args.seed)
    manifest = build_corpus(spec, workdir / "corpus")

    detectors = {}
    metrics = {}
    for kind in (DetectorKind.PROLONGATION, DetectorKind.REPETITION):
        log(f"[2/5] training {kind.value} detector ({args.epochs} epochs) ...")
        cfg = nn.TrainConfig(batch_size=64, epochs=args.epochs, seed=args.seed)
        detector, m = train_detector(kind, manifest, cfg)
        save_detector(detector, workdir / f"{kind.value}.grcn")
        detectors[kind] = detector
        metrics[kind.value] = m
        log(f"      validation accuracy {m['accuracy']:.3f}")

    log("[3/5] diagnosing a fresh repetition-heavy recording ...")
    clip = gen_repetition_clip(seed=args.seed + 999, seconds=6.0)
    report = diagnose(detectors[DetectorKind.PROLONGATION], detectors[DetectorKind.REPETITION],
                      clip, clip_id="demo")
    (workdir / "report.json").write_text(report.to_json() + "\n")
    log(f"      severities: prolongation {report.severity_prolongation}"
        f" / repetition {report.severity_repetition}")

    log("[4/5] recording two sessions and computing improvement ...")
    store = SessionStore(workdir / "sessions.jsonl")
    store.append(SessionRecord("demo-patient", 1000.0, 80.0, report.severity_repetition or 60.0))
    store.append(SessionRecord("demo-patient", 2000.0, 30.0, 20.0))
    ip, cp, ir, cr = improvement_inputs(store, "demo-patient")
    profile = StutterProfile(
        prolongation=bucketize(cp),
        repetition=bucketize(cr),
        improvement=improvement_bucket(ip, cp, ir, cr),
    )

    log("[5/5] training the therapy recommender and recommending ...")
    catalog = TherapyCatalog.default()
    recommender = train_recommender(generate_rule_dataset(catalog), catalog)
    (workdir / "recommender.json").write_text(recommender.to_json() + "\n")
    assignment = recommend(recommender, profile)

    print(json.dumps({
        "manifest": str(manifest),
        "metrics": metrics,
        "diagnosis": report.to_dict(),
        "profile": json.loads(profile.to_json()),
        "recommendation": json.loads(assignment.to_json()),
    }, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
