"""The two reference dysfluency detectors and their train/diagnose workflow.

The prolongation detector consumes (2, 44, 1) inputs (MFCC rows 0 and
12); the repetition detector consumes the full (13, 44, 1) matrix. Layer
shapes and parameter counts of the builders are locked by tests down to
the exact integers (17,857 and 79,553 total parameters).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import nn
from .assessment import severity_index
from .audio import AudioClip, ManifestRow, read_manifest, read_wav_file, resample, segment
from .errors import StutterKitError
from .features import FeatureConfig, MfccMatrix, PROLONGATION_COEFFS, mfcc, select_coefficients


class EmptyClass(StutterKitError):
    """A training manifest is missing one of the two classes."""


class DetectorKind(str, Enum):
    PROLONGATION = "prolongation"
    REPETITION = "repetition"

    @property
    def coeff_indices(self) -> list[int]:
        return list(PROLONGATION_COEFFS) if self is DetectorKind.PROLONGATION else list(range(13))


def build_prolongation_model() -> nn.ModelGraph:
    """Two strided 1x5 convs, two 32-unit GRUs, sigmoid head; 17,857 params."""
    return nn.ModelGraph(
        (2, 44, 1),
        [
            nn.Conv2D(1, 5, 32, 1, 2),
            nn.Activation("relu"),
            nn.Conv2D(1, 5, 32, 1, 2),
            nn.Activation("relu"),
            nn.Reshape((16, 32)),
            nn.GRU(32, return_sequences=True),
            nn.GRU(32, return_sequences=False),
            nn.Dropout(0.2),
            nn.Dense(1),
            nn.Activation("sigmoid"),
        ],
    )


def build_repetition_model() -> nn.ModelGraph:
    """Five 1x8 convs (first strided 5 down the coefficient axis), two GRUs; 79,553 params."""
    return nn.ModelGraph(
        (13, 44, 1),
        [
            nn.Conv2D(1, 8, 32, 5, 1),
            nn.Activation("relu"),
            nn.Conv2D(1, 8, 32, 1, 1),
            nn.Activation("relu"),
            nn.Conv2D(1, 8, 48, 1, 1),
            nn.Activation("relu"),
            nn.Conv2D(1, 8, 48, 1, 1),
            nn.Activation("relu"),
            nn.Conv2D(1, 8, 64, 1, 1),
            nn.Activation("relu"),
            nn.Reshape((27, 64)),
            nn.GRU(32, return_sequences=True),
            nn.GRU(32, return_sequences=False),
            nn.Dropout(0.2),
            nn.Dense(1),
            nn.Activation("sigmoid"),
        ],
    )


def build_model(kind: DetectorKind) -> nn.ModelGraph:
    if kind is DetectorKind.PROLONGATION:
        return build_prolongation_model()
    return build_repetition_model()


@dataclass
class Standardizer:
    """Per-coefficient-row affine normalization fitted on training features."""

    mean: np.ndarray  # (rows, 1)
    std: np.ndarray  # (rows, 1), floored away from zero

    @classmethod
    def fit(cls, features: list[np.ndarray]) -> "Standardizer":
        stacked = np.concatenate([f.reshape(f.shape[0], -1) for f in features], axis=1)
        mean = stacked.mean(axis=1, keepdims=True)
        std = np.maximum(stacked.std(axis=1, keepdims=True), 1e-8)
        return cls(mean, std)

    @classmethod
    def identity(cls, rows: int) -> "Standardizer":
        return cls(np.zeros((rows, 1)), np.ones((rows, 1)))

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.ravel().tolist(), "std": self.std.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Standardizer":
        return cls(np.asarray(data["mean"], dtype=np.float64)[:, None],
                   np.asarray(data["std"], dtype=np.float64)[:, None])


@dataclass
class Detector:
    kind: DetectorKind
    model: nn.ModelGraph
    feature_config: FeatureConfig
    coeff_indices: list[int]
    threshold: float
    normalizer: Standardizer

    def __post_init__(self):
        expected = (len(self.coeff_indices), 44, 1)
        if tuple(self.model.input_shape) != expected:
            raise nn.ShapeMismatch(
                f"{self.kind.value} detector input {self.model.input_shape} != {expected}"
            )

    def features_for(self, matrix: MfccMatrix) -> np.ndarray:
        if self.coeff_indices != matrix.coeff_indices:
            matrix = select_coefficients(matrix, self.coeff_indices)
        return self.normalizer.apply(matrix.values)

    def score(self, matrix: MfccMatrix) -> float:
        return nn.predict(self.model, self.features_for(matrix))


def save_detector(detector: Detector, path: str | Path) -> None:
    blob = nn.serialize_model(
        detector.model,
        extra_metadata={
            "kind": detector.kind.value,
            "feature_config": asdict(detector.feature_config),
            "threshold": detector.threshold,
            "coeff_indices": detector.coeff_indices,
            "normalization": detector.normalizer.to_dict(),
        },
    )
    Path(path).write_bytes(blob)


def load_detector(path: str | Path) -> Detector:
    model, meta = nn.deserialize_model(Path(path).read_bytes())
    coeffs = [int(i) for i in meta["coeff_indices"]]
    norm = (Standardizer.from_dict(meta["normalization"])
            if "normalization" in meta else Standardizer.identity(len(coeffs)))
    return Detector(
        kind=DetectorKind(meta["kind"]),
        model=model,
        feature_config=FeatureConfig.from_dict(meta["feature_config"]),
        coeff_indices=coeffs,
        threshold=float(meta["threshold"]),
        normalizer=norm,
    )


def _label_for(row: ManifestRow, kind: DetectorKind) -> int | None:
    return row.label_prolongation if kind is DetectorKind.PROLONGATION else row.label_repetition


def extract_clip_features(clip: AudioClip, config: FeatureConfig, coeff_indices: list[int]) -> list[np.ndarray]:
    """Resample, cut into 1-second segments, and extract selected MFCC rows."""
    clip = resample(clip, config.sample_rate)
    out = []
    for seg in segment(clip):
        matrix = mfcc(seg, config)
        if coeff_indices != matrix.coeff_indices:
            matrix = select_coefficients(matrix, coeff_indices)
        out.append(matrix.values)
    return out


def _stratified_split(labels: np.ndarray, rng: np.random.Generator, val_fraction: float = 0.2):
    train_idx, val_idx = [], []
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        n_val = max(1, round(val_fraction * len(members))) if len(members) > 1 else 0
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    return np.sort(np.asarray(train_idx)), np.sort(np.asarray(val_idx))


def train_detector(
    kind: DetectorKind,
    manifest: str | Path | list[ManifestRow],
    cfg: nn.TrainConfig,
    feature_config: FeatureConfig = FeatureConfig(),
) -> tuple[Detector, dict]:
    """Full pipeline: ingest -> resample -> segment -> mfcc -> select -> train.

    Uses a stratified 80/20 train/validation split on segments (seeded by
    cfg.seed) and reports validation accuracy/precision/recall.
    """
    rows = read_manifest(manifest) if isinstance(manifest, (str, Path)) else list(manifest)
    coeffs = kind.coeff_indices

    features: list[np.ndarray] = []
    labels: list[int] = []
    for row in rows:
        label = _label_for(row, kind)
        if label is None:
            continue
        clip = read_wav_file(row.path)
        for values in extract_clip_features(clip, feature_config, coeffs):
            features.append(values)
            labels.append(label)

    label_array = np.asarray(labels)
    if len(label_array) == 0 or len(set(labels)) < 2:
        raise EmptyClass(f"manifest must contain both classes for {kind.value}")

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _stratified_split(label_array, rng)

    normalizer = Standardizer.fit([features[i] for i in train_idx])
    train_set = [(normalizer.apply(features[i]), int(label_array[i])) for i in train_idx]

    model = build_model(kind)
    report = nn.train(model, train_set, cfg)

    val_x = np.stack([normalizer.apply(features[i])[..., None] for i in val_idx])
    val_y = label_array[val_idx].astype(np.float64)
    metrics = nn.evaluate(model, val_x, val_y, cfg.threshold)
    metrics.update(
        n_train=len(train_idx),
        n_validation=len(val_idx),
        final_train_loss=report.final_loss,
        train_accuracy=report.accuracies[-1],
    )

    detector = Detector(kind, model, feature_config, coeffs, cfg.threshold, normalizer)
    return detector, metrics


@dataclass
class SegmentScore:
    offset_s: float
    p_prolongation: float
    p_repetition: float
    call_prolongation: bool
    call_repetition: bool


@dataclass
class DiagnosisReport:
    clip_id: str
    n_segments: int
    per_segment: list[SegmentScore]
    severity_prolongation: float | None
    severity_repetition: float | None

    def to_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "n_segments": self.n_segments,
            "per_segment": [
                {
                    "offset_s": s.offset_s,
                    "p_prolongation": s.p_prolongation,
                    "p_repetition": s.p_repetition,
                    "call_prolongation": s.call_prolongation,
                    "call_repetition": s.call_repetition,
                }
                for s in self.per_segment
            ],
            "severity": {
                "prolongation": self.severity_prolongation,
                "repetition": self.severity_repetition,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosisReport":
        return cls(
            clip_id=data["clip_id"],
            n_segments=data["n_segments"],
            per_segment=[SegmentScore(**entry) for entry in data["per_segment"]],
            severity_prolongation=data["severity"]["prolongation"],
            severity_repetition=data["severity"]["repetition"],
        )


def diagnose(
    prolongation: Detector,
    repetition: Detector,
    clip: AudioClip,
    clip_id: str = "clip",
) -> DiagnosisReport:
    """Score every 1-second segment with both detectors.

    Severity is the percentage of segments called positive; a clip too
    short to yield any segment gets null severities.
    """
    if prolongation.feature_config != repetition.feature_config:
        raise ValueError("detectors were trained with different feature configs")
    config = prolongation.feature_config

    clip = resample(clip, config.sample_rate)
    scores = []
    for seg in segment(clip):
        matrix = mfcc(seg, config)
        p_pro = prolongation.score(matrix)
        p_rep = repetition.score(matrix)
        scores.append(
            SegmentScore(
                offset_s=seg.offset_seconds,
                p_prolongation=p_pro,
                p_repetition=p_rep,
                call_prolongation=p_pro >= prolongation.threshold,
                call_repetition=p_rep >= repetition.threshold,
            )
        )

    if scores:
        sev_pro = severity_index([s.call_prolongation for s in scores], DetectorKind.PROLONGATION).value
        sev_rep = severity_index([s.call_repetition for s in scores], DetectorKind.REPETITION).value
    else:
        sev_pro = sev_rep = None
    return DiagnosisReport(clip_id, len(scores), scores, sev_pro, sev_rep)
