"""Rule-derived therapy dataset, polynomial-kernel SVM recommender, level policy.

The seed dataset enumerates all 64 (prolongation, repetition,
improvement) quartile triples. Each therapy is driven by one severity
variable: it is labeled 1 exactly when that severity exceeds the
improvement bucket by at least 2. One binary SVM per therapy
(one-vs-rest) is trained on the triples with SMO; difficulty levels are
a deterministic post-rule on the profile, not a model output.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .assessment import StutterProfile
from .errors import StutterKitError

LEVELS = ("easy", "medium", "hard")


class SingleClass(StutterKitError):
    """SMO needs both classes present."""


class NoConvergence(StutterKitError):
    """SMO sweep budget exhausted before the KKT conditions held."""


class NotTrained(StutterKitError):
    """Recommendation requested from an untrained recommender."""


@dataclass(frozen=True)
class TherapySpec:
    name: str
    driver: str  # which severity variable gates the therapy

    def __post_init__(self):
        if self.driver not in ("prolongation", "repetition"):
            raise ValueError(f"driver must be prolongation or repetition, got {self.driver!r}")


@dataclass(frozen=True)
class TherapyCatalog:
    therapies: tuple[TherapySpec, ...]

    def __post_init__(self):
        if not self.therapies:
            raise ValueError("catalog needs at least one therapy")
        names = [t.name for t in self.therapies]
        if len(set(names)) != len(names):
            raise ValueError("therapy names must be unique")

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.therapies]

    @classmethod
    def default(cls) -> "TherapyCatalog":
        return cls((TherapySpec("Therapy 1", "prolongation"), TherapySpec("Therapy 2", "repetition")))


@dataclass(frozen=True)
class RuleDatasetRow:
    prolongation: int
    repetition: int
    improvement: int
    labels: tuple[int, ...]  # one 0/1 per catalog therapy

    @property
    def features(self) -> tuple[int, int, int]:
        return (self.prolongation, self.repetition, self.improvement)


def rule_label(therapy: TherapySpec, prolongation: int, repetition: int, improvement: int) -> int:
    driver = prolongation if therapy.driver == "prolongation" else repetition
    return 1 if driver - improvement >= 2 else 0


def generate_rule_dataset(catalog: TherapyCatalog = TherapyCatalog.default()) -> list[RuleDatasetRow]:
    """All 64 quartile triples with per-therapy labels, in (p, r, i) order."""
    rows = []
    for p, r, i in product((1, 2, 3, 4), repeat=3):
        labels = tuple(rule_label(t, p, r, i) for t in catalog.therapies)
        rows.append(RuleDatasetRow(p, r, i, labels))
    return rows


def write_rule_dataset_csv(rows: list[RuleDatasetRow], path: str | Path, catalog: TherapyCatalog) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prolongation", "repetition", "improvement", *catalog.names])
        for row in rows:
            writer.writerow([row.prolongation, row.repetition, row.improvement, *row.labels])


def read_rule_dataset_csv(path: str | Path) -> tuple[list[RuleDatasetRow], list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["prolongation", "repetition", "improvement"]:
            raise ValueError("rule dataset must start with prolongation,repetition,improvement")
        names = header[3:]
        rows = []
        for record in reader:
            if not record:
                continue
            p, r, i = (int(v) for v in record[:3])
            rows.append(RuleDatasetRow(p, r, i, tuple(int(v) for v in record[3:])))
    return rows, names


@dataclass(frozen=True)
class PolyKernel:
    degree: int = 3
    gamma: float = 1.0 / 3.0
    coef0: float = 1.0

    def __call__(self, a, b) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        return (self.gamma * (a @ b.T) + self.coef0) ** self.degree

    def to_dict(self) -> dict:
        return {"d": self.degree, "gamma": self.gamma, "r": self.coef0}

    @classmethod
    def from_dict(cls, data: dict) -> "PolyKernel":
        return cls(int(data["d"]), float(data["gamma"]), float(data["r"]))


DEFAULT_C = 10.0
DEFAULT_TOL = 1e-3
DEFAULT_MAX_PASSES = 200


def _canonical_labels(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).ravel()
    values = set(np.unique(y).tolist())
    if values <= {0.0, 1.0}:
        y = 2.0 * y - 1.0
    elif not values <= {-1.0, 1.0}:
        raise ValueError(f"labels must be binary 0/1 or -1/+1, got {sorted(values)}")
    if len(set(np.unique(y).tolist())) < 2:
        raise SingleClass("both classes are required to train an SVM")
    return y


@dataclass
class SvmClassifier:
    """One trained soft-margin binary SVM (dual form)."""

    support_vectors: np.ndarray  # (n_sv, n_features)
    alphas: np.ndarray  # (n_sv,), each in (0, C]
    labels: np.ndarray  # (n_sv,), each +-1
    bias: float
    kernel: PolyKernel
    C: float
    support_indices: np.ndarray  # positions in the training set

    def decision_function(self, x) -> np.ndarray:
        k = self.kernel(np.atleast_2d(np.asarray(x, dtype=np.float64)), self.support_vectors)
        return k @ (self.alphas * self.labels) + self.bias

    def predict(self, x) -> np.ndarray:
        """0/1 predictions (decision >= 0 maps to 1)."""
        return (self.decision_function(x) >= 0.0).astype(int)


def smo_train(
    x,
    labels,
    kernel: PolyKernel = PolyKernel(),
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> SvmClassifier:
    """Sequential minimal optimization on the dual soft-margin problem.

    Each step optimizes the maximal-violating pair analytically; ties
    break on the lowest index, so training is fully deterministic. The
    solver stops when the worst KKT violation is within tol, and raises
    NoConvergence if the pair-update budget (max_passes sweeps' worth)
    runs out first.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = _canonical_labels(labels)
    n = len(y)
    if x.shape[0] != n:
        raise ValueError("feature/label row counts differ")

    gram = kernel(x, x)
    alphas = np.zeros(n)
    margins = np.zeros(n)  # S_i = sum_j alpha_j y_j K_ij
    eps = 1e-12

    converged = False
    for _step in range(max_passes * n):
        # KKT screening: feasible ascent directions per the equality constraint
        slack = y - margins
        can_up = ((y > 0) & (alphas < C - eps)) | ((y < 0) & (alphas > eps))
        can_down = ((y < 0) & (alphas < C - eps)) | ((y > 0) & (alphas > eps))
        up = np.where(can_up, slack, -np.inf)
        down = np.where(can_down, slack, np.inf)
        i = int(np.argmax(up))
        j = int(np.argmin(down))
        if up[i] - down[j] <= tol:
            converged = True
            break

        eta = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        alpha_i, alpha_j = alphas[i], alphas[j]
        if y[i] != y[j]:
            low, high = max(0.0, alpha_j - alpha_i), min(C, C + alpha_j - alpha_i)
        else:
            low, high = max(0.0, alpha_i + alpha_j - C), min(C, alpha_i + alpha_j)
        if eta > 0:
            raw = alpha_j - y[j] * (up[i] - down[j]) / eta
        else:
            raw = high if -y[j] * (up[i] - down[j]) > 0 else low  # degenerate pair: jump to a bound
        new_j = float(np.clip(raw, low, high))
        new_i = alpha_i + y[i] * y[j] * (alpha_j - new_j)

        margins += (new_i - alpha_i) * y[i] * gram[i] + (new_j - alpha_j) * y[j] * gram[j]
        alphas[i], alphas[j] = new_i, new_j

    if not converged:
        raise NoConvergence(f"KKT gap above {tol} after {max_passes * n} pair updates")

    free = (alphas > eps) & (alphas < C - eps)
    if np.any(free):
        bias = float(np.mean((y - margins)[free]))
    else:
        bias = float((np.max(np.where(can_up, y - margins, -np.inf))
                      + np.min(np.where(can_down, y - margins, np.inf))) / 2.0)

    support = np.flatnonzero(alphas > 1e-8)
    return SvmClassifier(
        support_vectors=x[support].copy(),
        alphas=alphas[support].copy(),
        labels=y[support].copy(),
        bias=bias,
        kernel=kernel,
        C=float(C),
        support_indices=support,
    )


@dataclass
class ConstantPredictor:
    """Stand-in for a therapy column with only one label value."""

    value: int

    def predict(self, x) -> np.ndarray:
        return np.full(len(np.atleast_2d(x)), self.value, dtype=int)


@dataclass
class Recommender:
    kernel: PolyKernel
    C: float
    catalog: TherapyCatalog
    models: list  # SvmClassifier | ConstantPredictor, one per therapy

    def to_json(self) -> str:
        per_therapy = []
        for model in self.models:
            if isinstance(model, ConstantPredictor):
                per_therapy.append({"constant": model.value})
            else:
                per_therapy.append(
                    {
                        "support_vectors": model.support_vectors.tolist(),
                        "alphas": (model.alphas * model.labels).tolist(),  # signed dual coefs
                        "bias": model.bias,
                    }
                )
        payload = {
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "therapies": [{"name": t.name, "driver": t.driver} for t in self.catalog.therapies],
            "per_therapy": per_therapy,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Recommender":
        payload = json.loads(text)
        kernel = PolyKernel.from_dict(payload["kernel"])
        C = float(payload["C"])
        catalog = TherapyCatalog(tuple(TherapySpec(t["name"], t["driver"]) for t in payload["therapies"]))
        models = []
        for entry in payload["per_therapy"]:
            if "constant" in entry:
                models.append(ConstantPredictor(int(entry["constant"])))
                continue
            signed = np.asarray(entry["alphas"], dtype=np.float64)
            models.append(
                SvmClassifier(
                    support_vectors=np.asarray(entry["support_vectors"], dtype=np.float64),
                    alphas=np.abs(signed),
                    labels=np.sign(signed),
                    bias=float(entry["bias"]),
                    kernel=kernel,
                    C=C,
                    support_indices=np.arange(len(signed)),
                )
            )
        return cls(kernel, C, catalog, models)


def train_recommender(
    rows: list[RuleDatasetRow],
    catalog: TherapyCatalog = TherapyCatalog.default(),
    kernel: PolyKernel = PolyKernel(),
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> Recommender:
    """One independent one-vs-rest SVM per therapy column.

    A column with a single label value gets a flagged constant predictor
    instead of a classifier.
    """
    if not rows:
        raise ValueError("empty rule dataset")
    x = np.asarray([row.features for row in rows], dtype=np.float64)
    models = []
    for column, therapy in enumerate(catalog.therapies):
        labels = np.asarray([row.labels[column] for row in rows])
        if len(np.unique(labels)) < 2:
            warnings.warn(f"{therapy.name}: single-class column, using constant predictor")
            models.append(ConstantPredictor(int(labels[0])))
        else:
            models.append(smo_train(x, labels, kernel, C, tol, max_passes))
    return Recommender(kernel, C, catalog, models)


@dataclass(frozen=True)
class TherapyItem:
    therapy: str
    level: str


@dataclass(frozen=True)
class TherapyAssignment:
    items: tuple[TherapyItem, ...]

    def to_json(self) -> str:
        return json.dumps(
            {"items": [{"therapy": i.therapy, "level": i.level} for i in self.items]},
            sort_keys=True,
            indent=2,
        )


def difficulty_level(profile: StutterProfile) -> str:
    """Level policy: low severity + high improvement practices hard, the reverse easy."""
    p, r, i = profile.as_vector()
    if i >= 3 and max(p, r) <= 2:
        return "hard"
    if max(p, r) >= 3 and i <= 2:
        return "easy"
    return "medium"


def recommend(recommender: Recommender, profile: StutterProfile) -> TherapyAssignment:
    """Therapies whose SVM fires on the profile triple, each at the policy level."""
    if not recommender.models:
        raise NotTrained("recommender has no trained models")
    x = np.asarray([profile.as_vector()], dtype=np.float64)
    level = difficulty_level(profile)
    items = [
        TherapyItem(therapy.name, level)
        for therapy, model in zip(recommender.catalog.therapies, recommender.models)
        if int(model.predict(x)[0]) == 1
    ]
    return TherapyAssignment(tuple(items))
