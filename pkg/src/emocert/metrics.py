"""Reliability, fairness and robustness statistics over prediction records.

Conventions, fixed so results are reproducible:
  * entropy uses the natural logarithm with 0*ln(0) = 0, so the 4-class
    maximum is ln(4) = 1.386294
  * argmax ties break toward the lowest class index
  * a class with zero predicted and zero actual positives contributes
    F1 = 0 to the macro average
  * demographic groups smaller than min_group_n are reported with their
    counts but excluded from accuracy-gap computation (default 30)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from emocert.data.manifest import AUGMENTATIONS, EMOTIONS

GROUP_ATTRIBUTES = ("gender", "race", "age_group")
DEFAULT_MIN_GROUP_N = 30
NUM_CLASSES = len(EMOTIONS)


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    probs: tuple[float, float, float, float]
    true_class: str
    predicted: str
    gender: str
    race: str
    age_group: str
    augmentation: str

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (NUM_CLASSES,) or (p < 0).any() or abs(p.sum() - 1.0) > 1e-6:
            raise ValueError(
                f"record {self.sample_id}: probs must be {NUM_CLASSES} non-negative values "
                f"summing to 1, got {self.probs}"
            )
        expected = EMOTIONS[int(p.argmax())]  # np.argmax takes the lowest index on ties
        if self.predicted != expected:
            raise ValueError(
                f"record {self.sample_id}: predicted {self.predicted!r} does not match "
                f"argmax(probs) {expected!r}"
            )
        for name, value, allowed in (
            ("true_class", self.true_class, EMOTIONS),
            ("augmentation", self.augmentation, AUGMENTATIONS),
        ):
            if value not in allowed:
                raise ValueError(f"record {self.sample_id}: unknown {name} {value!r}")

    @classmethod
    def from_probs(cls, sample_id, probs, true_class, gender, race, age_group, augmentation):
        probs = tuple(float(x) for x in probs)
        predicted = EMOTIONS[int(np.argmax(probs))]
        return cls(sample_id, probs, true_class, predicted, gender, race, age_group, augmentation)


def _require_nonempty(records) -> list:
    records = list(records)
    if not records:
        raise ValueError("no prediction records to evaluate")
    return records


def accuracy(records: list[PredictionRecord]) -> float:
    records = _require_nonempty(records)
    return sum(r.predicted == r.true_class for r in records) / len(records)


def confusion(records: list[PredictionRecord]) -> np.ndarray:
    """4x4 counts, rows = true class, columns = predicted class."""
    records = _require_nonempty(records)
    index = {e: i for i, e in enumerate(EMOTIONS)}
    matrix = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for r in records:
        matrix[index[r.true_class], index[r.predicted]] += 1
    return matrix


def macro_f1(records: list[PredictionRecord]) -> float:
    matrix = confusion(records)
    scores = []
    for c in range(NUM_CLASSES):
        tp = matrix[c, c]
        predicted = matrix[:, c].sum()
        actual = matrix[c, :].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        scores.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return float(np.mean(scores))


def mean_confidence(records: list[PredictionRecord]) -> float:
    records = _require_nonempty(records)
    return float(np.mean([max(r.probs) for r in records]))


def entropy(probs) -> float:
    """-sum(p * ln p) in nats, 0*ln(0) = 0."""
    p = np.asarray(probs, dtype=np.float64)
    nonzero = p[p > 0]
    return float(max(0.0, -(nonzero * np.log(nonzero)).sum()))


def mean_entropy(records: list[PredictionRecord]) -> float:
    records = _require_nonempty(records)
    return float(np.mean([entropy(r.probs) for r in records]))


@dataclass
class GroupStat:
    accuracy: float
    count: int
    included: bool  # count >= min_group_n, eligible for the gap


@dataclass
class GroupMetrics:
    attribute: str
    groups: dict[str, GroupStat]
    max_gap: float
    min_group_n: int

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "min_group_n": self.min_group_n,
            "max_gap": self.max_gap,
            "groups": {
                name: {"accuracy": g.accuracy, "count": g.count, "included": g.included}
                for name, g in self.groups.items()
            },
        }


def group_metrics(
    records: list[PredictionRecord], attribute: str, min_group_n: int = DEFAULT_MIN_GROUP_N
) -> GroupMetrics:
    """Per-group accuracy plus the max-minus-min gap over included groups."""
    records = _require_nonempty(records)
    if attribute not in GROUP_ATTRIBUTES:
        raise ValueError(f"attribute must be one of {GROUP_ATTRIBUTES}, got {attribute!r}")
    if min_group_n < 1:
        raise ValueError("min_group_n must be >= 1")
    totals: dict[str, int] = {}
    correct: dict[str, int] = {}
    for r in records:
        g = getattr(r, attribute)
        totals[g] = totals.get(g, 0) + 1
        correct[g] = correct.get(g, 0) + (r.predicted == r.true_class)
    groups = {
        name: GroupStat(correct[name] / n, n, n >= min_group_n)
        for name, n in sorted(totals.items())
    }
    included = [g.accuracy for g in groups.values() if g.included]
    if not included:
        raise ValueError(
            f"no {attribute} group reaches min_group_n={min_group_n}; cannot compute a gap"
        )
    gap = max(included) - min(included) if len(included) > 1 else 0.0
    return GroupMetrics(attribute, groups, gap, min_group_n)


def robustness_metrics(records: list[PredictionRecord], floor: float | None = None):
    """Accuracy per augmentation tag (tags absent from the records are omitted).

    Returns (per-tag accuracy, tags falling below the optional floor).
    """
    records = _require_nonempty(records)
    totals: dict[str, int] = {}
    correct: dict[str, int] = {}
    for r in records:
        totals[r.augmentation] = totals.get(r.augmentation, 0) + 1
        correct[r.augmentation] = correct.get(r.augmentation, 0) + (r.predicted == r.true_class)
    per_tag = {tag: correct[tag] / n for tag, n in sorted(totals.items())}
    flagged = [tag for tag, acc in per_tag.items() if floor is not None and acc < floor]
    return per_tag, flagged


@dataclass
class MetricsBundle:
    accuracy: float
    macro_f1: float
    mean_confidence: float
    mean_entropy: float
    confusion: list[list[int]]
    per_group: dict[str, GroupMetrics]
    per_augmentation: dict[str, float]
    record_count: int
    train_accuracy: float | None = None
    train_test_gap: float | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "mean_confidence": self.mean_confidence,
            "mean_entropy": self.mean_entropy,
            "confusion": self.confusion,
            "confusion_classes": list(EMOTIONS),
            "per_group": {attr: gm.to_dict() for attr, gm in self.per_group.items()},
            "per_augmentation": self.per_augmentation,
            "record_count": self.record_count,
            "train_accuracy": self.train_accuracy,
            "train_test_gap": self.train_test_gap,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsBundle":
        per_group = {}
        for attr, gm in data.get("per_group", {}).items():
            groups = {
                name: GroupStat(g["accuracy"], g["count"], g["included"])
                for name, g in gm["groups"].items()
            }
            per_group[attr] = GroupMetrics(attr, groups, gm["max_gap"], gm["min_group_n"])
        return cls(
            accuracy=data["accuracy"],
            macro_f1=data["macro_f1"],
            mean_confidence=data["mean_confidence"],
            mean_entropy=data["mean_entropy"],
            confusion=data["confusion"],
            per_group=per_group,
            per_augmentation=data.get("per_augmentation", {}),
            record_count=data.get("record_count", 0),
            train_accuracy=data.get("train_accuracy"),
            train_test_gap=data.get("train_test_gap"),
        )


def bundle(
    records: list[PredictionRecord],
    train_accuracy: float | None = None,
    min_group_n: int = DEFAULT_MIN_GROUP_N,
) -> MetricsBundle:
    records = _require_nonempty(records)
    acc = accuracy(records)
    per_group = {}
    for attr in GROUP_ATTRIBUTES:
        try:
            per_group[attr] = group_metrics(records, attr, min_group_n)
        except ValueError:
            pass  # no group met min_group_n; omitted, certification treats it as not evaluated
    per_aug, _ = robustness_metrics(records)
    return MetricsBundle(
        accuracy=acc,
        macro_f1=macro_f1(records),
        mean_confidence=mean_confidence(records),
        mean_entropy=mean_entropy(records),
        confusion=confusion(records).tolist(),
        per_group=per_group,
        per_augmentation=per_aug,
        record_count=len(records),
        train_accuracy=train_accuracy,
        train_test_gap=(train_accuracy - acc) if train_accuracy is not None else None,
    )


def confusion_to_csv(matrix) -> str:
    lines = ["true\\predicted," + ",".join(EMOTIONS)]
    for emotion, row in zip(EMOTIONS, matrix):
        lines.append(emotion + "," + ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


# -- prediction record files (JSON lines) ---------------------------------

def record_to_dict(r: PredictionRecord) -> dict:
    return {
        "sample_id": r.sample_id,
        "probs": list(r.probs),
        "true": r.true_class,
        "predicted": r.predicted,
        "gender": r.gender,
        "race": r.race,
        "age_group": r.age_group,
        "augmentation": r.augmentation,
    }


def write_records(records: list[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(record_to_dict(r)) + "\n")


def read_records(path: str | Path) -> list[PredictionRecord]:
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(
                PredictionRecord(
                    sample_id=obj["sample_id"],
                    probs=tuple(float(p) for p in obj["probs"]),
                    true_class=obj["true"],
                    predicted=obj["predicted"],
                    gender=obj["gender"],
                    race=obj["race"],
                    age_group=obj["age_group"],
                    augmentation=obj["augmentation"],
                )
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from exc
    return records
