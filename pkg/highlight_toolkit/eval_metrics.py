"""Stratified dataset splits and chunk-level classification metrics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from ._errors import InvalidInputError
from .models import ConfusionMatrix, LabeledDataset
from .nn_core import Model, predict

logger = logging.getLogger(__name__)

# (train, validation, test) fractions per modality
SPLIT_FRACTIONS = {
    "audio": (0.5, 0.1, 0.4),
    "video": (0.7, 0.1, 0.2),
}
# minibatch size as a fraction of the training set
BATCH_FRACTIONS = {
    "audio": 0.045,
    "video": 0.012,
}


def split_balanced(dataset: LabeledDataset, fractions: Tuple[float, float, float],
                   seed: int) -> Tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Random train/validation/test split stratified by label."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise InvalidInputError(f"Need three positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidInputError(f"Split fractions must sum to 1, got {sum(fractions)}")

    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for label in (0, 1):
        indices = np.flatnonzero(dataset.labels == label)
        indices = indices[rng.permutation(indices.size)]
        n_train = int(round(fractions[0] * indices.size))
        n_val = int(round(fractions[1] * indices.size))
        parts[0].append(indices[:n_train])
        parts[1].append(indices[n_train:n_train + n_val])
        parts[2].append(indices[n_train + n_val:])

    splits = []
    for name, chunks in zip(("train", "val", "test"), parts):
        indices = np.sort(np.concatenate(chunks))
        if indices.size == 0:
            raise InvalidInputError(f"The {name} split of {len(dataset)} samples is empty")
        splits.append(dataset.subset(indices))
    logger.info(f"Split {len(dataset)} {dataset.modality} samples into "
                f"{len(splits[0])}/{len(splits[1])}/{len(splits[2])}")
    return tuple(splits)


def confusion_from_predictions(predicted: np.ndarray, expected: np.ndarray) -> ConfusionMatrix:
    predicted = np.asarray(predicted, dtype=np.int64)
    expected = np.asarray(expected, dtype=np.int64)
    return ConfusionMatrix(
        tp=int(np.sum((predicted == 1) & (expected == 1))),
        fn=int(np.sum((predicted == 0) & (expected == 1))),
        fp=int(np.sum((predicted == 1) & (expected == 0))),
        tn=int(np.sum((predicted == 0) & (expected == 0))),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _f1(precision: float, recall: float) -> float:
    return 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


@dataclass(frozen=True)
class EvaluationReport:
    counts: ConfusionMatrix
    accuracy: float
    recall: float
    precision: float
    f1: float
    per_class: Dict[str, Dict[str, float]]

    @classmethod
    def from_counts(cls, counts: ConfusionMatrix) -> "EvaluationReport":
        """Metrics from confusion counts; recall/precision/f1 are macro averages over both classes."""
        per_class = {
            "highlight": {
                "precision": _ratio(counts.tp, counts.tp + counts.fp),
                "recall": _ratio(counts.tp, counts.tp + counts.fn),
            },
            "non_highlight": {
                "precision": _ratio(counts.tn, counts.tn + counts.fn),
                "recall": _ratio(counts.tn, counts.tn + counts.fp),
            },
        }
        for stats in per_class.values():
            stats["f1"] = _f1(stats["precision"], stats["recall"])
        precision = (per_class["highlight"]["precision"] + per_class["non_highlight"]["precision"]) / 2.0
        recall = (per_class["highlight"]["recall"] + per_class["non_highlight"]["recall"]) / 2.0
        return cls(
            counts=counts,
            accuracy=(counts.tp + counts.tn) / counts.total,
            recall=recall,
            precision=precision,
            f1=_f1(precision, recall),
            per_class=per_class,
        )

    def to_dict(self) -> dict:
        return {
            "counts": {"tp": self.counts.tp, "fn": self.counts.fn, "fp": self.counts.fp, "tn": self.counts.tn},
            "normalized_percent": self.counts.normalized_percent(),
            "accuracy": self.accuracy,
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "per_class": self.per_class,
        }

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def evaluate(model: Model, test: LabeledDataset, decision_threshold: float = 0.5) -> EvaluationReport:
    """Chunk-level confusion matrix and metrics; a chunk is predicted positive when score > threshold."""
    if len(test.inputs) == 0:
        raise InvalidInputError("Cannot evaluate on an empty test set")
    scores = predict(model, test.inputs)
    predicted = (scores > decision_threshold).astype(np.int64)
    report = EvaluationReport.from_counts(confusion_from_predictions(predicted, test.labels))
    logger.info(f"Evaluated {len(test)} {test.modality} chunks: accuracy={report.accuracy:.4f}")
    return report
