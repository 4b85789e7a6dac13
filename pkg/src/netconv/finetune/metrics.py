"""Classification metrics computed from an integer confusion matrix."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass
class EvalReport:
    confusion: np.ndarray  # (K, K) counts, rows are true classes
    per_class: list
    macro_precision: float
    macro_recall: float
    macro_f1: float

    @property
    def num_classes(self) -> int:
        return self.confusion.shape[0]

    @property
    def accuracy(self) -> float:
        return _ratio(int(np.trace(self.confusion)), int(self.confusion.sum()))

    @classmethod
    def from_confusion(cls, confusion) -> "EvalReport":
        cm = np.asarray(confusion, dtype=np.int64)
        if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {cm.shape}")
        tp = np.diag(cm)
        predicted = cm.sum(axis=0)
        support = cm.sum(axis=1)
        per_class = []
        for k in range(cm.shape[0]):
            p = _ratio(int(tp[k]), int(predicted[k]))
            r = _ratio(int(tp[k]), int(support[k]))
            f = 2 * p * r / (p + r) if p + r > 0 else 0.0
            per_class.append(ClassMetrics(p, r, f, int(support[k])))
        present = [m for m in per_class if m.support > 0]
        if present:
            macro = [float(np.mean([getattr(m, a) for m in present])) for a in ("precision", "recall", "f1")]
        else:
            macro = [0.0, 0.0, 0.0]
        return cls(cm, per_class, *macro)

    @classmethod
    def from_predictions(cls, y_true, y_pred, num_classes: int) -> "EvalReport":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape:
            raise ValueError("y_true and y_pred differ in length")
        for arr in (y_true, y_pred):
            if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
                raise ValueError(f"label outside [0, {num_classes})")
        cm = np.zeros((num_classes, num_classes), dtype=np.int64)
        np.add.at(cm, (y_true, y_pred), 1)
        return cls.from_confusion(cm)

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": [
                {"class": k, "precision": m.precision, "recall": m.recall, "f1": m.f1, "support": m.support}
                for k, m in enumerate(self.per_class)
            ],
            "confusion": self.confusion.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_confusion(json.loads(text)["confusion"])

    def __eq__(self, other):
        return isinstance(other, EvalReport) and np.array_equal(self.confusion, other.confusion)
