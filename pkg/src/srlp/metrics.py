"""Three-class evaluation: accuracy, confusion matrix, macro and micro P/R/F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .types import N_CLASSES


@dataclass
class EvalReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    confusion: list[list[int]]  # rows = truth, cols = prediction
    per_class_counts: list[int]
    n_evaluated: int
    n_skipped: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    matrix = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        matrix[t, p] += 1
    return matrix


def _safe_div(num: float, den: float) -> float:
    # 0/0 cases count as 0 by convention.
    return num / den if den else 0.0


def report_from_confusion(matrix: np.ndarray, n_skipped: int = 0) -> EvalReport:
    total = int(matrix.sum())
    if total == 0:
        raise ValidationError("cannot evaluate an empty split")
    correct = int(np.trace(matrix))
    precisions, recalls, f1s = [], [], []
    for k in range(N_CLASSES):
        precision = _safe_div(matrix[k, k], matrix[:, k].sum())
        recall = _safe_div(matrix[k, k], matrix[k, :].sum())
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(_safe_div(2 * precision * recall, precision + recall))
    micro = correct / total  # single-label multiclass: micro P = R = F1 = accuracy
    return EvalReport(
        accuracy=correct / total,
        macro_precision=float(np.mean(precisions)),
        macro_recall=float(np.mean(recalls)),
        macro_f1=float(np.mean(f1s)),
        micro_precision=micro,
        micro_recall=micro,
        micro_f1=micro,
        confusion=matrix.tolist(),
        per_class_counts=matrix.sum(axis=1).tolist(),
        n_evaluated=total,
        n_skipped=n_skipped,
    )
