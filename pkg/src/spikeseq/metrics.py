"""Classification metrics: confusion matrix, weighted/macro summaries, one-vs-rest ROC AUC."""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

METRIC_FIELDS = (
    "accuracy",
    "precision_weighted",
    "recall_weighted",
    "f1_weighted",
    "f1_macro",
    "roc_auc_ovr",
    "train_time_seconds",
)

CONVENTIONS = {
    "precision_recall": "weighted by true-class support",
    "f1_macro": "unweighted mean over all dataset classes, zero-support classes count as 0",
    "zero_division": 0.0,
    "roc_auc_ovr": "mean over classes with both positives and negatives in the evaluated set",
    "auc_scores": "softmax of time-averaged output spike rates",
}


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (C, C) int64; [true, predicted]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, classes: Sequence[str] | None = None) -> str:
        c = self.counts.shape[0]
        names = list(classes) if classes is not None else [str(i) for i in range(c)]
        out = io.StringIO()
        out.write("true\\pred," + ",".join(names) + "\n")
        for name, row in zip(names, self.counts):
            out.write(name + "," + ",".join(str(int(v)) for v in row) + "\n")
        return out.getvalue()


def confusion(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    for name, y in (("y_true", y_true), ("y_pred", y_pred)):
        if len(y) and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError(f"{name} has a class index outside 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den != 0)


def per_class(cm: ConfusionMatrix) -> dict[str, np.ndarray]:
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    precision = _safe_div(tp, counts.sum(axis=0))
    recall = _safe_div(tp, counts.sum(axis=1))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return {"precision": precision, "recall": recall, "f1": f1, "support": counts.sum(axis=1)}


def summary(cm: ConfusionMatrix) -> tuple[float, float, float, float, float]:
    """(accuracy, precision_weighted, recall_weighted, f1_weighted, f1_macro)."""
    total = cm.total
    if total < 1:
        raise ValueError("summary needs at least one evaluated record")
    pc = per_class(cm)
    weights = pc["support"] / total
    return (
        float(np.trace(cm.counts) / total),
        float(weights @ pc["precision"]),
        float(weights @ pc["recall"]),
        float(weights @ pc["f1"]),
        float(pc["f1"].mean()),
    )


def binary_auc(positive: np.ndarray, scores: np.ndarray) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie), via average ranks."""
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_auc_ovr(y_true, scores) -> float:
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != len(y_true):
        raise ValueError(f"scores must be (N, C) with N={len(y_true)}, got {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite values")
    if len(np.unique(y_true)) < 2:
        raise ValueError("ROC AUC needs at least 2 distinct classes in y_true")
    aucs = []
    for c in range(scores.shape[1]):
        positive = y_true == c
        if positive.any() and not positive.all():
            aucs.append(binary_auc(positive, scores[:, c]))
    return float(np.mean(aucs))


@dataclass
class MetricsReport:
    accuracy: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    f1_macro: float
    roc_auc_ovr: float
    train_time_seconds: float = 0.0
    per_class: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in METRIC_FIELDS[:-1]:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if self.train_time_seconds < 0:
            raise ValueError("train_time_seconds must be >= 0")

    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_FIELDS}

    def to_json(self, include_time: bool = True) -> str:
        data = asdict(self)
        if not include_time:
            data.pop("train_time_seconds")
        data["conventions"] = CONVENTIONS
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


def build_report(y_true, scores, n_classes: int, classes: Sequence[str] | None = None,
                 train_time_seconds: float = 0.0) -> tuple[MetricsReport, ConfusionMatrix]:
    """Report from per-record score rows; predictions are the row argmax."""
    scores = np.asarray(scores, dtype=np.float64)
    y_pred = scores.argmax(axis=1)
    cm = confusion(y_true, y_pred, n_classes)
    acc, prec, rec, f1w, f1m = summary(cm)
    pc = per_class(cm)
    names = list(classes) if classes is not None else [str(i) for i in range(n_classes)]
    breakdown = {
        name: {
            "precision": float(pc["precision"][i]),
            "recall": float(pc["recall"][i]),
            "f1": float(pc["f1"][i]),
            "support": int(pc["support"][i]),
        }
        for i, name in enumerate(names)
    }
    report = MetricsReport(acc, prec, rec, f1w, f1m, roc_auc_ovr(y_true, scores),
                           float(train_time_seconds), breakdown)
    return report, cm


def mean_report(reports: Sequence[MetricsReport]) -> MetricsReport:
    if not reports:
        raise ValueError("cannot average zero reports")
    means = {name: float(np.mean([getattr(r, name) for r in reports])) for name in METRIC_FIELDS}
    return MetricsReport(**means)
