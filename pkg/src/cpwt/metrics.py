"""Classification metrics from one-vs-rest confusion counts.

Each metric is computed as a single division of exact integer expressions.
Sensitivity == recall and F1 == Dice are therefore bit-for-bit equal (one
expression apiece), and the remaining textbook identities (error
complements accuracy, Dice = 2J/(1+J)) hold exactly over the rationals
the divisions are taken from.  Zero-denominator conventions: rate metrics
fall back to 0, MCC is 0 when any root factor vanishes, kappa is 0 when
expected agreement is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError

METRIC_NAMES = (
    "sensitivity",
    "specificity",
    "precision",
    "recall",
    "f1",
    "dice",
    "jaccard",
    "mcc",
    "accuracy",
    "error_rate",
    "kappa",
)

PEAK = 255.0


def confusion(
    actual: Sequence[int] | np.ndarray,
    predicted: Sequence[int] | np.ndarray,
    n_classes: int,
) -> np.ndarray:
    """Confusion matrix with rows = actual class, columns = predicted."""
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise ValueError("actual and predicted must be equal-length 1-D sequences")
    if actual.size == 0:
        raise ValueError("cannot build a confusion matrix from no samples")
    for name, labels in (("actual", actual), ("predicted", predicted)):
        if labels.min() < 0 or labels.max() >= n_classes:
            raise ValueError(f"{name} labels outside [0, {n_classes})")
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (actual, predicted), 1)
    return matrix


class BinaryCounts(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int


def binary_counts(matrix: np.ndarray, class_index: int) -> BinaryCounts:
    """One-vs-rest counts for a single class of a confusion matrix."""
    matrix = np.asarray(matrix, dtype=np.int64)
    total = int(matrix.sum())
    tp = int(matrix[class_index, class_index])
    fn = int(matrix[class_index].sum()) - tp
    fp = int(matrix[:, class_index].sum()) - tp
    tn = total - tp - fn - fp
    return BinaryCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def binary_metrics(counts: BinaryCounts) -> dict[str, float]:
    """All eleven metrics for one one-vs-rest split.

    sensitivity/recall and f1/dice share one expression apiece, so the
    identities are exact by construction.
    """
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    total = tp + fp + tn + fn
    if total == 0:
        raise ValueError("metrics need at least one sample")
    sensitivity = _ratio(tp, tp + fn)
    specificity = _ratio(tn, tn + fp)
    precision = _ratio(tp, tp + fp)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn)
    jaccard = _ratio(tp, tp + fp + fn)
    accuracy = (tp + tn) / total
    error_rate = (fp + fn) / total

    mcc_factors = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if mcc_factors == 0:
        mcc = 0.0
    else:
        mcc = (tp * tn - fp * fn) / math.sqrt(mcc_factors)

    # kappa = (P_o - P_e) / (1 - P_e), reduced to one integer fraction by
    # multiplying through with total**2.
    expected_num = (tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)
    kappa_num = total * (tp + tn) - expected_num
    kappa_den = total * total - expected_num
    kappa = _ratio(kappa_num, kappa_den)

    return {
        "sensitivity": sensitivity,
        "specificity": specificity,
        "precision": precision,
        "recall": sensitivity,
        "f1": f1,
        "dice": f1,
        "jaccard": jaccard,
        "mcc": mcc,
        "accuracy": accuracy,
        "error_rate": error_rate,
        "kappa": kappa,
    }


@dataclass
class MetricsReport:
    """Per-class and macro-averaged metrics for one evaluation."""

    class_names: list[str]
    matrix: np.ndarray
    counts: list[BinaryCounts]
    per_class: list[dict[str, float]]
    macro: dict[str, float] = field(default_factory=dict)

    @property
    def overall_accuracy(self) -> float:
        return int(np.trace(self.matrix)) / int(self.matrix.sum())

    def to_dict(self) -> dict:
        return {
            "classes": list(self.class_names),
            "confusion": self.matrix.tolist(),
            "overall_accuracy": self.overall_accuracy,
            "per_class": [
                {
                    "class": name,
                    "tp": c.tp,
                    "fp": c.fp,
                    "tn": c.tn,
                    "fn": c.fn,
                    **{m: values[m] for m in METRIC_NAMES},
                }
                for name, c, values in zip(
                    self.class_names, self.counts, self.per_class
                )
            ],
            "macro": {m: self.macro[m] for m in METRIC_NAMES},
        }

    def to_csv(self) -> str:
        header = "class,tp,fp,tn,fn," + ",".join(METRIC_NAMES)
        lines = [header]
        for name, c, values in zip(self.class_names, self.counts, self.per_class):
            cells = [name, str(c.tp), str(c.fp), str(c.tn), str(c.fn)]
            cells += [repr(values[m]) for m in METRIC_NAMES]
            lines.append(",".join(cells))
        macro_cells = ["macro", "", "", "", ""]
        macro_cells += [repr(self.macro[m]) for m in METRIC_NAMES]
        lines.append(",".join(macro_cells))
        return "\n".join(lines) + "\n"


def report(
    matrix: np.ndarray, class_names: Sequence[str] | None = None
) -> MetricsReport:
    """Full metric report from a confusion matrix (rows = actual)."""
    matrix = np.asarray(matrix, dtype=np.int64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("confusion matrix must be square")
    if matrix.min() < 0:
        raise ValueError("confusion matrix has negative counts")
    if matrix.sum() == 0:
        raise ValueError("confusion matrix is empty")
    k = matrix.shape[0]
    if class_names is None:
        names = [str(i) for i in range(k)]
    else:
        names = [str(n) for n in class_names]
        if len(names) != k:
            raise ValueError("class_names length does not match the matrix")
    counts = [binary_counts(matrix, i) for i in range(k)]
    per_class = [binary_metrics(c) for c in counts]
    macro = {
        m: float(np.mean([values[m] for values in per_class])) for m in METRIC_NAMES
    }
    return MetricsReport(
        class_names=names,
        matrix=matrix,
        counts=counts,
        per_class=per_class,
        macro=macro,
    )


class RocCurve(NamedTuple):
    """Operating points swept over distinct scores, plus trapezoidal AUC."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc(scores: np.ndarray, positive: np.ndarray) -> RocCurve:
    """One-vs-rest ROC: predict positive where score >= threshold.

    Thresholds are the distinct scores in descending order, preceded by an
    infinity anchor where nothing is predicted positive, so the curve
    always starts at (0, 0) and ends at (1, 1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    if scores.shape != positive.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D arrays")
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs at least one positive and one negative sample")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_positive = positive[order]
    tp_cum = np.cumsum(sorted_positive)
    fp_cum = np.cumsum(~sorted_positive)
    # Last index of each run of equal scores: every threshold admits the
    # whole run at once.
    boundary = np.flatnonzero(np.diff(sorted_scores, append=-np.inf) != 0.0)
    thresholds = np.concatenate([[np.inf], sorted_scores[boundary]])
    tpr = np.concatenate([[0.0], tp_cum[boundary] / n_pos])
    fpr = np.concatenate([[0.0], fp_cum[boundary] / n_neg])
    auc = float(((tpr[1:] + tpr[:-1]) * np.diff(fpr)).sum() / 2.0)
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc)


def mse_psnr(reference: np.ndarray, test: np.ndarray) -> tuple[float, float]:
    """Mean squared error and peak signal-to-noise ratio (dB, peak 255).

    Identical inputs have MSE 0; PSNR is then math.inf as the saturation
    sentinel.
    """
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ValueError("inputs must share a shape")
    mse = float(np.mean((reference - test) ** 2))
    if mse == 0.0:
        return 0.0, math.inf
    return mse, 10.0 * math.log10(PEAK * PEAK / mse)
