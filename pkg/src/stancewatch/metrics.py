"""Evaluation suite: confusion matrix, precision/recall/F1, ROC, AUC.

ROC curves are one-vs-rest threshold sweeps over distinct score values in
descending order; tied scores move as a single block, which makes the
trapezoidal area under the curve exactly equal to the pairwise
Mann-Whitney statistic with ties counted half. Zero-denominator
precision/recall/F1 are defined as 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import CATEGORY_SLUGS, LabeledDataset
from .encoder import ModelParams, collate, forward_with_cache, predict_proba
from .errors import DataValidationError
from .tokenizer import Vocabulary, encode

N_CLASSES = 4


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[gold][predicted] over the 4 categories."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (N_CLASSES, N_CLASSES):
            raise DataValidationError(f"confusion matrix must be 4x4, got {c.shape}")
        if (c < 0).any():
            raise DataValidationError("confusion matrix entries must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def supports(self) -> np.ndarray:
        """Gold examples per class (row sums)."""
        return self.counts.sum(axis=1)


def confusion(preds: Sequence[int], golds: Sequence[int]) -> ConfusionMatrix:
    if len(preds) != len(golds):
        raise DataValidationError(
            f"got {len(preds)} predictions for {len(golds)} gold labels"
        )
    if len(preds) == 0:
        raise DataValidationError("cannot build a confusion matrix from zero examples")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for p, g in zip(preds, golds):
        if not (0 <= p < N_CLASSES and 0 <= g < N_CLASSES):
            raise DataValidationError(f"label out of range: pred={p} gold={g}")
        counts[g, p] += 1
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class PrfResult:
    precision: tuple[float, float, float, float]
    recall: tuple[float, float, float, float]
    f1: tuple[float, float, float, float]
    macro_f1: float
    weighted_f1: float
    accuracy: float


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def prf(cm: ConfusionMatrix) -> PrfResult:
    """Per-class precision/recall/F1 plus macro, support-weighted, accuracy."""
    counts = cm.counts
    tp = np.diag(counts).astype(np.float64)
    support = counts.sum(axis=1).astype(np.float64)
    predicted = counts.sum(axis=0).astype(np.float64)
    precision = [_safe_div(tp[c], predicted[c]) for c in range(N_CLASSES)]
    recall = [_safe_div(tp[c], support[c]) for c in range(N_CLASSES)]
    f1 = [_safe_div(2 * p * r, p + r) for p, r in zip(precision, recall)]
    total = counts.sum()
    return PrfResult(
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        macro_f1=float(np.mean(f1)),
        weighted_f1=float(np.dot(f1, support) / total),
        accuracy=float(tp.sum() / total),
    )


@dataclass(frozen=True)
class RocCurve:
    """Step curve from (0,0) to (1,1); coordinates non-decreasing."""

    fprs: tuple[float, ...]
    tprs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.fprs) != len(self.tprs) or len(self.fprs) < 2:
            raise DataValidationError("ROC curve needs matched fpr/tpr sequences, length >= 2")


def roc_points(scores: Sequence[float], binary_golds: Sequence[int]) -> RocCurve:
    """Threshold sweep over distinct scores descending, tied scores as one block."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(binary_golds, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise DataValidationError("scores and golds must be 1-d sequences of equal length")
    if not np.isin(y, (0, 1)).all():
        raise DataValidationError("binary golds must be 0 or 1")
    n_pos = int(y.sum())
    n_neg = int(len(y) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataValidationError("ROC/AUC undefined: gold vector contains a single class")

    order = np.argsort(-s, kind="stable")
    fprs = [0.0]
    tprs = [0.0]
    tp = 0
    fp = 0
    i = 0
    while i < len(order):
        j = i
        t = s[order[i]]
        while j < len(order) and s[order[j]] == t:
            j += 1
        block_pos = int(y[order[i:j]].sum())
        tp += block_pos
        fp += (j - i) - block_pos
        fprs.append(fp / n_neg)
        tprs.append(tp / n_pos)
        i = j
    return RocCurve(tuple(fprs), tuple(tprs))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area; equals the Mann-Whitney pair statistic with ties at half."""
    area = 0.0
    for k in range(1, len(curve.fprs)):
        dx = curve.fprs[k] - curve.fprs[k - 1]
        area += dx * (curve.tprs[k] + curve.tprs[k - 1]) / 2.0
    return area


@dataclass(frozen=True)
class EvalReport:
    confusion: ConfusionMatrix
    precision: tuple[float, float, float, float]
    recall: tuple[float, float, float, float]
    f1: tuple[float, float, float, float]
    macro_f1: float
    weighted_f1: float
    accuracy: float
    auc: tuple[float, float, float, float]
    roc_curves: tuple[RocCurve, RocCurve, RocCurve, RocCurve]
    n_examples: int


def predict_batches(
    params: ModelParams,
    vocab: Vocabulary,
    texts: Sequence[str],
    batch_size: int = 64,
) -> np.ndarray:
    """Probability matrix (n, 4) from inference-mode batched forwards."""
    if batch_size < 1:
        raise DataValidationError(f"batch_size must be >= 1, got {batch_size}")
    rows = []
    max_len = params.config.max_len
    for start in range(0, len(texts), batch_size):
        chunk = texts[start : start + batch_size]
        encs = [encode(vocab, text, max_len) for text in chunk]
        ids, mask = collate(encs, params.config)
        logits, _ = forward_with_cache(params, ids, mask)
        rows.append(predict_proba(logits))
    if not rows:
        return np.zeros((0, N_CLASSES), dtype=np.float64)
    return np.concatenate(rows, axis=0)


def evaluate(
    params: ModelParams,
    vocab: Vocabulary,
    testset: LabeledDataset,
    batch_size: int = 64,
) -> EvalReport:
    """Classify every test example and assemble the full report.

    Predictions are the argmax of the probability row; numpy's argmax takes
    the first maximum, which is the lowest-class-id tie-break. Per-class AUC
    is one-vs-rest on that class's probability column.
    """
    if not testset.examples:
        raise DataValidationError("test set is empty")
    texts = [t.text for t in testset.examples]
    golds = [int(t.gold_label) for t in testset.examples]
    probs = predict_batches(params, vocab, texts, batch_size)
    preds = probs.argmax(axis=1)
    cm = confusion(list(preds), golds)
    scores = prf(cm)
    curves = []
    aucs = []
    gold_arr = np.asarray(golds)
    for c in range(N_CLASSES):
        curve = roc_points(probs[:, c], (gold_arr == c).astype(np.int64))
        curves.append(curve)
        aucs.append(auc(curve))
    return EvalReport(
        confusion=cm,
        precision=scores.precision,
        recall=scores.recall,
        f1=scores.f1,
        macro_f1=scores.macro_f1,
        weighted_f1=scores.weighted_f1,
        accuracy=scores.accuracy,
        auc=tuple(aucs),
        roc_curves=tuple(curves),
        n_examples=len(golds),
    )


def report_to_dict(report: EvalReport) -> dict:
    per_class = {}
    for c, slug in enumerate(CATEGORY_SLUGS):
        per_class[slug] = {
            "precision": report.precision[c],
            "recall": report.recall[c],
            "f1": report.f1[c],
            "auc": report.auc[c],
            "support": int(report.confusion.supports[c]),
        }
    return {
        "n_examples": report.n_examples,
        "confusion_rows_gold_cols_pred": report.confusion.counts.tolist(),
        "per_class": per_class,
        "macro_f1": report.macro_f1,
        "weighted_f1": report.weighted_f1,
        "accuracy": report.accuracy,
    }


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_roc_csvs(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """One fpr,tpr CSV per class, named roc_<category>.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for c, slug in enumerate(CATEGORY_SLUGS):
        curve = report.roc_curves[c]
        lines = ["fpr,tpr"]
        for x, y in zip(curve.fprs, curve.tprs):
            lines.append(f"{x:.10f},{y:.10f}")
        p = out / f"roc_{slug}.csv"
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(p)
    return paths
