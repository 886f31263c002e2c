"""Accuracy and macro/micro averaged accuracy and AUC."""
import warnings

import numpy as np
import pandas as pd

from ..exceptions import LabelError, NoComputableAUCError, ShapeError, UndefinedInputError
from ..tensor.tensor import Tensor


def _as_array(values) -> np.ndarray:
    return values.data if isinstance(values, Tensor) else np.asarray(values)


def accuracy(preds: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of predictions equal to the labels.

    Raises:
        ShapeError: If the lengths differ.
        UndefinedInputError: If there are no predictions.

    Examples
    --------
    >>> sl.accuracy([0, 1, 1], [0, 1, 0])
    0.6666666666666666
    """
    preds, labels = np.asarray(preds), np.asarray(labels)
    if preds.shape != labels.shape:
        raise ShapeError(f"preds {preds.shape} and labels {labels.shape} differ")
    if not preds.size:
        raise UndefinedInputError("Accuracy of zero predictions is undefined.")
    return float((preds == labels).sum() / preds.size)


def auc(scores: np.ndarray, targets: np.ndarray) -> float:
    """Probability that a random positive scores above a random negative.

    Computed from midranks (the Mann-Whitney U statistic), so tied scores count
    one half.

    Raises:
        UndefinedInputError: If the targets lack positives or negatives.

    Examples
    --------
    >>> sl.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    0.75
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    targets = np.asarray(targets).ravel().astype(bool)
    n_pos = int(targets.sum())
    n_neg = len(targets) - n_pos
    if not n_pos or not n_neg:
        raise UndefinedInputError("AUC needs at least one positive and one negative.")
    ranks = pd.Series(scores).rank(method="average").to_numpy()
    u = ranks[targets].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


UNANNOTATED = -1


def macro_micro_metrics(
    scores: np.ndarray | Tensor,
    targets: np.ndarray,
    threshold: float = 0.5,
) -> dict[str, float]:
    """Macro and micro averaged accuracy and AUC of multi-label predictions.

    Macro metrics are the unweighted mean of the per-class metric over the
    annotated entries of each class. Micro metrics pool all annotated entries of
    all classes. A target of -1 marks an entry without annotation, so classes can
    have different numbers of decisions. A class without both positive and
    negative targets is left out of the macro AUC, with a warning.

    Args:
        scores: [N, m] probabilities. A score >= threshold predicts 1.
        targets: [N, m] bits, or -1 where the class is not annotated.
        threshold: Decision threshold of the accuracies.

    Returns:
        Dict with keys macro_acc, micro_acc, macro_auc and micro_auc.

    Raises:
        NoComputableAUCError: If no class has both positive and negative targets.
        UndefinedInputError: If there are no annotated targets.

    Examples
    --------
    Class 0 is right on 1 of 2 annotated rows, class 1 on 3 of 4.

    >>> scores = [[0.9, 0.8], [0.2, 0.7], [0.5, 0.6], [0.5, 0.9]]
    >>> targets = [[1, 1], [1, 1], [-1, 0], [-1, 1]]
    >>> metrics = sl.macro_micro_metrics(scores, targets)
    >>> metrics["macro_acc"], round(metrics["micro_acc"], 4)
    (0.625, 0.6667)
    """
    scores = _as_array(scores).astype(np.float64)
    targets = np.asarray(targets)
    if scores.ndim == 1:
        scores = scores[:, None]
    if targets.ndim == 1:
        targets = targets[:, None]
    if scores.shape != targets.shape:
        raise ShapeError(f"scores {scores.shape} and targets {targets.shape} differ")
    if not np.isin(targets, (UNANNOTATED, 0, 1)).all():
        raise LabelError(f"Targets must be 0, 1 or {UNANNOTATED} (not annotated).")

    annotated = targets != UNANNOTATED
    if not annotated.any():
        raise UndefinedInputError("Metrics of zero annotated predictions are undefined.")

    correct = (scores >= threshold) == (targets == 1)

    per_class_acc = []
    per_class_auc = []
    skipped = []
    for j in range(targets.shape[1]):
        mask = annotated[:, j]
        if not mask.any():
            skipped.append(j)
            continue
        per_class_acc.append(correct[mask, j].mean())
        n_pos = targets[mask, j].sum()
        if n_pos == 0 or n_pos == mask.sum():
            skipped.append(j)
            continue
        per_class_auc.append(auc(scores[mask, j], targets[mask, j]))

    if not per_class_auc:
        raise NoComputableAUCError(
            "No class has both positive and negative targets, so AUC is undefined."
        )
    if skipped:
        warnings.warn(
            f"Class(es) {skipped} have only one target value and are left out of "
            "the macro AUC."
        )

    return {
        "macro_acc": float(np.mean(per_class_acc)),
        "micro_acc": float(correct[annotated].mean()),
        "macro_auc": float(np.mean(per_class_auc)),
        "micro_auc": auc(scores[annotated], targets[annotated]),
    }
