import sys
import warnings
from pathlib import Path

import numpy as np
import pytest
from sklearn.metrics import roc_auc_score


src = str(Path(__file__).parent.parent) + "/src"

sys.path.insert(0, src)

import ssllab as sl


def pairwise_auc(scores: np.ndarray, targets: np.ndarray) -> float:
    """O(P x N) oracle: wins plus half the ties over all positive-negative pairs."""
    pos = scores[targets == 1]
    neg = scores[targets == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def test_accuracy():
    assert sl.accuracy([0, 1, 1], [0, 1, 0]) == 2 / 3
    assert sl.accuracy(np.arange(5), np.arange(5)) == 1.0
    with pytest.raises(sl.UndefinedInputError):
        sl.accuracy([], [])
    with pytest.raises(sl.ShapeError):
        sl.accuracy([0, 1], [0])


def test_auc():
    assert sl.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert sl.auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert sl.auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    # every pair tied
    assert sl.auc([0.5, 0.5, 0.5], [0, 1, 1]) == 0.5
    with pytest.raises(sl.UndefinedInputError):
        sl.auc([0.1, 0.2], [1, 1])


def test_auc_matches_pairwise_oracle():
    rng = sl.make_rng(0)
    for i in range(500):
        n = int(rng.integers(2, 201))
        # few distinct values, so ties are common
        scores = rng.integers(0, 10, size=n) / 10
        targets = (rng.random(n) < 0.5).astype(int)
        targets[0], targets[1] = 0, 1
        assert sl.auc(scores, targets) == pytest.approx(pairwise_auc(scores, targets), abs=1e-12), i
        assert sl.auc(scores, targets) == pytest.approx(roc_auc_score(targets, scores), abs=1e-12), i


def test_macro_micro_worked_example():
    # class 0 right on 1 of 2 annotated rows, class 1 right on 3 of 4
    scores = np.array([[0.9, 0.8], [0.2, 0.7], [0.5, 0.6], [0.5, 0.9]])
    targets = np.array([[1, 1], [1, 1], [sl.UNANNOTATED, 0], [sl.UNANNOTATED, 1]])
    with pytest.warns(UserWarning, match=r"\[0\]"):
        metrics = sl.macro_micro_metrics(scores, targets)
    assert metrics["macro_acc"] == pytest.approx(0.625)
    assert metrics["micro_acc"] == pytest.approx(4 / 6)
    assert round(metrics["micro_acc"], 4) == 0.6667
    assert set(metrics) == {"macro_acc", "micro_acc", "macro_auc", "micro_auc"}


def test_dense_targets_pool_equally():
    scores = np.array([[0.9, 0.8], [0.2, 0.7], [0.6, 0.1], [0.3, 0.4]])
    targets = np.array([[1, 1], [0, 1], [0, 0], [1, 1]])
    metrics = sl.macro_micro_metrics(scores, targets)
    assert metrics["macro_acc"] == pytest.approx(0.625)
    assert metrics["micro_acc"] == pytest.approx(5 / 8)


def test_unannotated_entries_are_ignored():
    rng = sl.make_rng(2)
    for _ in range(20):
        scores = rng.integers(0, 5, size=(40, 3)) / 5
        targets = (rng.random((40, 3)) < 0.4).astype(int)
        targets[0], targets[1] = 0, 1
        masked = targets.copy()
        hidden = rng.random((40, 3)) < 0.3
        hidden[:2] = False
        masked[hidden] = sl.UNANNOTATED
        metrics = sl.macro_micro_metrics(scores, masked)

        keep = ~hidden
        per_class = [pairwise_auc(scores[keep[:, j], j], targets[keep[:, j], j]) for j in range(3)]
        assert metrics["macro_auc"] == pytest.approx(np.mean(per_class), abs=1e-12)
        assert metrics["micro_auc"] == pytest.approx(
            pairwise_auc(scores[keep], targets[keep]), abs=1e-12
        )
        correct = (scores >= 0.5) == (targets == 1)
        assert metrics["micro_acc"] == pytest.approx(correct[keep].mean())
        assert metrics["macro_acc"] == pytest.approx(
            np.mean([correct[keep[:, j], j].mean() for j in range(3)])
        )

    with pytest.raises(sl.UndefinedInputError):
        sl.macro_micro_metrics(np.zeros((2, 1)), np.full((2, 1), sl.UNANNOTATED))


def test_macro_micro_auc():
    rng = sl.make_rng(1)
    for _ in range(20):
        scores = rng.integers(0, 5, size=(30, 3)) / 5
        targets = (rng.random((30, 3)) < 0.4).astype(int)
        targets[0], targets[1] = 0, 1
        metrics = sl.macro_micro_metrics(scores, targets)
        per_class = [pairwise_auc(scores[:, j], targets[:, j]) for j in range(3)]
        assert metrics["macro_auc"] == pytest.approx(np.mean(per_class), abs=1e-12)
        assert metrics["micro_auc"] == pytest.approx(
            pairwise_auc(scores.ravel(), targets.ravel()), abs=1e-12
        )


def test_perfect_separation():
    scores = np.array([[0.9, 0.1], [0.1, 0.9], [0.8, 0.2]])
    targets = np.array([[1, 0], [0, 1], [1, 0]])
    metrics = sl.macro_micro_metrics(scores, targets)
    assert metrics["macro_auc"] == 1.0
    assert metrics["micro_auc"] == 1.0
    assert metrics["macro_acc"] == 1.0


def test_threshold_is_inclusive():
    metrics = sl.macro_micro_metrics(np.array([[0.5], [0.2]]), np.array([[1], [0]]))
    assert metrics["micro_acc"] == 1.0


def test_skipped_class_warns():
    scores = np.array([[0.9, 0.3], [0.2, 0.6], [0.7, 0.4]])
    targets = np.array([[1, 1], [0, 1], [1, 1]])
    with pytest.warns(UserWarning, match=r"\[1\]"):
        metrics = sl.macro_micro_metrics(scores, targets)
    assert metrics["macro_auc"] == 1.0


def test_no_computable_auc():
    with pytest.raises(sl.NoComputableAUCError):
        sl.macro_micro_metrics(np.array([[0.9], [0.2]]), np.array([[1], [1]]))
    with pytest.raises(sl.LabelError):
        sl.macro_micro_metrics(np.array([[0.9], [0.2]]), np.array([[2], [0]]))
    with pytest.raises(sl.ShapeError):
        sl.macro_micro_metrics(np.zeros((2, 2)), np.zeros((2, 3)))


def main():
    test_accuracy()
    test_auc()
    test_auc_matches_pairwise_oracle()
    test_macro_micro_auc()
    test_dense_targets_pool_equally()
    test_unannotated_entries_are_ignored()
    test_perfect_separation()
    test_threshold_is_inclusive()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        test_macro_micro_worked_example()
        test_no_computable_auc()


if __name__ == "__main__":
    main()
