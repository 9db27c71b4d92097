import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import auc_pairwise, ovr_auc_pairwise
from spikeseq.metrics import (
    ConfusionMatrix,
    MetricsReport,
    binary_auc,
    build_report,
    confusion,
    mean_report,
    roc_auc_ovr,
    summary,
)


def test_confusion_perfect():
    assert confusion([0, 1, 2], [0, 1, 2], 3).counts.tolist() == np.eye(3, dtype=int).tolist()


def test_confusion_total_miss():
    assert confusion([0, 0], [1, 1], 2).counts.tolist() == [[0, 2], [0, 0]]


def test_confusion_empty():
    cm = confusion([], [], 3)
    assert cm.total == 0 and not cm.counts.any()


@pytest.mark.parametrize("yt,yp", [([0, 1], [0]), ([0, 3], [0, 1]), ([-1], [0])])
def test_confusion_rejects_bad_input(yt, yp):
    with pytest.raises(ValueError):
        confusion(yt, yp, 3)


def test_summary_perfect():
    assert summary(ConfusionMatrix(np.diag([3, 4, 5]))) == (1.0, 1.0, 1.0, 1.0, 1.0)


def test_summary_hand_case():
    acc, prec, rec, f1w, f1m = summary(ConfusionMatrix(np.array([[2, 0], [1, 1]])))
    assert acc == pytest.approx(0.75, abs=1e-12)
    # P = [2/3, 1], R = [1, 1/2], F1 = [0.8, 2/3], supports [2, 2]
    assert prec == pytest.approx((2 / 3 + 1) / 2, abs=1e-12)
    assert rec == pytest.approx(0.75, abs=1e-12)
    assert f1w == pytest.approx((2 * 0.8 + 2 * (2 / 3)) / 4, abs=1e-12)
    assert f1m == pytest.approx((0.8 + 2 / 3) / 2, abs=1e-12)


def test_summary_zero_support_class_counts_in_macro():
    cm = ConfusionMatrix(np.array([[3, 0, 0], [0, 2, 0], [0, 0, 0]]))
    acc, _, _, f1w, f1m = summary(cm)
    assert acc == 1.0 and f1w == 1.0
    assert f1m == pytest.approx(2 / 3)


def test_summary_needs_records():
    with pytest.raises(ValueError):
        summary(ConfusionMatrix(np.zeros((2, 2), dtype=int)))


def test_auc_perfect():
    y = [0, 0, 1, 1, 2, 2]
    scores = np.eye(3)[y] * 0.9 + 0.05
    assert roc_auc_ovr(y, scores) == 1.0


def test_auc_all_ties():
    assert roc_auc_ovr([0, 1, 2, 1], np.full((4, 3), 0.3)) == 0.5


def test_auc_hand_case():
    y = [1, 0, 1, 0]
    col1 = [0.9, 0.8, 0.3, 0.2]
    assert binary_auc(np.array(y) == 1, col1) == 0.75
    scores = np.column_stack([1 - np.array(col1), col1])
    assert roc_auc_ovr(y, scores) == 0.75


def test_auc_skips_absent_classes():
    y = [0, 0, 1, 1]
    scores = np.array([[0.9, 0.1, 0.0], [0.8, 0.2, 0.0], [0.1, 0.9, 0.0], [0.3, 0.7, 0.0]])
    assert roc_auc_ovr(y, scores) == 1.0


def test_auc_needs_two_classes():
    with pytest.raises(ValueError):
        roc_auc_ovr([1, 1, 1], np.ones((3, 2)))


def cms(max_c=6, max_n=30):
    return st.integers(2, max_c).flatmap(
        lambda c: st.lists(st.integers(0, max_n), min_size=c * c, max_size=c * c)
        .filter(lambda v: sum(v) > 0)
        .map(lambda v: np.array(v).reshape(c, c))
    )


@settings(max_examples=300, deadline=None)
@given(counts=cms())
def test_weighted_recall_equals_accuracy(counts):
    acc, _, rec, _, _ = summary(ConfusionMatrix(counts))
    assert rec == pytest.approx(acc, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(data=st.data(), n=st.integers(2, 200), c=st.integers(2, 5))
def test_auc_matches_pairwise_bruteforce(data, n, c):
    y = data.draw(st.lists(st.integers(0, c - 1), min_size=n, max_size=n).filter(lambda v: len(set(v)) >= 2))
    # coarse grid so ties are common
    flat = data.draw(st.lists(st.integers(0, 6), min_size=n * c, max_size=n * c))
    scores = np.array(flat, dtype=float).reshape(n, c) / 6
    assert roc_auc_ovr(y, scores) == pytest.approx(ovr_auc_pairwise(y, scores), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(data=st.data(), n=st.integers(4, 60))
def test_auc_invariant_under_monotone_transform(data, n):
    y = data.draw(st.lists(st.integers(0, 2), min_size=n, max_size=n).filter(lambda v: len(set(v)) >= 2))
    # a grid keeps exp and the cubic strictly increasing in floating point too
    flat = data.draw(st.lists(st.integers(-24, 24), min_size=n * 3, max_size=n * 3))
    scores = np.array(flat, dtype=float).reshape(n, 3) / 8
    assert roc_auc_ovr(y, np.exp(scores)) == pytest.approx(roc_auc_ovr(y, scores), abs=1e-12)
    assert roc_auc_ovr(y, scores**3 + 2 * scores) == pytest.approx(roc_auc_ovr(y, scores), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(data=st.data(), n=st.integers(4, 60), c=st.integers(2, 5))
def test_relabeling_invariance(data, n, c):
    y = np.array(data.draw(st.lists(st.integers(0, c - 1), min_size=n, max_size=n).filter(lambda v: len(set(v)) >= 2)))
    scores = np.array(data.draw(st.lists(st.integers(0, 9), min_size=n * c, max_size=n * c)), float).reshape(n, c)
    perm = np.array(data.draw(st.permutations(range(c))))
    a, _ = build_report(y, scores, c)
    # class k becomes perm[k]; score column k moves to position perm[k]
    moved = np.empty_like(scores)
    moved[:, perm] = scores
    b, _ = build_report(perm[y], moved, c)
    # argmax breaks ties by lowest index, which a relabeling can change
    unique_max = np.all(np.sum(scores == scores.max(axis=1, keepdims=True), axis=1) == 1)
    if unique_max:
        for name in ("accuracy", "precision_weighted", "recall_weighted", "f1_weighted", "f1_macro"):
            assert getattr(a, name) == pytest.approx(getattr(b, name), abs=1e-12)
    assert a.roc_auc_ovr == pytest.approx(b.roc_auc_ovr, abs=1e-12)


def test_accuracy_is_mean_indicator(rng):
    y = rng.integers(0, 4, 100)
    scores = rng.random((100, 4))
    report, _ = build_report(y, scores, 4)
    assert report.accuracy == pytest.approx(np.mean(scores.argmax(axis=1) == y), abs=1e-12)


def test_report_json_and_time_exclusion():
    report, cm = build_report([0, 1, 1], [[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]], 2, ["a", "b"], 1.5)
    data = json.loads(report.to_json())
    for key in ("accuracy", "precision_weighted", "recall_weighted", "f1_weighted", "f1_macro",
                "roc_auc_ovr", "train_time_seconds"):
        assert key in data
    assert data["per_class"]["b"]["support"] == 2
    assert "train_time_seconds" not in json.loads(report.to_json(include_time=False))
    assert cm.to_csv(["a", "b"]).splitlines() == ["true\\pred,a,b", "a,1,0", "b,1,1"]


def test_mean_report():
    r1 = MetricsReport(0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0)
    r2 = MetricsReport(1.0, 1.0, 1.0, 1.0, 0.75, 0.9, 3.0)
    m = mean_report([r1, r2])
    assert m.accuracy == 0.75 and m.f1_macro == 0.625 and m.train_time_seconds == 2.0
    assert mean_report([r1]).values() == r1.values()


def test_report_range_check():
    with pytest.raises(ValueError):
        MetricsReport(1.2, 0, 0, 0, 0, 0)
