import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_auc
from spsl.exceptions import InvalidInputError, UndefinedMetricError
from spsl.metrics import MetricsReport, accuracy, auc_roc, recall_per_class


def scored_sets(max_n=50):
    """Score/label lists with both classes present; scores drawn from a small pool to force ties."""
    return st.integers(2, max_n).flatmap(
        lambda n: st.tuples(
            st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]), min_size=n, max_size=n),
            st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda l: 0 < sum(l) < len(l)),
        )
    )


def test_accuracy_examples():
    assert accuracy([1, 0, 1, 1], [1, 0, 0, 1]) == 0.75
    assert accuracy([[0.2, 0.8], [0.9, 0.1]], [1, 0]) == 1.0


def test_accuracy_errors():
    with pytest.raises(InvalidInputError):
        accuracy([], [])
    with pytest.raises(InvalidInputError):
        accuracy([1, 0], [1])


def test_auc_worked_example():
    scores = [0.8, 0.4, 0.6, 0.2]
    labels = [1, 1, 0, 0]
    assert auc_roc(scores, labels) == 0.75


def test_auc_perfect_and_inverted():
    assert auc_roc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert auc_roc([0.1, 0.2, 0.9], [1, 1, 0]) == 0.0


def test_auc_all_tied_is_half():
    assert auc_roc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_single_class_undefined():
    with pytest.raises(UndefinedMetricError):
        auc_roc([0.1, 0.2], [1, 1])


def test_auc_rejects_bad_labels_and_scores():
    with pytest.raises(InvalidInputError):
        auc_roc([0.1, 0.2], [0, 2])
    with pytest.raises(InvalidInputError):
        auc_roc([0.1, np.nan], [0, 1])
    with pytest.raises(InvalidInputError):
        auc_roc([0.1], [0, 1])


@given(scored_sets())
def test_auc_matches_pairwise_oracle(data):
    scores, labels = data
    assert auc_roc(scores, labels) == brute_auc(scores, labels)


@given(scored_sets())
def test_auc_label_flip_complements(data):
    scores, labels = data
    flipped = [1 - l for l in labels]
    assert auc_roc(scores, labels) + auc_roc(scores, flipped) == pytest.approx(1.0, abs=1e-12)


@given(scored_sets())
def test_auc_invariant_under_monotone_map(data):
    scores, labels = data
    warped = np.exp(3.0 * np.asarray(scores)) - 7.0
    assert auc_roc(warped, labels) == auc_roc(scores, labels)


def test_recall_per_class():
    rec = recall_per_class([0, 1, 1, 1, 0], [0, 1, 0, 1, 1])
    assert rec == {0: 0.5, 1: 2 / 3}


def test_recall_omits_absent_class():
    assert recall_per_class([1, 1], [1, 1], n_classes=2) == {1: 1.0}


def test_recall_length_mismatch():
    with pytest.raises(InvalidInputError):
        recall_per_class([1], [1, 0])


def test_report_from_probabilities():
    proba = np.array([[0.9, 0.1], [0.3, 0.7], [0.6, 0.4], [0.2, 0.8]])
    rep = MetricsReport.from_probabilities(proba, [0, 1, 1, 1], {"seed": 3})
    assert rep.acc == 0.75 and rep.auc == 1.0
    assert rep.class_counts == {0: 1, 1: 3}
    assert rep.to_dict()["recall"] == {"0": 1.0, "1": 2 / 3}
    assert rep.config == {"seed": 3}


def test_report_single_class_has_no_auc():
    rep = MetricsReport.from_probabilities([[0.2, 0.8], [0.4, 0.6]], [1, 1])
    assert rep.auc is None and rep.acc == 1.0


def _counting_recall(pred, labels, c):
    hits = total = 0
    for p, t in zip(pred, labels):
        if t == c:
            total += 1
            hits += p == c
    return hits / total


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60))
def test_recall_and_accuracy_match_counting(pairs):
    pred, labels = map(list, zip(*pairs))
    rec = recall_per_class(pred, labels, n_classes=5)
    assert set(rec) == set(labels)
    for c, r in rec.items():
        assert r == pytest.approx(_counting_recall(pred, labels, c))
    assert accuracy(pred, labels) == pytest.approx(sum(p == t for p, t in pairs) / len(pairs))


def test_class_never_predicted_has_zero_recall():
    assert recall_per_class([0, 0, 0], [0, 1, 1])[1] == 0.0


@given(st.lists(st.integers(0, 2), min_size=30, max_size=30))
def test_balanced_mean_recall_equals_accuracy(noise):
    labels = np.repeat([0, 1, 2], 10)
    pred = np.array(noise)
    rec = recall_per_class(pred, labels)
    assert np.mean(list(rec.values())) == pytest.approx(accuracy(pred, labels))
