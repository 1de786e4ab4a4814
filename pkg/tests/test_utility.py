import numpy as np
import pytest

from privselect import additive_noise, rotation_perturb, stratified_folds
from privselect._validation import PrivSelectError, PrivSelectWarning
from privselect.dataset import SplitPlan
from privselect.utility import (
    CLASSIFIERS,
    Classifier,
    accuracy,
    cross_validated_accuracy,
    default_classifiers,
    min_utility_guarantee,
)


@pytest.fixture(scope="module")
def plan(blobs):
    return stratified_folds(blobs, 5, seed=0)


def test_accuracy_examples():
    assert accuracy(["a", "b"], ["a", "b"]) == 1.0
    # TP=3, TN=5, FP=1, FN=1
    truth = [1] * 4 + [0] * 6
    pred = [1, 1, 1, 0] + [0] * 5 + [1]
    assert accuracy(pred, truth) == 0.8
    assert accuracy(["x", "y", "z", "x"], ["x", "z", "z", "y"]) == 0.5
    with pytest.raises(PrivSelectError, match="length"):
        accuracy([1, 2], [1])
    with pytest.raises(PrivSelectError):
        accuracy([], [])


def test_classifier_defaults_and_validation():
    assert Classifier("knn").hyperparams == {"k": 1}
    assert Classifier("decision_tree").hyperparams == {"max_depth": 12, "min_leaf": 2}
    assert Classifier("gaussian_nb").build().var_smoothing == 1e-9
    assert [c.kind for c in default_classifiers()] == list(CLASSIFIERS)
    with pytest.raises(PrivSelectError, match="unknown classifier"):
        Classifier("svm")
    with pytest.raises(PrivSelectError, match=">= 1"):
        Classifier("knn", {"k": 0})
    with pytest.raises(PrivSelectError, match="does not accept"):
        Classifier("knn", {"depth": 3})


@pytest.mark.parametrize("kind", CLASSIFIERS)
def test_separable_blobs(blobs, plan, kind):
    assert cross_validated_accuracy(blobs, blobs.labels, Classifier(kind), plan) >= 0.98


@pytest.mark.parametrize("kind", CLASSIFIERS)
def test_shuffled_labels_near_chance(blobs, kind):
    labels = np.random.default_rng(5).permutation(blobs.labels)
    shuffled_plan = stratified_folds(labels, 5, seed=0)
    acc = cross_validated_accuracy(blobs, labels, Classifier(kind), shuffled_plan)
    assert abs(acc - 0.5) <= 0.1


def test_needs_two_folds(blobs):
    one_fold = SplitPlan(np.zeros(blobs.n_records, dtype=int), 1, 0)
    with pytest.raises(PrivSelectError, match="at least 2 folds"):
        cross_validated_accuracy(blobs, blobs.labels, Classifier("knn"), one_fold)


def test_missing_class_in_training_fold_warns():
    X = np.arange(10.0)[:, None]
    labels = np.array(["a"] * 9 + ["b"])
    folds = np.array([0, 1] * 4 + [0, 0])
    with pytest.warns(PrivSelectWarning, match="lacks classes"):
        cross_validated_accuracy(X, labels, Classifier("knn"), SplitPlan(folds, 2, 0))


def test_pool_guarantee(blobs, plan):
    res = min_utility_guarantee(blobs, blobs.labels, default_classifiers(), plan)
    assert list(res.per_classifier_accuracy) == list(CLASSIFIERS)
    assert res.minimum == min(res.per_classifier_accuracy.values())
    assert all(0 <= a <= 1 for a in res.per_classifier_accuracy.values())
    assert (res.folds, res.seed) == (5, 0)
    with pytest.raises(PrivSelectError, match="empty"):
        min_utility_guarantee(blobs, blobs.labels, [], plan)
    twice = min_utility_guarantee(blobs, blobs.labels, [Classifier("knn"), Classifier("knn", {"k": 3})], plan)
    assert list(twice.per_classifier_accuracy) == ["knn", "knn_2"]


def test_deterministic(blobs, plan):
    noisy = additive_noise(blobs, 1.0, seed=3)
    runs = [cross_validated_accuracy(noisy, blobs.labels, Classifier("decision_tree"), plan) for _ in range(2)]
    assert runs[0] == runs[1]


def test_utility_degrades_with_noise(blobs, plan):
    def mean_min(sigma):
        return np.mean([
            min_utility_guarantee(additive_noise(blobs, sigma, seed=s), blobs.labels,
                                  default_classifiers(), plan).minimum
            for s in range(5)
        ])

    assert mean_min(0.3) > mean_min(3.0)


def test_knn_rotation_invariant(blobs, plan):
    knn = Classifier("knn")
    base = cross_validated_accuracy(blobs, blobs.labels, knn, plan)
    rotated = cross_validated_accuracy(rotation_perturb(blobs, 5, seed=1), blobs.labels, knn, plan)
    assert abs(base - rotated) < 0.02
