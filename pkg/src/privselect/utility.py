"""Classification utility of a (perturbed) feature matrix."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.tree import DecisionTreeClassifier

from ._validation import PrivSelectError, PrivSelectWarning, as_matrix

CLASSIFIERS = ("knn", "gaussian_nb", "decision_tree")
DEFAULT_HYPERPARAMS = {
    "knn": {"k": 1},
    "gaussian_nb": {"var_smoothing": 1e-9},
    "decision_tree": {"max_depth": 12, "min_leaf": 2},
}


@dataclass(frozen=True)
class Classifier:
    kind: str
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CLASSIFIERS:
            raise PrivSelectError(f"unknown classifier {self.kind!r}; choose from {CLASSIFIERS}")
        merged = {**DEFAULT_HYPERPARAMS[self.kind], **self.hyperparams}
        unknown = set(merged) - set(DEFAULT_HYPERPARAMS[self.kind])
        if unknown:
            raise PrivSelectError(f"{self.kind} does not accept {sorted(unknown)}")
        for key in ("k", "max_depth", "min_leaf"):
            if key in merged and (not isinstance(merged[key], (int, np.integer)) or merged[key] < 1):
                raise PrivSelectError(f"{self.kind}.{key} must be an integer >= 1, got {merged[key]!r}")
        if self.kind == "gaussian_nb" and not merged["var_smoothing"] > 0:
            raise PrivSelectError("gaussian_nb.var_smoothing must be > 0")
        object.__setattr__(self, "hyperparams", merged)

    def build(self):
        """A fresh, unfitted scikit-learn estimator."""
        hp = self.hyperparams
        if self.kind == "knn":
            return KNeighborsClassifier(n_neighbors=hp["k"])
        if self.kind == "gaussian_nb":
            return GaussianNB(var_smoothing=hp["var_smoothing"])
        return DecisionTreeClassifier(
            max_depth=hp["max_depth"], min_samples_leaf=hp["min_leaf"], random_state=0
        )


def default_classifiers():
    return [Classifier(kind) for kind in CLASSIFIERS]


@dataclass(frozen=True)
class UtilityResult:
    per_classifier_accuracy: dict
    minimum: float
    folds: int
    seed: int

    def to_dict(self):
        return {
            "per_classifier_accuracy": dict(self.per_classifier_accuracy),
            "minimum": self.minimum,
            "folds": self.folds,
            "seed": self.seed,
        }


def accuracy(predictions, truth):
    """Fraction of exact matches between predicted and true labels."""
    pred = np.asarray(predictions)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise PrivSelectError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise PrivSelectError("cannot score zero predictions")
    return float(np.mean(pred.astype(str) == truth.astype(str)))


def cross_validated_accuracy(data, labels, classifier, plan):
    """Mean held-out accuracy over the folds of ``plan``."""
    X = as_matrix(data, "features")
    y = np.asarray(labels).astype(str)
    if y.shape != (X.shape[0],):
        raise PrivSelectError(f"{y.size} labels for {X.shape[0]} records")
    folds = plan.fold_assignments
    if folds.shape != (X.shape[0],):
        raise PrivSelectError("split plan does not cover every record")
    if plan.n_folds < 2:
        raise PrivSelectError("cross-validation needs a plan with at least 2 folds")
    classes = np.unique(y)
    template = classifier.build()
    scores = []
    for k, (train, test) in enumerate(plan.split()):
        missing = np.setdiff1d(classes, y[train])
        if missing.size:
            warnings.warn(
                f"fold {k}: training split lacks classes {missing.tolist()}",
                PrivSelectWarning,
                stacklevel=2,
            )
        model = clone(template).fit(X[train], y[train])
        scores.append(accuracy(model.predict(X[test]), y[test]))
    return float(np.mean(scores))


def min_utility_guarantee(data, labels, pool, plan):
    """Cross-validated accuracy of every classifier in ``pool`` and the minimum."""
    pool = list(pool)
    if not pool:
        raise PrivSelectError("classifier pool is empty")
    acc = {}
    for clf in pool:
        acc[_pool_key(clf, acc)] = cross_validated_accuracy(data, labels, clf, plan)
    return UtilityResult(
        per_classifier_accuracy=acc,
        minimum=float(min(acc.values())),
        folds=plan.n_folds,
        seed=plan.seed,
    )


def _pool_key(clf, taken):
    key = clf.kind
    n = 2
    while key in taken:
        key = f"{clf.kind}_{n}"
        n += 1
    return key
