"""Greedy Gini-based tree induction: the regret reference oracle and the
standalone baseline.

Fitting is delegated to scikit-learn's tree builder; the result is
converted into the shared genotype encoding so it composes with every
other module (prediction kernel, serialization, payoff matrices).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .perturbation import PerturbationGenotype
from .tree import OP_LT, TreeGenotype, correct_counts


@dataclass(frozen=True)
class CartParams:
    max_depth: int = 10
    min_samples_split: int = 2
    min_impurity_decrease: float = 0.0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_impurity_decrease < 0:
            raise ValueError("min_impurity_decrease must be >= 0")


DEFAULT_CART = CartParams()


def gini(class_counts) -> float:
    """Gini impurity 1 - sum((n_c / n)^2) of a count vector."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0:
        raise ValueError("class_counts must be a 1-D sequence")
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("at least one class count must be positive")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def build_cart(instances, labels, params: CartParams = DEFAULT_CART,
               class_count: int | None = None) -> TreeGenotype:
    """Fit a greedy Gini tree and convert it into the genotype encoding.

    Deterministic for fixed inputs; leaves carry the majority class with
    ties resolved toward the lowest class index.
    """
    instances = np.asarray(instances, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(instances) == 0:
        raise ValueError("cannot fit on empty data")
    if class_count is None:
        class_count = int(labels.max()) + 1
    clf = DecisionTreeClassifier(
        criterion="gini",
        max_depth=params.max_depth,
        min_samples_split=params.min_samples_split,
        min_impurity_decrease=params.min_impurity_decrease,
        random_state=0,
    )
    clf.fit(instances, labels)
    return _convert(clf, instances.shape[1], class_count)


def _convert(clf: DecisionTreeClassifier, feature_count: int, class_count: int) -> TreeGenotype:
    # scikit-learn already stores dense node ids with root 0 and -1 child
    # pointers at leaves; it routes x <= threshold left and thresholds are
    # midpoints of distinct values, so "<" induces the same split.
    src = clf.tree_
    classes = clf.classes_.astype(np.int64)
    left = src.children_left.astype(np.int64)
    right = src.children_right.astype(np.int64)
    leaf = left < 0
    attrs = np.where(leaf, 0, src.feature).astype(np.int64)
    thresholds = np.clip(np.where(leaf, 0.0, src.threshold), 0.0, 1.0)
    klass = classes[np.argmax(src.value[:, 0, :], axis=1)]
    parent = np.full(len(left), -1, dtype=np.int64)
    internal = np.flatnonzero(~leaf)
    parent[left[internal]] = internal
    parent[right[internal]] = internal
    ops = np.full(len(left), OP_LT, dtype=np.uint8)
    return TreeGenotype(attrs, ops, thresholds, left, right, parent, klass,
                        feature_count, class_count)


class CartReference:
    """Regret oracle: best-achievable accuracy per perturbation.

    Fits one greedy tree per perturbation genotype and caches the training
    accuracy on the genotype itself, so repeated regret computations cost
    a single fit. Also tallies clamp events (regret forced up to zero) and
    fits, for run diagnostics.
    """

    def __init__(self, labels, params: CartParams = DEFAULT_CART,
                 class_count: int | None = None):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.params = params
        self.class_count = class_count if class_count is not None else int(self.labels.max()) + 1
        self.fit_count = 0
        self.clamp_events = 0

    def accuracy_for(self, values: np.ndarray) -> float:
        """Training accuracy of a fresh reference tree on raw values."""
        tree = build_cart(values, self.labels, self.params, self.class_count)
        self.fit_count += 1
        counts = correct_counts([tree], np.ascontiguousarray(values), self.labels)
        return float(counts[0, 0]) / len(self.labels)

    def reference_accuracy(self, perturbation: PerturbationGenotype) -> float:
        cached = perturbation.reference_accuracy
        if cached is None:
            cached = self.accuracy_for(perturbation.values)
            perturbation.set_reference_accuracy(cached)
        return cached


def reference_accuracy(perturbation: PerturbationGenotype, labels,
                       params: CartParams = DEFAULT_CART,
                       class_count: int | None = None) -> float:
    """One-shot reference accuracy with genotype-level caching."""
    return CartReference(labels, params, class_count).reference_accuracy(perturbation)
