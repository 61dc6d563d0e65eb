"""Objective computations: accuracy, regret, worst-case aggregation, and
sampled estimation of the final robustness metrics.

Every fitness value is oriented so that higher is better for the tree
player; max-regret mode uses ``1 - regret``. A "mixed" model or
perturbation is any object exposing ``members``: an iterable of
``(genotype, probability)`` pairs whose metric is the probability-weighted
average of its members' metrics.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .dataset import Dataset
from .perturbation import PerturbationGenotype
from .tree import correct_counts


class ObjectiveMode(str, Enum):
    ADVERSARIAL_ACCURACY = "adversarial-accuracy"
    MAX_REGRET = "max-regret"


def _is_mixed(obj) -> bool:
    return hasattr(obj, "members")


def accuracy(model, instances, labels) -> float:
    """Fraction of correct predictions; expected value for a mixed model."""
    instances = np.asarray(instances, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(instances) == 0:
        raise ValueError("accuracy over an empty instance list is undefined")
    if _is_mixed(model):
        return float(sum(p * accuracy(member, instances, labels)
                         for member, p in model.members))
    counts = correct_counts([model], instances, labels)
    return float(counts[0, 0]) / len(labels)


def regret(model, perturbation, labels, reference) -> float:
    """Reference-tree accuracy on the perturbation minus the model's.

    Negative values (the greedy reference underperforming the model) are
    clamped to zero; clamp events are counted on the reference oracle.
    """
    ref = reference.reference_accuracy(perturbation)
    raw = ref - accuracy(model, perturbation.values, labels)
    if raw < 0.0:
        reference.clamp_events += 1
        return 0.0
    return raw


def pair_payoff(model, perturbation, labels, mode, reference=None) -> float:
    """Tree-player payoff for one (model, perturbation) pair, in [0, 1]."""
    if mode == ObjectiveMode.ADVERSARIAL_ACCURACY:
        return accuracy(model, perturbation.values, labels)
    return 1.0 - regret(model, perturbation, labels, reference)


def _element_payoff(model, element, labels, mode, reference) -> float:
    """Payoff against one evaluation-set element (pure or mixed perturbation)."""
    if _is_mixed(element):
        return float(sum(p * pair_payoff(model, member, labels, mode, reference)
                         for member, p in element.members))
    return pair_payoff(model, element, labels, mode, reference)


def worst_case_fitness(model, perturbation_set, labels, mode, reference=None) -> float:
    """Minimum payoff over a finite evaluation set.

    In adversarial-accuracy mode this is the worst accuracy; in max-regret
    mode it equals ``1 - max regret``. Mixed perturbations contribute their
    expected metric as a single element.
    """
    values = [_element_payoff(model, element, labels, mode, reference)
              for element in perturbation_set]
    if not values:
        raise ValueError("worst_case_fitness over an empty set is undefined")
    return min(values)


class PerturbationSampleScorer:
    """Scores trees on one seeded i.i.d. perturbation sample set.

    Samples are streamed in chunks and never materialized, so 1e5-sample
    sets stay cheap on memory; two trees scored with the same
    (dataset, n_samples, seed) see bit-identical sets. The
    unperturbed training set is always included as an extra sample so the
    adversarial accuracy estimate can never exceed clean accuracy.
    Reference accuracies (one greedy-tree fit per sample) are computed
    lazily once and reused for every scored tree.
    """

    def __init__(self, dataset: Dataset, n_samples: int, seed: int,
                 reference=None, chunk_size: int = 256):
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        self.dataset = dataset
        self.n_samples = int(n_samples)
        self.seed = int(seed)
        self.chunk_size = int(chunk_size)
        self._reference = reference
        self._ref_acc: np.ndarray | None = None

    def _chunks(self):
        """Yield stacked (k * n, d) matrices; the identity sample comes first."""
        low, high = self.dataset.feasible_bounds()
        span = high - low
        n, d = self.dataset.instances.shape
        yield self.dataset.instances, 1
        rng = np.random.default_rng(self.seed)
        remaining = self.n_samples
        while remaining > 0:
            k = min(self.chunk_size, remaining)
            draws = low + rng.random((k, n, d)) * span
            yield draws.reshape(k * n, d), k
            remaining -= k

    def accuracies(self, tree) -> np.ndarray:
        """Per-sample accuracy of one tree, identity sample at index 0."""
        labels = self.dataset.labels
        parts = [correct_counts([tree], block, labels)[0] for block, _ in self._chunks()]
        return np.concatenate(parts) / len(labels)

    def reference_accuracies(self) -> np.ndarray:
        if self._ref_acc is None:
            if self._reference is None:
                from .cart import CartReference
                self._reference = CartReference(self.dataset.labels,
                                                class_count=self.dataset.class_count)
            labels = self.dataset.labels
            n = len(labels)
            values = []
            for block, k in self._chunks():
                for i in range(k):
                    values.append(self._reference.accuracy_for(block[i * n:(i + 1) * n]))
            self._ref_acc = np.asarray(values)
        return self._ref_acc

    def adversarial_accuracy(self, tree) -> float:
        return float(self.accuracies(tree).min())

    def max_regret(self, tree) -> float:
        gaps = self.reference_accuracies() - self.accuracies(tree)
        return float(np.clip(gaps, 0.0, None).max())

    def clean_accuracy(self, tree) -> float:
        return accuracy(tree, self.dataset.instances, self.dataset.labels)


def estimate_final_metrics(tree, dataset: Dataset, n_samples: int, seed: int,
                           reference=None, scorer: PerturbationSampleScorer | None = None) -> dict:
    """Adversarial accuracy and max regret estimated on one seeded sample set.

    Pass an explicit ``scorer`` to score several trees on the identical
    set without refitting the reference oracle.
    """
    if scorer is None:
        scorer = PerturbationSampleScorer(dataset, n_samples, seed, reference)
    return {
        "adversarial_accuracy_estimate": scorer.adversarial_accuracy(tree),
        "max_regret_estimate": scorer.max_regret(tree),
        "clean_accuracy": scorer.clean_accuracy(tree),
        "n_samples": scorer.n_samples,
        "seed": scorer.seed,
    }
