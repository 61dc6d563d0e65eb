"""scikit-learn style estimators wrapping the coevolution engine.

``RobustTreeClassifier`` trains a single decision tree whose accuracy
holds up under bounded L-infinity perturbation of its inputs;
``GreedyTreeClassifier`` is the plain Gini baseline in the same encoding.
Both normalize features internally and accept arbitrary label values.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .cart import CartParams, build_cart
from .dataset import normalize, raw_table_from_arrays
from .engine import CoevolutionConfig, evolve
from .metrics import estimate_final_metrics


class RobustTreeClassifier(BaseEstimator, ClassifierMixin):
    """Decision-tree classifier trained by two-population coevolution.

    Parameters mirror the engine configuration; ``objective`` selects the
    robustness metric being optimized ("adversarial-accuracy" or
    "max-regret") and ``epsilon`` the perturbation radius in normalized
    feature units.
    """

    def __init__(self, epsilon=0.1, objective="adversarial-accuracy",
                 tree_population_size=50, perturbation_population_size=50,
                 crossover_rate=0.8, mutation_rate=0.5, selection_pressure=0.9,
                 elite_count=2, phase_length=20, max_generations=1000,
                 top_k=20, mutation_trials=10, min_depth=2, max_depth=10,
                 depth_cap=25, hof_policy="nash-mixed", hof_max_size=500,
                 aggregation="mean", random_state=0):
        self.epsilon = epsilon
        self.objective = objective
        self.tree_population_size = tree_population_size
        self.perturbation_population_size = perturbation_population_size
        self.crossover_rate = crossover_rate
        self.mutation_rate = mutation_rate
        self.selection_pressure = selection_pressure
        self.elite_count = elite_count
        self.phase_length = phase_length
        self.max_generations = max_generations
        self.top_k = top_k
        self.mutation_trials = mutation_trials
        self.min_depth = min_depth
        self.max_depth = max_depth
        self.depth_cap = depth_cap
        self.hof_policy = hof_policy
        self.hof_max_size = hof_max_size
        self.aggregation = aggregation
        self.random_state = random_state

    def _config(self) -> CoevolutionConfig:
        return CoevolutionConfig(
            tree_population_size=self.tree_population_size,
            perturbation_population_size=self.perturbation_population_size,
            crossover_rate=self.crossover_rate,
            mutation_rate=self.mutation_rate,
            selection_pressure=self.selection_pressure,
            elite_count=self.elite_count,
            phase_length=self.phase_length,
            max_generations=self.max_generations,
            top_k=self.top_k,
            mutation_trials=self.mutation_trials,
            min_depth=self.min_depth,
            max_depth=self.max_depth,
            depth_cap=self.depth_cap,
            objective=self.objective,
            hof_policy=self.hof_policy,
            hof_max_size=self.hof_max_size,
            aggregation=self.aggregation,
            seed=self.random_state,
        )

    def fit(self, X, y, warm_start_trees=None):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        table = raw_table_from_arrays(X, y, name="fit", label_order="sorted")
        self.dataset_, self.scaling_ = normalize(table, self.epsilon)
        self.train_result_ = evolve(self.dataset_, self._config(),
                                    warm_start_trees=warm_start_trees)
        self.best_tree_ = self.train_result_.best_tree
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "best_tree_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        indices = self.best_tree_.predict_batch(self.scaling_.transform(X))
        return self.classes_[indices]

    def evaluate_robustness(self, n_samples=10_000, seed=0) -> dict:
        """Sampled adversarial accuracy and max regret on the training data."""
        check_is_fitted(self, "best_tree_")
        return estimate_final_metrics(self.best_tree_, self.dataset_, n_samples, seed)


class GreedyTreeClassifier(BaseEstimator, ClassifierMixin):
    """Plain greedy Gini tree in the shared genotype encoding."""

    def __init__(self, max_depth=10, min_samples_split=2, min_impurity_decrease=0.0):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_impurity_decrease = min_impurity_decrease

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        table = raw_table_from_arrays(X, y, name="fit", label_order="sorted")
        self.dataset_, self.scaling_ = normalize(table, 0.0)
        params = CartParams(self.max_depth, self.min_samples_split,
                            self.min_impurity_decrease)
        self.best_tree_ = build_cart(self.dataset_.instances, self.dataset_.labels,
                                     params, self.dataset_.class_count)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "best_tree_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        indices = self.best_tree_.predict_batch(self.scaling_.transform(X))
        return self.classes_[indices]
