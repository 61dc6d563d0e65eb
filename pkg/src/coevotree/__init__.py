"""Coevolutionary training of decision trees robust to bounded
L-infinity input perturbations."""

from .cart import CartParams, CartReference, build_cart, gini, reference_accuracy
from .dataset import (DataError, Dataset, FeatureScaling, RawTable, load_csv,
                      normalize, raw_table_from_arrays, split_dataset)
from .engine import (CoevolutionConfig, ConfigError, StopReason, TrainResult,
                     evaluate_perturbation_population, evaluate_tree_population,
                     evolve, replace_lowest, select_next_generation)
from .estimator import GreedyTreeClassifier, RobustTreeClassifier
from .hall_of_fame import (HallOfFame, HofEntry, HofPolicy, evaluation_set,
                           evict_if_needed, policy_candidates)
from .metrics import (ObjectiveMode, PerturbationSampleScorer, accuracy,
                      estimate_final_metrics, pair_payoff, regret,
                      worst_case_fitness)
from .nash import (Equilibrium, MixedStrategy, NashError, best_response_gaps,
                   build_payoff_matrix, degenerate_strategy, lemke_howson,
                   mixed_strategy, solve_zero_sum, support_enumeration)
from .perturbation import (PerturbationGenotype, crossover_perturbations,
                           identity_perturbation, mutate_perturbation,
                           random_perturbation, sample_perturbation_set)
from .tree import (NodeRecord, TreeGenotype, TreeMeta, TreeValidationError,
                   crossover_trees, deserialize_tree, mutate_candidates,
                   random_tree, serialize_tree, validate_tree)

__version__ = "0.1.0"
