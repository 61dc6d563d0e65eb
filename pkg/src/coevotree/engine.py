"""The coevolution engine: alternating evolution of the tree and
perturbation populations with equilibrium-fed archives, elite plus
binary-tournament selection, and the stall-triggered local perturbation
improvement subroutine.

Determinism contract: all randomness flows from ``config.seed`` through
sequentially consumed generator streams, and every fitness reduction is an
integer count or a fixed-order float reduction, so results are identical
at any evaluation thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cart import CartParams, CartReference
from .dataset import Dataset
from .hall_of_fame import (HallOfFame, HofPolicy, POLICIES_NEEDING_EQUILIBRIUM,
                           evaluation_set, policy_candidates)
from .metrics import ObjectiveMode
from .nash import NashError, mixed_strategy, solve_zero_sum
from .perturbation import (crossover_perturbations, mutate_perturbation,
                           random_perturbation)
from .tree import (TreeGenotype, TreeMeta, correct_counts, crossover_trees,
                   mutate_candidates, random_tree, validate_tree, _to_nodes,
                   _truncate, _from_nodes)

IMPROVE_TOL = 1e-12


class ConfigError(ValueError):
    """A hyperparameter violates its documented range."""


class StopReason(str, Enum):
    GENERATION_LIMIT = "generation-limit"
    NO_IMPROVEMENT = "no-improvement"


@dataclass
class CoevolutionConfig:
    """All evolutionary hyperparameters for one run."""

    tree_population_size: int = 50
    perturbation_population_size: int = 50
    crossover_rate: float = 0.8
    mutation_rate: float = 0.5
    selection_pressure: float = 0.9
    elite_count: int = 2
    phase_length: int = 20          # generations per alternation AND stall window
    max_generations: int = 1000
    top_k: int = 20                 # trees targeted by perturbation evaluation
    mutation_trials: int = 10
    min_depth: int = 2
    max_depth: int = 10
    depth_cap: int = 25
    objective: ObjectiveMode = ObjectiveMode.ADVERSARIAL_ACCURACY
    hof_policy: HofPolicy = HofPolicy.NASH_MIXED
    hof_max_size: int | None = 500
    aggregation: str = "mean"       # perturbation fitness across its target set
    perturbation_grid: int | None = None
    cart_max_depth: int = 10
    cart_min_samples_split: int = 2
    cart_min_impurity_decrease: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.tree_population_size < 2 or self.perturbation_population_size < 2:
            raise ConfigError("population sizes must be >= 2")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigError("crossover_rate must be in [0, 1]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must be in [0, 1]")
        if not 0.5 <= self.selection_pressure <= 1.0:
            raise ConfigError("selection_pressure must be in [0.5, 1]")
        if not 0 <= self.elite_count < min(self.tree_population_size,
                                           self.perturbation_population_size):
            raise ConfigError("elite_count must be in [0, min(population sizes))")
        if self.phase_length < 1:
            raise ConfigError("phase_length must be >= 1")
        if self.max_generations < self.phase_length:
            raise ConfigError("max_generations must be >= phase_length")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.mutation_trials < 1:
            raise ConfigError("mutation_trials must be >= 1")
        if not 1 <= self.min_depth <= self.max_depth <= self.depth_cap:
            raise ConfigError("need 1 <= min_depth <= max_depth <= depth_cap")
        if self.aggregation not in ("mean", "min"):
            raise ConfigError("aggregation must be 'mean' or 'min'")
        if self.perturbation_grid is not None and self.perturbation_grid < 2:
            raise ConfigError("perturbation_grid must be None or >= 2")
        if self.hof_max_size is not None and self.hof_max_size < 0:
            raise ConfigError("hof_max_size must be None or >= 0")
        ObjectiveMode(self.objective)
        HofPolicy(self.hof_policy)
        CartParams(self.cart_max_depth, self.cart_min_samples_split,
                   self.cart_min_impurity_decrease)

    def depth_interval(self) -> tuple[int, int]:
        return (self.min_depth, self.max_depth)

    def cart_params(self) -> CartParams:
        return CartParams(self.cart_max_depth, self.cart_min_samples_split,
                          self.cart_min_impurity_decrease)


@dataclass
class TrainResult:
    best_tree: TreeGenotype
    best_fitness: float
    generations_run: int
    stop_reason: StopReason
    final_metrics: dict | None
    diagnostics: dict


def select_next_generation(individuals, fitnesses, size: int, elite_count: int,
                           selection_pressure: float, rng):
    """Elites plus repeated binary tournaments, with replacement.

    The higher-fitness contender wins each tournament with probability
    ``selection_pressure``; ties favor the first draw. Returns the new
    population and its carried fitness values.
    """
    fitnesses = np.asarray(fitnesses, dtype=np.float64)
    if len(individuals) < max(size, elite_count):
        raise ConfigError("population smaller than selection target")
    order = np.argsort(-fitnesses, kind="stable")
    chosen = [individuals[int(i)] for i in order[:elite_count]]
    chosen_fit = [float(fitnesses[int(i)]) for i in order[:elite_count]]
    while len(chosen) < size:
        i, j = rng.integers(len(individuals), size=2)
        winner, loser = (i, j) if fitnesses[i] >= fitnesses[j] else (j, i)
        pick = winner if rng.random() < selection_pressure else loser
        chosen.append(individuals[int(pick)])
        chosen_fit.append(float(fitnesses[int(pick)]))
    return chosen, np.asarray(chosen_fit)


def _crossover_pairs(population, rate, rng):
    """Bernoulli(rate) inclusion, random pairing; an odd leftover is dropped."""
    mask = rng.random(len(population)) < rate
    chosen = [ind for ind, hit in zip(population, mask) if hit]
    order = rng.permutation(len(chosen))
    return [(chosen[int(order[i])], chosen[int(order[i + 1])])
            for i in range(0, len(chosen) - 1, 2)]


def _dedupe(items, fitnesses=None):
    seen = set()
    out_items, out_fits = [], []
    for pos, item in enumerate(items):
        if item.uid in seen:
            continue
        seen.add(item.uid)
        out_items.append(item)
        if fitnesses is not None:
            out_fits.append(float(fitnesses[pos]))
    return (out_items, np.asarray(out_fits)) if fitnesses is not None else out_items


def replace_lowest(population, fitnesses, replacements):
    """Swap replacements into the lowest-fitness slots; size is preserved."""
    order = np.argsort(np.asarray(fitnesses), kind="stable")
    out = list(population)
    for slot, item in zip(order, replacements):
        out[int(slot)] = item
    return out


def truncate_to_cap(tree: TreeGenotype, depth_cap: int) -> TreeGenotype:
    """Return the tree cut back to the depth cap (identity if already within)."""
    if tree.depth <= depth_cap:
        return tree
    root = _to_nodes(tree)
    _truncate(root, depth_cap)
    return _from_nodes(root, TreeMeta(tree.feature_count, tree.class_count))


class _Evaluator:
    """Pairwise payoff computation with caching and batched kernels.

    Payoffs are keyed by genotype uid pairs; stacked perturbation matrices
    are memoized while the unique evaluation set is stable (a whole tree
    phase), so only genuinely new genotypes hit the prediction kernel.
    """

    def __init__(self, dataset: Dataset, mode: ObjectiveMode, reference: CartReference):
        self.dataset = dataset
        self.labels = dataset.labels
        self.n = len(dataset)
        self.mode = mode
        self.reference = reference
        self._pair: dict[tuple[int, int], float] = {}
        self._stack_uids: tuple = ()
        self._stack: np.ndarray | None = None

    def _stacked(self, perts):
        uids = tuple(p.uid for p in perts)
        if uids != self._stack_uids:
            self._stack = np.vstack([p.values for p in perts])
            self._stack_uids = uids
        return self._stack

    def _payoffs_from_counts(self, counts, perts):
        acc = counts / float(self.n)
        if self.mode == ObjectiveMode.ADVERSARIAL_ACCURACY:
            return acc
        refs = np.array([self.reference.reference_accuracy(p) for p in perts])
        raw = refs[None, :] - acc
        clamped = raw < 0.0
        self.reference.clamp_events += int(clamped.sum())
        return 1.0 - np.where(clamped, 0.0, raw)

    def payoff_block(self, trees, perts, cache: bool = True) -> np.ndarray:
        """(trees, perts) payoff matrix, computing only missing pairs."""
        missing = [t for t in trees
                   if any((t.uid, p.uid) not in self._pair for p in perts)]
        if missing:
            counts = correct_counts(missing, self._stacked(perts), self.labels)
            payoffs = self._payoffs_from_counts(counts, perts)
            if cache:
                for row, tree in enumerate(missing):
                    for col, pert in enumerate(perts):
                        self._pair[(tree.uid, pert.uid)] = payoffs[row, col]
            else:
                by_uid = {t.uid: r for r, t in enumerate(missing)}
                out = np.empty((len(trees), len(perts)))
                for row, tree in enumerate(trees):
                    if tree.uid in by_uid:
                        out[row] = payoffs[by_uid[tree.uid]]
                    else:
                        out[row] = [self._pair[(tree.uid, p.uid)] for p in perts]
                return out
        out = np.empty((len(trees), len(perts)))
        for row, tree in enumerate(trees):
            for col, pert in enumerate(perts):
                out[row, col] = self._pair[(tree.uid, pert.uid)]
        return out

    @staticmethod
    def _split_elements(elements):
        pures, mixes = [], []
        for element in elements:
            (mixes if hasattr(element, "members") else pures).append(element)
        return pures, mixes

    def _element_columns(self, elements):
        """Unique genotype list plus per-element weight columns."""
        pures, mixes = self._split_elements(elements)
        uniq = []
        index = {}
        for p in pures:
            if p.uid not in index:
                index[p.uid] = len(uniq)
                uniq.append(p)
        for strategy in mixes:
            for member, _ in strategy.members:
                if member.uid not in index:
                    index[member.uid] = len(uniq)
                    uniq.append(member)
        weights = np.zeros((len(uniq), len(elements)))
        for col, element in enumerate(elements):
            if hasattr(element, "members"):
                for member, prob in element.members:
                    weights[index[member.uid], col] = prob
            else:
                weights[index[element.uid], col] = 1.0
        return uniq, weights

    def tree_fitnesses(self, trees, pert_elements, cache: bool = True) -> np.ndarray:
        """Worst-case payoff of each tree over the evaluation set."""
        uniq, weights = self._element_columns(pert_elements)
        payoffs = self.payoff_block(trees, uniq, cache=cache)
        return (payoffs @ weights).min(axis=1)

    def pert_fitnesses(self, perts, tree_elements, aggregation: str = "mean") -> np.ndarray:
        """Adversary payoff of each perturbation over its target set."""
        uniq, weights = self._element_columns(tree_elements)
        payoffs = self.payoff_block(uniq, perts)
        adversary = weights.T @ (1.0 - payoffs)
        return adversary.mean(axis=0) if aggregation == "mean" else adversary.min(axis=0)

    def strategy_fitness_tree_side(self, strategy, pert_elements) -> float:
        """Worst-case expected payoff of a mixed tree over the evaluation set."""
        members = [m for m, _ in strategy.members]
        probs = np.array([p for _, p in strategy.members])
        uniq, weights = self._element_columns(pert_elements)
        payoffs = self.payoff_block(members, uniq)
        return float((probs @ payoffs @ weights).min())

    def strategy_fitness_pert_side(self, strategy, tree_elements,
                                   aggregation: str = "mean") -> float:
        members = [m for m, _ in strategy.members]
        probs = np.array([p for _, p in strategy.members])
        uniq, weights = self._element_columns(tree_elements)
        payoffs = self.payoff_block(uniq, members)
        per_element = weights.T @ (1.0 - payoffs) @ probs
        return float(per_element.mean() if aggregation == "mean" else per_element.min())

    def sweep(self, live_trees, live_perts) -> None:
        """Drop cached pairs whose genotypes are no longer referenced."""
        tree_uids = {t.uid for t in live_trees}
        pert_uids = {p.uid for p in live_perts}
        self._pair = {key: value for key, value in self._pair.items()
                      if key[0] in tree_uids and key[1] in pert_uids}


def evaluate_tree_population(trees, perturbation_population, hof_perturbations,
                             dataset, mode, reference=None) -> np.ndarray:
    """Fitness of every tree against the population merged with the archive."""
    evaluator = _Evaluator(dataset, ObjectiveMode(mode), reference)
    elements = evaluation_set(hof_perturbations, perturbation_population)
    return evaluator.tree_fitnesses(list(trees), elements)


def evaluate_perturbation_population(perturbations, trees, tree_fitnesses, hof_trees,
                                     top_k, dataset, mode, reference=None,
                                     aggregation: str = "mean") -> np.ndarray:
    """Fitness of every perturbation against the top-k trees and the archive."""
    evaluator = _Evaluator(dataset, ObjectiveMode(mode), reference)
    targets = _target_elements(trees, tree_fitnesses, hof_trees, top_k)
    return evaluator.pert_fitnesses(list(perturbations), targets, aggregation)


def _target_elements(trees, tree_fitnesses, hof_trees, top_k):
    """Top-k highest-fitness distinct trees merged with the tree archive."""
    ranked = []
    seen = set()
    for i in np.argsort(-np.asarray(tree_fitnesses), kind="stable"):
        tree = trees[int(i)]
        if tree.uid in seen:
            continue
        seen.add(tree.uid)
        ranked.append(tree)
        if len(ranked) == top_k:
            break
    elements: list = ranked
    if hof_trees is not None:
        for strategy in hof_trees.strategies():
            if strategy.is_degenerate() and strategy.members[0][0].uid in seen:
                continue
            elements.append(strategy)
    return elements


class _Run:
    """Mutable state of one evolve() call."""

    def __init__(self, dataset, config, warm_start_trees):
        config.validate()
        self.dataset = dataset
        self.config = config
        self.mode = ObjectiveMode(config.objective)
        self.meta = TreeMeta(dataset.feature_count, dataset.class_count, dataset.splittable)
        self.reference = CartReference(dataset.labels, config.cart_params(),
                                       dataset.class_count)
        self.evaluator = _Evaluator(dataset, self.mode, self.reference)
        root = np.random.SeedSequence(config.seed)
        streams = root.spawn(3)
        rng_trees = np.random.default_rng(streams[0])
        rng_perts = np.random.default_rng(streams[1])
        self.rng = np.random.default_rng(streams[2])

        self.trees = [random_tree(self.meta, config.depth_interval(), rng_trees,
                                  config.depth_cap)
                      for _ in range(config.tree_population_size)]
        self.warm_inserted = self._insert_warm_start(warm_start_trees, rng_trees)
        self.perts = [random_perturbation(dataset, rng_perts, config.perturbation_grid)
                      for _ in range(config.perturbation_population_size)]

        self.hof_trees = HallOfFame(config.hof_policy, config.hof_max_size)
        self.hof_perts = HallOfFame(config.hof_policy, config.hof_max_size)
        self.tree_fits = np.zeros(len(self.trees))
        self.pert_fits = np.zeros(len(self.perts))
        self.generations = 0
        self.best_found = -np.inf
        self.stall = 0
        self.stop: StopReason | None = None
        self.nash_failures = 0
        self.nash_fallbacks = 0
        self.subroutine_invocations = 0
        self.subroutine_successes = 0

    def _insert_warm_start(self, warm_start_trees, rng) -> int:
        if not warm_start_trees:
            return 0
        config = self.config
        prepared = []
        for tree in warm_start_trees[:config.tree_population_size]:
            if tree.feature_count != self.dataset.feature_count:
                raise ConfigError("warm-start tree feature count does not match dataset")
            if tree.class_count > self.dataset.class_count:
                raise ConfigError("warm-start tree class count exceeds dataset classes")
            validate_tree(tree)
            prepared.append(truncate_to_cap(tree, config.depth_cap))
        slots = rng.choice(len(self.trees), size=len(prepared), replace=False)
        for slot, tree in zip(slots, prepared):
            self.trees[int(slot)] = tree
        return len(prepared)

    # -- shared generation machinery ---------------------------------------

    def _expand_trees(self):
        config = self.config
        expanded = list(self.trees)
        for a, b in _crossover_pairs(self.trees, config.crossover_rate, self.rng):
            expanded.extend(crossover_trees(a, b, self.rng, config.depth_cap))
        return expanded

    def _mutate_trees(self, expanded, pert_elements):
        config = self.config
        winners = []
        hits = self.rng.random(len(expanded)) < config.mutation_rate
        for parent, hit in zip(list(expanded), hits):
            if not hit:
                continue
            candidates = mutate_candidates(parent, self.meta, self.rng,
                                           config.mutation_trials,
                                           config.depth_interval(), config.depth_cap)
            fits = self.evaluator.tree_fitnesses(candidates, pert_elements, cache=False)
            winners.append(candidates[int(np.argmax(fits))])
        return winners

    def _expand_perts(self, population):
        config = self.config
        expanded = list(population)
        for a, b in _crossover_pairs(population, config.crossover_rate, self.rng):
            expanded.extend(crossover_perturbations(a, b, self.rng))
        hits = self.rng.random(len(expanded)) < config.mutation_rate
        for parent, hit in zip(list(expanded), hits):
            if hit:
                expanded.append(mutate_perturbation(parent, self.dataset, self.rng,
                                                    config.perturbation_grid))
        return expanded

    def _record_hof(self):
        """Per-generation equilibrium plus archive updates, per policy."""
        config = self.config
        if config.hof_max_size == 0:
            return
        policy = HofPolicy(config.hof_policy)
        uniq_trees, uniq_tree_fits = _dedupe(self.trees, self.tree_fits)
        uniq_perts = _dedupe(self.perts)
        eq_trees = eq_perts = None
        if policy in POLICIES_NEEDING_EQUILIBRIUM:
            matrix = self.evaluator.payoff_block(uniq_trees, uniq_perts)
            try:
                solved = solve_zero_sum(matrix)
            except NashError:
                self.nash_failures += 1
                return
            self.nash_fallbacks += solved.fallbacks
            eq_trees = mixed_strategy(uniq_trees, solved.row_strategy)
            eq_perts = mixed_strategy(uniq_perts, solved.column_strategy)

        pert_elements = evaluation_set(self.hof_perts, self.perts)
        tree_elements = _target_elements(self.trees, self.tree_fits,
                                         self.hof_trees, config.top_k)
        for strategy in policy_candidates(policy, uniq_trees, uniq_tree_fits, eq_trees):
            fitness = self.evaluator.strategy_fitness_tree_side(strategy, pert_elements)
            self.hof_trees.insert(strategy, fitness, self.generations)
        if policy in (HofPolicy.TOP_K, HofPolicy.TOP_K_MIXED, HofPolicy.BEST_ONLY):
            pert_rank_fits = self.evaluator.pert_fitnesses(
                uniq_perts, tree_elements, config.aggregation)
        else:
            pert_rank_fits = None
        for strategy in policy_candidates(policy, uniq_perts, pert_rank_fits, eq_perts):
            fitness = self.evaluator.strategy_fitness_pert_side(
                strategy, tree_elements, config.aggregation)
            self.hof_perts.insert(strategy, fitness, self.generations)

    def _sweep(self):
        live_trees = list(self.trees)
        for strategy in self.hof_trees.strategies():
            live_trees.extend(member for member, _ in strategy.members)
        live_perts = list(self.perts)
        for strategy in self.hof_perts.strategies():
            live_perts.extend(member for member, _ in strategy.members)
        self.evaluator.sweep(live_trees, live_perts)

    # -- the two phases -----------------------------------------------------

    def tree_generation(self, progress) -> bool:
        """One tree-population generation; returns False when the run stops."""
        config = self.config
        self.generations += 1
        pert_elements = evaluation_set(self.hof_perts, self.perts)
        expanded = self._expand_trees()
        expanded.extend(self._mutate_trees(expanded, pert_elements))
        fits = self.evaluator.tree_fitnesses(expanded, pert_elements)
        self.trees, self.tree_fits = select_next_generation(
            expanded, fits, config.tree_population_size, config.elite_count,
            config.selection_pressure, self.rng)
        self._record_hof()
        self._sweep()

        generation_best = float(self.tree_fits.max())
        if generation_best > self.best_found + IMPROVE_TOL:
            self.best_found = generation_best
            self.stall = 0
        else:
            self.stall += 1
        if progress is not None:
            progress({
                "phase": "trees",
                "generation": self.generations,
                "best_fitness": generation_best,
                "best_found": self.best_found,
                "mean_fitness": float(self.tree_fits.mean()),
                "hof_trees": len(self.hof_trees),
                "hof_perturbations": len(self.hof_perts),
            })
        if self.generations >= config.max_generations:
            self.stop = StopReason.GENERATION_LIMIT
            return False
        if self.stall >= config.phase_length:
            improved, found = self._local_improvement()
            self.subroutine_invocations += 1
            if improved:
                self.subroutine_successes += 1
                self.stall = 0
                self._augment_perturbations(found)
                if progress is not None:
                    progress({
                        "phase": "local-improvement",
                        "generation": self.generations,
                        "replaced": len(found),
                        "perturbation_population": len(self.perts),
                    })
            else:
                self.stop = StopReason.NO_IMPROVEMENT
                return False
        return True

    def pert_generation(self, progress) -> None:
        config = self.config
        tree_elements = _target_elements(self.trees, self.tree_fits,
                                         self.hof_trees, config.top_k)
        expanded = self._expand_perts(self.perts)
        fits = self.evaluator.pert_fitnesses(expanded, tree_elements, config.aggregation)
        self.perts, self.pert_fits = select_next_generation(
            expanded, fits, config.perturbation_population_size, config.elite_count,
            config.selection_pressure, self.rng)
        self._record_hof()
        self._sweep()
        if progress is not None:
            progress({
                "phase": "perturbations",
                "generation": self.generations,
                "best_fitness": float(self.pert_fits.max()),
                "mean_fitness": float(self.pert_fits.mean()),
                "hof_trees": len(self.hof_trees),
                "hof_perturbations": len(self.hof_perts),
            })

    # -- stall handling -----------------------------------------------------

    def _local_improvement(self):
        """Targeted perturbation search against every tied-best tree.

        Each tied tree gets its own evolved copy of the perturbation
        population scored against that tree alone; success means finding a
        perturbation that strictly lowers the tree's current fitness. All
        tied trees must be defeated for the run to continue.
        """
        config = self.config
        best = float(self.tree_fits.max())
        tied = []
        seen = set()
        for tree, fit in zip(self.trees, self.tree_fits):
            if fit >= best - IMPROVE_TOL:
                key = tree.structural_key()
                if key not in seen:
                    seen.add(key)
                    tied.append((tree, float(fit)))
        found = []
        for tree, tree_fit in tied:
            population = list(self.perts)
            discovered = None
            for _ in range(config.phase_length):
                expanded = self._expand_perts(population)
                payoffs = self.evaluator.payoff_block([tree], expanded, cache=False)[0]
                worst = int(np.argmin(payoffs))
                if payoffs[worst] < tree_fit - IMPROVE_TOL:
                    discovered = expanded[worst]
                    break
                population, _ = select_next_generation(
                    expanded, 1.0 - payoffs, config.perturbation_population_size,
                    config.elite_count, config.selection_pressure, self.rng)
            if discovered is None:
                return False, []
            found.append(discovered)
        return True, found

    def _augment_perturbations(self, found):
        """Replace the lowest-fitness members of the restored population."""
        config = self.config
        tree_elements = _target_elements(self.trees, self.tree_fits,
                                         self.hof_trees, config.top_k)
        fits = self.evaluator.pert_fitnesses(self.perts, tree_elements,
                                             config.aggregation)
        self.perts = replace_lowest(self.perts, fits, found)

    def result(self) -> TrainResult:
        best_index = int(np.argmax(self.tree_fits))
        diagnostics = {
            "clamped_regrets": self.reference.clamp_events,
            "reference_fits": self.reference.fit_count,
            "nash_fallbacks": self.nash_fallbacks,
            "nash_failures": self.nash_failures,
            "hof_tree_entries": len(self.hof_trees),
            "hof_perturbation_entries": len(self.hof_perts),
            "hof_evictions": self.hof_trees.eviction_count + self.hof_perts.eviction_count,
            "subroutine_invocations": self.subroutine_invocations,
            "subroutine_successes": self.subroutine_successes,
            "warm_start_inserted": self.warm_inserted,
        }
        return TrainResult(
            best_tree=self.trees[best_index],
            best_fitness=float(self.tree_fits[best_index]),
            generations_run=self.generations,
            stop_reason=self.stop,
            final_metrics=None,
            diagnostics=diagnostics,
        )


def evolve(dataset: Dataset, config: CoevolutionConfig,
           warm_start_trees=None, progress=None) -> TrainResult:
    """Run the alternating coevolution loop and return the best final tree.

    Warm-start trees replace random members of the initial tree
    population. Stop conditions are checked after each tree-population
    generation only; the returned tree is the fitness argmax of the final
    tree population.
    """
    run = _Run(dataset, config, warm_start_trees)
    while run.stop is None:
        for _ in range(config.phase_length):
            if not run.tree_generation(progress):
                break
        if run.stop is not None:
            break
        for _ in range(config.phase_length):
            run.pert_generation(progress)
    return run.result()
