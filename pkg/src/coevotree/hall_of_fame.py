"""Mixed-strategy archives built from per-generation equilibria.

Each archive entry is a mixed strategy plus the fitness it scored against
the opposing evaluation set at insertion time; eviction removes the
lowest-fitness entry once a bounded archive overflows. Five construction
policies are supported, all producing candidate strategies from the same
(population, fitness, equilibrium) triple.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .nash import MixedStrategy, degenerate_strategy


class HofPolicy(str, Enum):
    NASH_MIXED = "nash-mixed"
    NASH_SINGLES = "nash-singles"
    TOP_K_MIXED = "top-k-mixed"
    TOP_K = "top-k"
    BEST_ONLY = "best-only"


POLICIES_NEEDING_EQUILIBRIUM = frozenset({
    HofPolicy.NASH_MIXED, HofPolicy.NASH_SINGLES, HofPolicy.TOP_K_MIXED, HofPolicy.TOP_K,
})


@dataclass
class HofEntry:
    strategy: MixedStrategy
    fitness: float
    generation: int


def _signature(strategy: MixedStrategy) -> bytes:
    """Genotype multiset plus probabilities quantized to a 1e-9 grid."""
    parts = sorted(
        (item.structural_key() if hasattr(item, "structural_key") else repr(item).encode(),
         round(prob / 1e-9))
        for item, prob in strategy.members
    )
    return b"|".join(key + b":" + str(q).encode() for key, q in parts)


class HallOfFame:
    """Bounded archive of mixed strategies with lowest-fitness eviction."""

    def __init__(self, policy: HofPolicy = HofPolicy.NASH_MIXED,
                 max_size: int | None = 500):
        if max_size is not None and max_size < 0:
            raise ValueError("max_size must be None or >= 0")
        self.policy = HofPolicy(policy)
        self.max_size = max_size
        self.entries: list[HofEntry] = []
        self.eviction_count = 0
        self._signatures: set[bytes] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def insert(self, strategy: MixedStrategy, fitness: float, generation: int) -> bool:
        """Add one entry; duplicates (within the 1e-9 grid) are skipped."""
        if self.max_size == 0:
            return False
        signature = _signature(strategy)
        if signature in self._signatures:
            return False
        self.entries.append(HofEntry(strategy, float(fitness), int(generation)))
        self._signatures.add(signature)
        evict_if_needed(self)
        return True

    def strategies(self) -> list[MixedStrategy]:
        return [entry.strategy for entry in self.entries]


def evict_if_needed(hof: HallOfFame) -> HallOfFame:
    """Drop lowest-fitness entries (ties: oldest generation) while over capacity."""
    while hof.max_size is not None and len(hof.entries) > hof.max_size:
        index = min(range(len(hof.entries)),
                    key=lambda i: (hof.entries[i].fitness, hof.entries[i].generation))
        removed = hof.entries.pop(index)
        hof._signatures.discard(_signature(removed.strategy))
        hof.eviction_count += 1
    return hof


def _unique_by_fitness(population, fitnesses):
    """Population deduplicated by identity, ranked fitness-descending (stable)."""
    order = np.argsort(-np.asarray(fitnesses), kind="stable")
    seen = set()
    ranked = []
    for i in order:
        item = population[int(i)]
        if item.uid in seen:
            continue
        seen.add(item.uid)
        ranked.append(item)
    return ranked


def policy_candidates(policy: HofPolicy, population, fitnesses,
                      equilibrium: MixedStrategy | None) -> list[MixedStrategy]:
    """Strategies a policy wants archived this generation.

    The top-K policies take K from the equilibrium support size; the mixed
    variant spreads uniform probability over those K individuals.
    """
    policy = HofPolicy(policy)
    if policy in POLICIES_NEEDING_EQUILIBRIUM and equilibrium is None:
        raise ValueError(f"policy {policy.value} requires an equilibrium")
    if policy == HofPolicy.NASH_MIXED:
        return [equilibrium]
    if policy == HofPolicy.NASH_SINGLES:
        return [degenerate_strategy(item) for item, _ in equilibrium.members]
    ranked = _unique_by_fitness(population, fitnesses)
    if policy == HofPolicy.BEST_ONLY:
        return [degenerate_strategy(ranked[0])]
    k = min(equilibrium.support_size, len(ranked))
    top = ranked[:k]
    if policy == HofPolicy.TOP_K:
        return [degenerate_strategy(item) for item in top]
    return [MixedStrategy(tuple((item, 1.0 / len(top)) for item in top))]


def evaluation_set(hof: HallOfFame | None, opposing_population) -> list:
    """Opposing population (pure) plus archive strategies (mixed), deduplicated.

    Degenerate archive entries whose sole member already appears as a pure
    individual are dropped.
    """
    elements: list = []
    pure_keys = set()
    for item in opposing_population:
        key = item.structural_key()
        if key in pure_keys:
            continue
        pure_keys.add(key)
        elements.append(item)
    if hof is not None:
        for strategy in hof.strategies():
            if strategy.is_degenerate():
                member = strategy.members[0][0]
                if member.structural_key() in pure_keys:
                    continue
            elements.append(strategy)
    return elements
