"""Perturbation genotype and operators.

A perturbation genotype is one perturbed copy of every training instance,
confined per coordinate to the epsilon ball intersected with [0,1]. The
module also provides the i.i.d. sampler used for final metric estimation.
"""

from __future__ import annotations

import itertools

import numpy as np

from .dataset import BALL_TOL, Dataset

_uid_counter = itertools.count()


class PerturbationGenotype:
    """Immutable perturbed copy of the full training set.

    ``reference_accuracy`` is a single-assignment cache for the regret
    oracle; operators always produce genotypes with an empty cache.
    """

    __slots__ = ("values", "uid", "_ref_acc", "_key")

    def __init__(self, values: np.ndarray):
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.values.setflags(write=False)
        self.uid = next(_uid_counter)
        self._ref_acc = None
        self._key = None

    def __len__(self) -> int:
        return len(self.values)

    @property
    def reference_accuracy(self):
        return self._ref_acc

    def set_reference_accuracy(self, value: float) -> None:
        if self._ref_acc is not None and abs(self._ref_acc - value) > 1e-12:
            raise ValueError("reference accuracy cache is single-assignment")
        self._ref_acc = float(value)

    def structural_key(self) -> bytes:
        if self._key is None:
            self._key = self.values.tobytes()
        return self._key

    def check_membership(self, dataset: Dataset) -> None:
        """Assert ball and box membership against the dataset."""
        if self.values.shape != dataset.instances.shape:
            raise ValueError("perturbation shape does not match dataset")
        gap = np.abs(self.values - dataset.instances).max()
        if gap > dataset.epsilon + BALL_TOL:
            raise ValueError(f"perturbation leaves the epsilon ball by {gap - dataset.epsilon:g}")
        if self.values.min() < -BALL_TOL or self.values.max() > 1.0 + BALL_TOL:
            raise ValueError("perturbation leaves the unit box")


def _draw(low: np.ndarray, high: np.ndarray, rng, grid: int | None) -> np.ndarray:
    """Uniform draw per coordinate from [low, high], or from a grid lattice.

    ``grid=k`` restricts each coordinate to k evenly spaced points of its
    feasible interval (used for exhaustively checkable finite games).
    """
    if grid is None:
        return low + rng.random(low.shape) * (high - low)
    if grid < 2:
        raise ValueError("grid needs at least 2 points")
    steps = rng.integers(grid, size=low.shape).astype(np.float64)
    return low + steps * (high - low) / (grid - 1)


def identity_perturbation(dataset: Dataset) -> PerturbationGenotype:
    """The unperturbed training set as a genotype."""
    return PerturbationGenotype(dataset.instances.copy())


def random_perturbation(dataset: Dataset, rng, grid: int | None = None) -> PerturbationGenotype:
    """Each coordinate drawn uniformly from its clipped epsilon interval."""
    low, high = dataset.feasible_bounds()
    return PerturbationGenotype(_draw(low, high, rng, grid))


def crossover_perturbations(a: PerturbationGenotype, b: PerturbationGenotype,
                            rng) -> tuple[PerturbationGenotype, PerturbationGenotype]:
    """Instance-wise random swap; offspring 1 takes the complement of 0."""
    if a.values.shape != b.values.shape:
        raise ValueError("parents are not aligned to the same dataset")
    take_a = rng.random(len(a)) < 0.5
    mask = take_a[:, None]
    child0 = np.where(mask, a.values, b.values)
    child1 = np.where(mask, b.values, a.values)
    return PerturbationGenotype(child0), PerturbationGenotype(child1)


def mutate_perturbation(p: PerturbationGenotype, dataset: Dataset, rng,
                        grid: int | None = None) -> PerturbationGenotype:
    """Redraw each coordinate independently with probability 0.5."""
    if p.values.shape != dataset.instances.shape:
        raise ValueError("perturbation does not match dataset")
    low, high = dataset.feasible_bounds()
    redraw = rng.random(p.values.shape) < 0.5
    fresh = _draw(low, high, rng, grid)
    return PerturbationGenotype(np.where(redraw, fresh, p.values))


def sample_perturbation_set(dataset: Dataset, n: int, rng,
                            grid: int | None = None) -> list[PerturbationGenotype]:
    """n i.i.d. random perturbations; bit-reproducible for a fixed seed.

    Materializes every genotype; for estimation-scale n prefer the
    streaming scorer in :mod:`coevotree.metrics`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return [random_perturbation(dataset, rng, grid) for _ in range(n)]
