"""Zero-sum game machinery: payoff matrices between the two populations,
Lemke-Howson equilibrium computation, and support enumeration as an
independent oracle and degeneracy fallback.

The matrix convention everywhere: rows are the tree player (maximizer),
columns the perturbation player (minimizer), entries the tree payoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .metrics import ObjectiveMode
from .tree import correct_counts

PROB_PRUNE = 1e-12
PROB_TOL = 1e-9
BR_TOL = 1e-9


class NashError(RuntimeError):
    """Equilibrium computation failed."""


class PivotLimitError(NashError):
    """Complementary pivoting exceeded its iteration budget."""


@dataclass(frozen=True)
class MixedStrategy:
    """Probability-weighted finite set of genotypes (or any payload)."""

    members: tuple

    def __post_init__(self):
        if not self.members:
            raise NashError("mixed strategy needs at least one member")
        total = 0.0
        seen = set()
        for item, prob in self.members:
            if prob <= PROB_PRUNE:
                raise NashError("mixed strategy carries a pruned-size probability")
            key = item.structural_key() if hasattr(item, "structural_key") else id(item)
            if key in seen:
                raise NashError("mixed strategy members must be distinct")
            seen.add(key)
            total += prob
        if abs(total - 1.0) > PROB_TOL:
            raise NashError(f"probabilities sum to {total}, not 1")

    @property
    def support_size(self) -> int:
        return len(self.members)

    def is_degenerate(self) -> bool:
        return len(self.members) == 1


def mixed_strategy(items, probabilities, prune: float = PROB_PRUNE) -> MixedStrategy:
    """Build a strategy, pruning numerical-noise probabilities and renormalizing."""
    pairs = [(item, float(p)) for item, p in zip(items, probabilities) if p > prune]
    if not pairs:
        raise NashError("all probabilities pruned")
    total = sum(p for _, p in pairs)
    return MixedStrategy(tuple((item, p / total) for item, p in pairs))


def degenerate_strategy(item) -> MixedStrategy:
    return MixedStrategy(((item, 1.0),))


def build_payoff_matrix(trees, perturbations, dataset, mode, reference=None) -> np.ndarray:
    """Tree-player payoffs for every (tree, perturbation) pair.

    Adversarial-accuracy mode: accuracy under the perturbation. Max-regret
    mode: 1 - regret, with regret clamped to [0, 1]; the reference oracle
    accuracy is taken from (or stored into) each genotype's cache.
    """
    if not trees or not perturbations:
        raise NashError("payoff matrix needs both populations non-empty")
    stacked = np.vstack([p.values for p in perturbations])
    counts = correct_counts(list(trees), stacked, dataset.labels)
    acc = counts / float(len(dataset.labels))
    if mode == ObjectiveMode.ADVERSARIAL_ACCURACY:
        return acc
    refs = np.array([reference.reference_accuracy(p) for p in perturbations])
    raw = refs[None, :] - acc
    clamped = raw < 0.0
    if reference is not None:
        reference.clamp_events += int(clamped.sum())
    return 1.0 - np.where(clamped, 0.0, raw)


# ---------------------------------------------------------------------------
# Lemke-Howson with lexicographic ratio tests.
#
# Two tableaux in dictionary form, one per best-response polytope; column
# index doubles as the label. Population payoff matrices routinely carry
# duplicate rows/columns (tournament copies), so the games are degenerate;
# the lexicographic rule keeps pivoting acyclic there.

def _pivot(tableau, basis, lex_columns, entering) -> int:
    column = tableau[:, entering]
    rows = np.flatnonzero(column > 1e-12)
    if rows.size == 0:
        raise NashError("no eligible pivot row; matrix not positive?")
    best_row = -1
    best_key = None
    for r in rows:
        key = (tableau[r, -1] / column[r],) + tuple(tableau[r, lex_columns] / column[r])
        if best_key is None or key < best_key:
            best_key, best_row = key, r
    tableau[best_row, :] /= tableau[best_row, entering]
    for i in range(tableau.shape[0]):
        if i != best_row and tableau[i, entering] != 0.0:
            tableau[i, :] -= tableau[i, entering] * tableau[best_row, :]
    leaving = basis[best_row]
    basis[best_row] = entering
    return leaving


def lemke_howson(matrix, initial_label: int = 0,
                 max_pivots: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One mixed Nash equilibrium of the zero-sum game with payoffs ``matrix``.

    Complementary pivoting from ``initial_label`` on the bimatrix
    (A, -A) after the standard positive offset transform. Returns the
    (row, column) strategy vectors.
    """
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise NashError("matrix must be 2-D and non-empty")
    if not np.all(np.isfinite(A)):
        raise NashError("matrix entries must be finite")
    m, n = A.shape
    if not 0 <= initial_label < m + n:
        raise NashError(f"initial label {initial_label} out of range")
    if max_pivots is None:
        max_pivots = max(100, 10 * (m + n) ** 2)

    row_payoff = A - A.min() + 1.0         # strictly positive
    col_payoff = (-A) - (-A).min() + 1.0

    # Row-strategy tableau: columns [x_0..x_{m-1} | slacks | rhs].
    tab_x = np.hstack([col_payoff.T, np.eye(n), np.ones((n, 1))])
    basis_x = list(range(m, m + n))
    lex_x = list(range(m, m + n))
    # Column-strategy tableau: columns [slacks | y_0..y_{n-1} | rhs].
    tab_y = np.hstack([np.eye(m), row_payoff, np.ones((m, 1))])
    basis_y = list(range(m))
    lex_y = list(range(m))

    in_x_side = initial_label < m
    entering = initial_label
    for _ in range(max_pivots):
        if in_x_side:
            leaving = _pivot(tab_x, basis_x, lex_x, entering)
        else:
            leaving = _pivot(tab_y, basis_y, lex_y, entering)
        if leaving == initial_label:
            break
        entering = leaving
        in_x_side = not in_x_side
    else:
        raise PivotLimitError(f"no equilibrium within {max_pivots} pivots")

    x = np.zeros(m)
    for row, label in enumerate(basis_x):
        if label < m:
            x[label] = tab_x[row, -1]
    y = np.zeros(n)
    for row, label in enumerate(basis_y):
        if label >= m:
            y[label - m] = tab_y[row, -1]
    if x.sum() <= 0 or y.sum() <= 0:
        raise NashError("degenerate pivot path produced an empty strategy")
    return x / x.sum(), y / y.sum()


def best_response_gaps(matrix, x, y) -> tuple[float, float]:
    """How far each player is from best-responding (0 at an equilibrium).

    The column player minimizes, so its gap is the value minus the best
    (lowest) column payoff.
    """
    A = np.asarray(matrix, dtype=np.float64)
    value = float(x @ A @ y)
    row_gap = float((A @ y).max() - value)
    col_gap = float(value - (x @ A).min())
    return row_gap, col_gap


def game_value(matrix, x, y) -> float:
    return float(np.asarray(x) @ np.asarray(matrix) @ np.asarray(y))


def support_enumeration(matrix, tol: float = BR_TOL) -> list[tuple[np.ndarray, np.ndarray]]:
    """All equilibria on equal-size supports, each verified as a best response.

    Exponential in min(m, n); guarded at 8 strategies. Used as the testing
    oracle for lemke_howson and as its small-game degeneracy fallback.
    """
    A = np.asarray(matrix, dtype=np.float64)
    m, n = A.shape
    if min(m, n) > 8:
        raise NashError("support enumeration guarded to min(m, n) <= 8")
    atol = tol * max(1.0, float(np.abs(A).max()))
    found: list[tuple[np.ndarray, np.ndarray]] = []
    for k in range(1, min(m, n) + 1):
        for rows in combinations(range(m), k):
            for cols in combinations(range(n), k):
                eq = _solve_support(A, rows, cols, atol)
                if eq is not None:
                    found.append(eq)
    return found


def _solve_support(A, rows, cols, atol):
    k = len(rows)
    # Column strategy y: supported rows indifferent at value v.
    sys_y = np.zeros((k + 1, k + 1))
    sys_y[:k, :k] = A[np.ix_(rows, cols)]
    sys_y[:k, k] = -1.0
    sys_y[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol_y = np.linalg.solve(sys_y, rhs)
    except np.linalg.LinAlgError:
        return None
    y_sub, v = sol_y[:k], sol_y[k]
    if y_sub.min() < -atol:
        return None
    # Row strategy x: supported columns indifferent at value w.
    sys_x = np.zeros((k + 1, k + 1))
    sys_x[:k, :k] = A[np.ix_(rows, cols)].T
    sys_x[:k, k] = -1.0
    sys_x[k, :k] = 1.0
    try:
        sol_x = np.linalg.solve(sys_x, rhs)
    except np.linalg.LinAlgError:
        return None
    x_sub, w = sol_x[:k], sol_x[k]
    if x_sub.min() < -atol or abs(v - w) > atol:
        return None
    x = np.zeros(A.shape[0])
    x[list(rows)] = np.clip(x_sub, 0.0, None)
    x /= x.sum()
    y = np.zeros(A.shape[1])
    y[list(cols)] = np.clip(y_sub, 0.0, None)
    y /= y.sum()
    row_gap, col_gap = best_response_gaps(A, x, y)
    if row_gap > atol or col_gap > atol:
        return None
    return x, y


@dataclass(frozen=True)
class Equilibrium:
    row_strategy: np.ndarray
    column_strategy: np.ndarray
    value: float
    method: str
    fallbacks: int


def solve_zero_sum(matrix, initial_label: int = 0) -> Equilibrium:
    """Lemke-Howson with the fallback ladder.

    On pivot-limit failure or a strategy missing the best-response check:
    support enumeration when min(m, n) <= 8, otherwise retries from every
    other initial label. Fallback attempts are counted for diagnostics.
    """
    A = np.asarray(matrix, dtype=np.float64)
    m, n = A.shape
    atol = BR_TOL * max(1.0, float(np.abs(A).max()))
    fallbacks = 0

    def attempt(label):
        x, y = lemke_howson(A, label)
        row_gap, col_gap = best_response_gaps(A, x, y)
        if row_gap > atol or col_gap > atol:
            raise NashError(f"best-response gaps ({row_gap:g}, {col_gap:g}) too large")
        return x, y

    try:
        x, y = attempt(initial_label)
        return Equilibrium(x, y, game_value(A, x, y), "lemke-howson", fallbacks)
    except NashError:
        fallbacks += 1
    if min(m, n) <= 8:
        equilibria = support_enumeration(A)
        if equilibria:
            x, y = equilibria[0]
            return Equilibrium(x, y, game_value(A, x, y), "support-enumeration", fallbacks)
        raise NashError("no equilibrium found by support enumeration")
    for label in range(m + n):
        if label == initial_label:
            continue
        try:
            x, y = attempt(label)
            return Equilibrium(x, y, game_value(A, x, y), f"lemke-howson:{label}", fallbacks)
        except NashError:
            fallbacks += 1
    raise NashError(f"equilibrium search exhausted after {fallbacks} attempts")
