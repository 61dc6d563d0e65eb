import numpy as np
import pytest

import coevotree as ct
from conftest import make_dataset


def test_gini_identities():
    assert ct.gini([10, 0]) == pytest.approx(0.0, abs=1e-15)
    assert ct.gini([5, 5]) == pytest.approx(0.5, abs=1e-15)
    assert ct.gini([1, 1, 1, 1]) == pytest.approx(0.75, abs=1e-15)


def test_gini_permutation_and_scale_invariance():
    rng = np.random.default_rng(0)
    for _ in range(100):
        counts = rng.integers(0, 30, size=4)
        counts[rng.integers(4)] += 1  # keep at least one positive
        base = ct.gini(counts)
        assert ct.gini(counts[::-1]) == pytest.approx(base, abs=1e-12)
        assert ct.gini(counts * 3) == pytest.approx(base, abs=1e-12)


def test_gini_rejects_degenerate_input():
    with pytest.raises(ValueError):
        ct.gini([0, 0])
    with pytest.raises(ValueError):
        ct.gini([-1, 2])


def test_build_cart_separable_1d():
    X = np.array([[0.1], [0.2], [0.8], [0.9]])
    y = np.array([0, 0, 1, 1])
    tree = ct.build_cart(X, y, class_count=2)
    assert tree.depth == 1
    assert ct.accuracy(tree, X, y) == 1.0


def test_build_cart_single_class_is_leaf():
    X = np.array([[0.1], [0.5], [0.9]])
    y = np.array([1, 1, 1])
    tree = ct.build_cart(X, y, class_count=2)
    assert len(tree) == 1
    assert tree.predict([0.3]) == 1


def test_build_cart_beats_best_single_split():
    rng = np.random.default_rng(1)
    X = rng.random((50, 3))
    y = rng.integers(0, 2, size=50)
    tree = ct.build_cart(X, y, class_count=2)
    fitted = ct.accuracy(tree, X, y)

    # exhaustive single-split oracle
    best = max(np.mean(y == 0), np.mean(y == 1))
    for j in range(X.shape[1]):
        values = np.unique(X[:, j])
        for threshold in (values[:-1] + values[1:]) / 2:
            left = X[:, j] < threshold
            for c_left in (0, 1):
                acc = (np.mean(y[left] == c_left) * left.mean() +
                       np.mean(y[~left] == 1 - c_left) * (~left).mean())
                best = max(best, acc)
    assert fitted >= best - 1e-12


def test_build_cart_output_is_valid_and_depth_capped():
    rng = np.random.default_rng(2)
    for depth in (1, 3, 7):
        X = rng.random((60, 4))
        y = rng.integers(0, 3, size=60)
        tree = ct.build_cart(X, y, ct.CartParams(max_depth=depth), class_count=3)
        ct.validate_tree(tree)
        assert tree.depth <= depth


def test_build_cart_depth_monotone_training_accuracy():
    rng = np.random.default_rng(3)
    X = rng.random((80, 3))
    y = rng.integers(0, 2, size=80)
    accs = [ct.accuracy(ct.build_cart(X, y, ct.CartParams(max_depth=d), class_count=2), X, y)
            for d in range(1, 9)]
    assert all(b >= a - 1e-12 for a, b in zip(accs, accs[1:]))


def test_build_cart_deterministic():
    rng = np.random.default_rng(4)
    X = rng.random((40, 3))
    y = rng.integers(0, 2, size=40)
    a = ct.build_cart(X, y, class_count=2)
    b = ct.build_cart(X, y, class_count=2)
    assert a.structural_key() == b.structural_key()


def test_reference_accuracy_identity_on_separable(separable):
    X, y = separable
    dataset = make_dataset(X, y, epsilon=0.1)
    reference = ct.CartReference(dataset.labels, class_count=dataset.class_count)
    identity = ct.identity_perturbation(dataset)
    assert reference.reference_accuracy(identity) == 1.0


def test_reference_accuracy_collapsed_table_is_two_thirds(loan):
    dataset = loan["dataset"]
    t3 = loan["tables"][2]
    value = ct.reference_accuracy(t3, dataset.labels, class_count=dataset.class_count)
    assert value == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_reference_accuracy_cached_single_fit(loan):
    dataset = loan["dataset"]
    reference = ct.CartReference(dataset.labels, class_count=dataset.class_count)
    rng = np.random.default_rng(5)
    p = ct.random_perturbation(dataset, rng)
    first = reference.reference_accuracy(p)
    assert reference.fit_count == 1
    assert reference.reference_accuracy(p) == first
    assert reference.fit_count == 1
    assert p.reference_accuracy == pytest.approx(first, abs=1e-15)


def test_cart_params_validation():
    with pytest.raises(ValueError):
        ct.CartParams(max_depth=0)
    with pytest.raises(ValueError):
        ct.CartParams(min_samples_split=1)
    with pytest.raises(ValueError):
        ct.CartParams(min_impurity_decrease=-0.5)
