import json

import numpy as np
import pytest

import coevotree as ct
from coevotree.tree import OP_CHARS


META = ct.TreeMeta(feature_count=3, class_count=4)


def leaf_tree(klass, meta=META):
    return ct.TreeGenotype([0], [0], [0.0], [-1], [-1], [-1], [klass],
                           meta.feature_count, meta.class_count)


def test_single_leaf_predicts_its_class():
    tree = leaf_tree(1)
    assert tree.predict([0.3, 0.7, 0.2]) == 1
    assert tree.depth == 0


def test_predict_rejects_wrong_width():
    tree = leaf_tree(0)
    with pytest.raises(ct.TreeValidationError):
        tree.predict([0.1, 0.2])


def test_credit_rule_classifies_loan_table(loan):
    dataset = loan["dataset"]
    tree = loan["rule_credit"]
    predictions = [tree.predict(row) for row in dataset.instances]
    assert predictions == dataset.labels.tolist()


def test_depth_two_tree_matches_region_enumeration():
    # root: x0 < 0.5 ; left child: x1 < 0.3 ; right child: x1 > 0.6
    tree = ct.TreeGenotype(
        attribute=[0, 1, 1, 0, 0, 0, 0],
        operator=[0, 0, 1, 0, 0, 0, 0],
        threshold=[0.5, 0.3, 0.6, 0.0, 0.0, 0.0, 0.0],
        left=[1, 3, 5, -1, -1, -1, -1],
        right=[2, 4, 6, -1, -1, -1, -1],
        parent=[-1, 0, 0, 1, 1, 2, 2],
        klass=[0, 0, 0, 0, 1, 2, 3],
        feature_count=2, class_count=4)
    ct.validate_tree(tree)

    def oracle(x0, x1):
        # hand-enumerated regions of the two-split partition
        if x0 < 0.5:
            return 0 if x1 < 0.3 else 1
        return 2 if x1 > 0.6 else 3

    rng = np.random.default_rng(0)
    grid = [(a, b) for a in np.linspace(0, 1, 11) for b in np.linspace(0, 1, 11)]
    points = grid + [tuple(p) for p in rng.random((200, 2))]
    for x0, x1 in points:
        assert tree.predict([x0, x1]) == oracle(x0, x1)


def test_prediction_total_on_unit_box():
    rng = np.random.default_rng(1)
    for _ in range(20):
        tree = ct.random_tree(META, (1, 6), rng)
        points = rng.random((200, 3))
        predictions = tree.predict_batch(points)
        assert np.all((predictions >= 0) & (predictions < META.class_count))


def test_random_tree_depths_within_interval():
    rng = np.random.default_rng(2)
    depths = {ct.random_tree(META, (2, 10), rng).depth for _ in range(1000)}
    assert depths <= set(range(2, 11))
    assert len(depths) > 4  # actually spans the interval


def test_random_tree_minimal_interval_is_root_with_two_leaves():
    rng = np.random.default_rng(3)
    tree = ct.random_tree(META, (1, 1), rng)
    assert tree.depth == 1
    assert len(tree) == 3


def test_random_tree_deterministic_for_fixed_seed():
    a = ct.random_tree(META, (2, 8), np.random.default_rng(42))
    b = ct.random_tree(META, (2, 8), np.random.default_rng(42))
    assert a.structural_key() == b.structural_key()


def test_random_tree_respects_splittable_mask():
    meta = ct.TreeMeta(3, 2, splittable=np.array([False, True, False]))
    rng = np.random.default_rng(4)
    for _ in range(50):
        tree = ct.random_tree(meta, (2, 5), rng)
        internal = tree.left >= 0
        assert np.all(tree.attribute[internal] == 1)


def test_crossover_at_roots_swaps_parents():
    # crossing two single-leaf trees can only pick the roots
    a, b = leaf_tree(1), leaf_tree(2)
    c0, c1 = ct.crossover_trees(a, b, np.random.default_rng(0))
    assert c0.klass.tolist() == [2]
    assert c1.klass.tolist() == [1]


def test_crossover_leaf_for_leaf_changes_only_leaf_classes():
    rng = np.random.default_rng(20)
    a = ct.random_tree(META, (1, 1), rng)
    b = ct.random_tree(META, (1, 1), rng)
    leaf_swaps = 0
    for _ in range(200):
        c0, c1 = ct.crossover_trees(a, b, rng)
        same_topology = len(c0) == len(a) and len(c1) == len(b)
        internals_kept = (np.array_equal(c0.threshold[:1], a.threshold[:1])
                          and np.array_equal(c0.attribute[:1], a.attribute[:1]))
        if same_topology and internals_kept and not np.array_equal(c0.klass, a.klass):
            # a leaf-for-leaf swap: structure intact, one leaf class traded
            leaf_swaps += 1
            assert np.array_equal(c0.left, a.left)
            assert np.array_equal(c0.right, a.right)
    assert leaf_swaps > 0


def test_crossover_preserves_parents():
    rng = np.random.default_rng(5)
    a = ct.random_tree(META, (2, 6), rng)
    b = ct.random_tree(META, (2, 6), rng)
    key_a, key_b = a.structural_key(), b.structural_key()
    ct.crossover_trees(a, b, rng)
    assert a.structural_key() == key_a and b.structural_key() == key_b


def test_crossover_closure_property():
    rng = np.random.default_rng(6)
    pool = [ct.random_tree(META, (2, 8), rng) for _ in range(20)]
    for _ in range(500):
        i, j = rng.integers(len(pool), size=2)
        c0, c1 = ct.crossover_trees(pool[i], pool[j], rng)
        ct.validate_tree(c0)
        ct.validate_tree(c1)
        pool[rng.integers(len(pool))] = c0 if rng.random() < 0.5 else c1


def test_crossover_respects_depth_cap():
    rng = np.random.default_rng(7)
    pool = [ct.random_tree(META, (4, 8), rng) for _ in range(10)]
    for _ in range(300):
        i, j = rng.integers(len(pool), size=2)
        c0, c1 = ct.crossover_trees(pool[i], pool[j], rng, depth_cap=9)
        assert c0.depth <= 9 and c1.depth <= 9
        pool[rng.integers(len(pool))] = c0


def test_mutate_candidates_count_and_validity():
    rng = np.random.default_rng(8)
    tree = ct.random_tree(META, (3, 6), rng)
    candidates = ct.mutate_candidates(tree, META, rng, trials=10)
    assert len(candidates) == 10
    for candidate in candidates:
        ct.validate_tree(candidate)


def test_prune_action_at_root_gives_single_leaf():
    rng = np.random.default_rng(9)
    tree = ct.random_tree(META, (3, 3), rng)
    seen_single_leaf = False
    for _ in range(300):
        for mutant in ct.mutate_candidates(tree, META, rng, trials=1):
            if len(mutant) == 1:
                seen_single_leaf = True
                assert mutant.depth == 0
    assert seen_single_leaf


def test_value_mutation_keeps_topology():
    # action (ii) re-draws v or o only; node count must be conserved in
    # any mutant that shares the parent's topology signature
    rng = np.random.default_rng(10)
    tree = ct.random_tree(META, (4, 4), rng)
    same_topology = 0
    for _ in range(200):
        mutant = ct.mutate_candidates(tree, META, rng, trials=1)[0]
        if np.array_equal(mutant.left, tree.left) and np.array_equal(mutant.right, tree.right):
            same_topology += 1
            assert len(mutant) == len(tree)
    assert same_topology > 0


def test_serialize_round_trip_is_byte_identical():
    rng = np.random.default_rng(11)
    for _ in range(20):
        tree = ct.random_tree(META, (1, 8), rng)
        text = ct.serialize_tree(tree)
        again = ct.serialize_tree(ct.deserialize_tree(text))
        assert again == text


def test_deserialize_rejects_dangling_child():
    doc = {
        "feature_count": 2,
        "class_count": 2,
        "nodes": [
            {"t": 0, "c": 0, "P": None, "L": 1, "R": 5, "o": "<", "v": 0.5, "a": 0},
            {"t": 1, "c": 1, "P": 0, "L": None, "R": None, "o": "<", "v": 0.0, "a": 0},
        ],
    }
    with pytest.raises(ct.TreeValidationError, match=r"nodes\[0\]\.R"):
        ct.deserialize_tree(json.dumps(doc))


def test_deserialize_rejects_bad_operator_and_version_shape():
    with pytest.raises(ct.TreeValidationError, match="JSON"):
        ct.deserialize_tree("not json")
    with pytest.raises(ct.TreeValidationError, match="missing field"):
        ct.deserialize_tree(json.dumps({"feature_count": 2, "class_count": 2}))


def test_hand_written_rule_imports_and_predicts(loan):
    # externally authored one-rule tree in normalized units:
    # credit score above 1/3 (raw 50) accepts
    doc = {
        "feature_count": 2,
        "class_count": 2,
        "nodes": [
            {"t": 0, "c": 0, "P": None, "L": 1, "R": 2, "o": ">", "v": 1.0 / 3.0, "a": 1},
            {"t": 1, "c": 1, "P": 0, "L": None, "R": None, "o": "<", "v": 0.0, "a": 0},
            {"t": 2, "c": 0, "P": 0, "L": None, "R": None, "o": "<", "v": 0.0, "a": 0},
        ],
    }
    tree = ct.deserialize_tree(json.dumps(doc))
    dataset = loan["dataset"]
    assert [tree.predict(row) for row in dataset.instances] == dataset.labels.tolist()


def test_depth_cache_matches_recomputation_after_operators():
    rng = np.random.default_rng(12)
    pool = [ct.random_tree(META, (2, 7), rng) for _ in range(10)]
    for _ in range(200):
        i, j = rng.integers(len(pool), size=2)
        for out in ct.crossover_trees(pool[i], pool[j], rng):
            ct.validate_tree(out)  # includes the cache equality check
        for out in ct.mutate_candidates(pool[i], META, rng, trials=3):
            ct.validate_tree(out)


def test_operator_set_is_lt_gt_eq():
    assert OP_CHARS == ("<", ">", "=")


def test_equality_operator_uses_tolerance():
    tree = ct.TreeGenotype([0, 0, 0], [2, 0, 0], [0.5, 0.0, 0.0],
                           [1, -1, -1], [2, -1, -1], [-1, 0, 0], [0, 1, 0],
                           feature_count=1, class_count=2)
    assert tree.predict([0.5]) == 1
    assert tree.predict([0.5 + 5e-10]) == 1
    assert tree.predict([0.5 + 5e-9]) == 0
