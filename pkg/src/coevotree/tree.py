"""Decision-tree genotype and its genetic operators.

Trees are stored as parallel numpy arrays indexed by node id (preorder,
root = 0). Child pointers are -1 at leaves. An internal node routes an
instance left when ``instance[attribute] <op> threshold`` holds, right
otherwise. Genotypes are immutable; every operator returns fresh copies.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
import numba
from numba import njit, prange

# The TBB probe is noisy on older system TBBs; OpenMP is always bundled.
numba.config.THREADING_LAYER = "omp"

OP_LT, OP_GT, OP_EQ = 0, 1, 2
OP_CHARS = ("<", ">", "=")
EQ_TOL = 1e-9
DEPTH_CAP = 25

_uid_counter = itertools.count()


class TreeValidationError(ValueError):
    """A genotype or tree document violates a structural invariant."""


@dataclass(frozen=True)
class TreeMeta:
    """Shape of the instance space a tree operates on."""

    feature_count: int
    class_count: int
    splittable: np.ndarray | None = None

    def splittable_features(self) -> np.ndarray:
        if self.splittable is None:
            return np.arange(self.feature_count)
        idx = np.flatnonzero(self.splittable)
        if idx.size == 0:
            raise TreeValidationError("no splittable features")
        return idx


@dataclass(frozen=True)
class NodeRecord:
    """One serialized tree node; fields mirror the on-disk schema."""

    node_id: int
    class_label: int
    parent: int | None
    left: int | None
    right: int | None
    operator: str
    split_value: float
    attribute: int


class TreeGenotype:
    """Immutable array-encoded decision tree."""

    __slots__ = (
        "attribute",
        "operator",
        "threshold",
        "left",
        "right",
        "parent",
        "klass",
        "depth",
        "feature_count",
        "class_count",
        "uid",
        "_key",
    )

    def __init__(self, attribute, operator, threshold, left, right, parent, klass,
                 feature_count, class_count, depth=None):
        self.attribute = np.ascontiguousarray(attribute, dtype=np.int64)
        self.operator = np.ascontiguousarray(operator, dtype=np.uint8)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int64)
        self.right = np.ascontiguousarray(right, dtype=np.int64)
        self.parent = np.ascontiguousarray(parent, dtype=np.int64)
        self.klass = np.ascontiguousarray(klass, dtype=np.int64)
        self.feature_count = int(feature_count)
        self.class_count = int(class_count)
        self.depth = int(depth) if depth is not None else _recompute_depth(self.left, self.right)
        self.uid = next(_uid_counter)
        self._key = None
        for arr in (self.attribute, self.operator, self.threshold, self.left,
                    self.right, self.parent, self.klass):
            arr.setflags(write=False)
        _check_cheap(self)

    def __len__(self) -> int:
        return len(self.klass)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def structural_key(self) -> bytes:
        """Content signature (ignores uid); used for deduplication."""
        if self._key is None:
            self._key = b"".join(
                a.tobytes()
                for a in (self.attribute, self.operator, self.threshold,
                          self.left, self.right, self.klass)
            )
        return self._key

    def predict(self, instance) -> int:
        """Route one instance from the root to a leaf and return its class."""
        instance = np.asarray(instance, dtype=np.float64)
        if instance.shape != (self.feature_count,):
            raise TreeValidationError(
                f"instance has {instance.shape} values, tree expects {self.feature_count}"
            )
        node = 0
        while self.left[node] >= 0:
            x = instance[self.attribute[node]]
            op = self.operator[node]
            v = self.threshold[node]
            if op == OP_LT:
                go_left = x < v
            elif op == OP_GT:
                go_left = x > v
            else:
                go_left = abs(x - v) <= EQ_TOL
            node = self.left[node] if go_left else self.right[node]
        return int(self.klass[node])

    def predict_batch(self, X) -> np.ndarray:
        """Vectorized prediction over a (rows, feature_count) matrix."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise TreeValidationError("matrix width does not match feature_count")
        out = np.empty(len(X), dtype=np.int64)
        _predict_kernel(self.attribute, self.operator, self.threshold,
                        self.left, self.right, self.klass, X, out)
        return out


def _check_cheap(tree: TreeGenotype) -> None:
    """Fast vectorized invariant checks run on every construction."""
    k = len(tree)
    if k < 1:
        raise TreeValidationError("empty node list")
    roots = np.flatnonzero(tree.parent == -1)
    if roots.size != 1 or roots[0] != 0:
        raise TreeValidationError("node 0 must be the unique root")
    internal = tree.left >= 0
    if np.any(internal != (tree.right >= 0)):
        raise TreeValidationError("node must have both children or neither")
    if 2 * int(internal.sum()) != k - 1:
        raise TreeValidationError("child slot count does not match node count")
    for child in (tree.left, tree.right):
        hits = child[internal]
        if hits.size and (hits.min() < 0 or hits.max() >= k):
            raise TreeValidationError("child pointer out of range")
        if np.any(tree.parent[hits] != np.flatnonzero(internal)):
            raise TreeValidationError("parent/child links inconsistent")
    if np.any(tree.threshold < 0.0) or np.any(tree.threshold > 1.0):
        raise TreeValidationError("split value outside [0,1]")
    if np.any(tree.attribute < 0) or np.any(tree.attribute >= tree.feature_count):
        raise TreeValidationError("attribute index out of range")
    if np.any(tree.klass < 0) or np.any(tree.klass >= tree.class_count):
        raise TreeValidationError("class label out of range")
    if np.any(tree.operator > OP_EQ):
        raise TreeValidationError("unknown operator code")


def validate_tree(tree: TreeGenotype) -> None:
    """Full structural validation: single rooted binary tree, depth cache."""
    _check_cheap(tree)
    k = len(tree)
    seen = np.zeros(k, dtype=bool)
    stack = [(0, 0)]
    depth = 0
    while stack:
        node, d = stack.pop()
        if seen[node]:
            raise TreeValidationError(f"node {node} reachable twice (cycle)")
        seen[node] = True
        depth = max(depth, d)
        if tree.left[node] >= 0:
            stack.append((int(tree.left[node]), d + 1))
            stack.append((int(tree.right[node]), d + 1))
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise TreeValidationError(f"node {missing} unreachable from root")
    if depth != tree.depth:
        raise TreeValidationError(f"cached depth {tree.depth} != recomputed {depth}")


def _recompute_depth(left, right) -> int:
    depth = 0
    stack = [(0, 0)]
    while stack:
        node, d = stack.pop()
        depth = max(depth, d)
        if left[node] >= 0:
            stack.append((int(left[node]), d + 1))
            stack.append((int(right[node]), d + 1))
    return depth


# ---------------------------------------------------------------------------
# Mutable node form used by the genetic operators.

class _Node:
    __slots__ = ("attribute", "operator", "threshold", "klass", "left", "right")

    def __init__(self, attribute, operator, threshold, klass, left=None, right=None):
        self.attribute = attribute
        self.operator = operator
        self.threshold = threshold
        self.klass = klass
        self.left = left
        self.right = right


def _to_nodes(tree: TreeGenotype) -> _Node:
    def build(i: int) -> _Node:
        node = _Node(int(tree.attribute[i]), int(tree.operator[i]),
                     float(tree.threshold[i]), int(tree.klass[i]))
        if tree.left[i] >= 0:
            node.left = build(int(tree.left[i]))
            node.right = build(int(tree.right[i]))
        return node

    return build(0)


def _from_nodes(root: _Node, meta: TreeMeta) -> TreeGenotype:
    attrs, ops, thrs, lefts, rights, parents, classes = [], [], [], [], [], [], []

    def emit(node: _Node, parent: int) -> int:
        idx = len(attrs)
        attrs.append(node.attribute)
        ops.append(node.operator)
        thrs.append(node.threshold)
        classes.append(node.klass)
        parents.append(parent)
        lefts.append(-1)
        rights.append(-1)
        if node.left is not None:
            lefts[idx] = emit(node.left, idx)
            rights[idx] = emit(node.right, idx)
        return idx

    emit(root, -1)
    return TreeGenotype(attrs, ops, thrs, lefts, rights, parents, classes,
                        meta.feature_count, meta.class_count)


def _copy_nodes(node: _Node) -> _Node:
    out = _Node(node.attribute, node.operator, node.threshold, node.klass)
    if node.left is not None:
        out.left = _copy_nodes(node.left)
        out.right = _copy_nodes(node.right)
    return out


def _collect(root: _Node) -> list[_Node]:
    nodes = []
    stack = [root]
    while stack:
        node = stack.pop()
        nodes.append(node)
        if node.left is not None:
            stack.append(node.right)
            stack.append(node.left)
    return nodes


def _truncate(root: _Node, cap: int) -> None:
    """Cut every node at depth >= cap down to a leaf (keeps its class)."""
    stack = [(root, 0)]
    while stack:
        node, d = stack.pop()
        if node.left is None:
            continue
        if d >= cap:
            node.left = node.right = None
        else:
            stack.append((node.left, d + 1))
            stack.append((node.right, d + 1))


def _draw_node(meta: TreeMeta, rng) -> _Node:
    features = meta.splittable_features()
    return _Node(
        attribute=int(features[rng.integers(len(features))]),
        operator=int(rng.integers(3)),
        threshold=float(rng.random()),
        klass=int(rng.integers(meta.class_count)),
    )


def _grow_free(meta: TreeMeta, limit: int, rng, branch_prob: float = 0.5) -> _Node:
    node = _draw_node(meta, rng)
    if limit > 0 and rng.random() < branch_prob:
        node.left = _grow_free(meta, limit - 1, rng)
        node.right = _grow_free(meta, limit - 1, rng)
    return node


def _grow_spine(meta: TreeMeta, target: int, rng) -> _Node:
    """Grow a random tree of depth exactly ``target``."""
    node = _draw_node(meta, rng)
    if target == 0:
        return node
    spine_left = rng.random() < 0.5
    spine = _grow_spine(meta, target - 1, rng)
    free = _grow_free(meta, target - 1, rng)
    node.left, node.right = (spine, free) if spine_left else (free, spine)
    return node


def random_tree(meta: TreeMeta, depth_interval: tuple[int, int], rng,
                depth_cap: int = DEPTH_CAP) -> TreeGenotype:
    """Random genotype with depth drawn uniformly from ``depth_interval``."""
    lo, hi = depth_interval
    if not 1 <= lo <= hi <= depth_cap:
        raise TreeValidationError(f"depth interval {depth_interval} not within [1, {depth_cap}]")
    target = int(rng.integers(lo, hi + 1))
    return _from_nodes(_grow_spine(meta, target, rng), meta)


def crossover_trees(a: TreeGenotype, b: TreeGenotype, rng,
                    depth_cap: int = DEPTH_CAP) -> tuple[TreeGenotype, TreeGenotype]:
    """Swap uniformly chosen subtrees between two parents.

    Offspring deeper than ``depth_cap`` are truncated back to leaves.
    """
    meta = TreeMeta(a.feature_count, a.class_count)
    root_a, root_b = _to_nodes(a), _to_nodes(b)
    nodes_a, nodes_b = _collect(root_a), _collect(root_b)
    pick_a = nodes_a[int(rng.integers(len(nodes_a)))]
    pick_b = nodes_b[int(rng.integers(len(nodes_b)))]
    graft_a, graft_b = _copy_nodes(pick_a), _copy_nodes(pick_b)

    def swap_in(root, target, graft):
        if root is target:
            return graft
        stack = [root]
        while stack:
            node = stack.pop()
            if node.left is None:
                continue
            if node.left is target:
                node.left = graft
                return root
            if node.right is target:
                node.right = graft
                return root
            stack.append(node.left)
            stack.append(node.right)
        raise AssertionError("crossover target vanished")

    root_a = swap_in(root_a, pick_a, graft_b)
    root_b = swap_in(root_b, pick_b, graft_a)
    _truncate(root_a, depth_cap)
    _truncate(root_b, depth_cap)
    return _from_nodes(root_a, meta), _from_nodes(root_b, meta)


def _mutate_once(tree: TreeGenotype, meta: TreeMeta, rng,
                 depth_interval: tuple[int, int], depth_cap: int) -> TreeGenotype:
    root = _to_nodes(tree)
    nodes = _collect(root)
    action = int(rng.integers(3))
    if action == 0:
        # replace a random subtree with a freshly grown one
        target = nodes[int(rng.integers(len(nodes)))]
        lo, hi = depth_interval
        fresh = _grow_spine(meta, int(rng.integers(lo, hi + 1)), rng)
        if target is root:
            root = fresh
        else:
            for node in nodes:
                if node.left is target:
                    node.left = fresh
                    break
                if node.right is target:
                    node.right = fresh
                    break
        _truncate(root, depth_cap)
    elif action == 1:
        # re-randomize the split value or operator at one node
        internal = [n for n in nodes if n.left is not None]
        if internal:
            target = internal[int(rng.integers(len(internal)))]
            if rng.random() < 0.5:
                target.threshold = float(rng.random())
            else:
                target.operator = int(rng.integers(3))
        else:
            root.klass = int(rng.integers(meta.class_count))
    else:
        # prune a random subtree down to a leaf with a fresh class
        target = nodes[int(rng.integers(len(nodes)))]
        target.left = target.right = None
        target.klass = int(rng.integers(meta.class_count))
    return _from_nodes(root, meta)


def mutate_candidates(tree: TreeGenotype, meta: TreeMeta, rng, trials: int = 10,
                      depth_interval: tuple[int, int] = (2, 10),
                      depth_cap: int = DEPTH_CAP) -> list[TreeGenotype]:
    """Produce ``trials`` independent single-action mutants of one parent.

    Each mutant applies exactly one of: subtree replacement, split value /
    operator re-draw, or subtree pruning, chosen uniformly. Picking the
    best of the batch is the caller's job (it needs fitness).
    """
    if trials < 1:
        raise TreeValidationError("trials must be >= 1")
    return [_mutate_once(tree, meta, rng, depth_interval, depth_cap) for _ in range(trials)]


# ---------------------------------------------------------------------------
# Serialization: a JSON document in normalized units. This is also the
# import format for warm-start trees.

def _node_records(tree: TreeGenotype) -> list[dict]:
    records = []
    for i in range(len(tree)):
        records.append({
            "t": i,
            "c": int(tree.klass[i]),
            "P": int(tree.parent[i]) if tree.parent[i] >= 0 else None,
            "L": int(tree.left[i]) if tree.left[i] >= 0 else None,
            "R": int(tree.right[i]) if tree.right[i] >= 0 else None,
            "o": OP_CHARS[tree.operator[i]],
            "v": float(tree.threshold[i]),
            "a": int(tree.attribute[i]),
        })
    return records


def tree_document(tree: TreeGenotype) -> dict:
    return {
        "feature_count": tree.feature_count,
        "class_count": tree.class_count,
        "nodes": _node_records(tree),
    }


def serialize_tree(tree: TreeGenotype) -> str:
    """Canonical newline-terminated JSON text for a genotype."""
    return json.dumps(tree_document(tree), indent=2) + "\n"


def _field(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise TreeValidationError(f"{path}: missing field {key!r}")
    return mapping[key]


def tree_from_document(doc: dict) -> TreeGenotype:
    feature_count = _field(doc, "feature_count", "document")
    class_count = _field(doc, "class_count", "document")
    nodes = _field(doc, "nodes", "document")
    if not isinstance(nodes, list) or not nodes:
        raise TreeValidationError("document: nodes must be a non-empty list")
    k = len(nodes)
    by_id: dict[int, dict] = {}
    for pos, rec in enumerate(nodes):
        t = _field(rec, "t", f"nodes[{pos}]")
        if not isinstance(t, int) or not 0 <= t < k or t in by_id:
            raise TreeValidationError(f"nodes[{pos}]: node id {t!r} not a dense unique index")
        by_id[t] = rec

    arrays = {name: np.empty(k, dtype=np.int64) for name in
              ("attribute", "left", "right", "parent", "klass")}
    ops = np.empty(k, dtype=np.uint8)
    thresholds = np.empty(k, dtype=np.float64)
    for t in range(k):
        rec = by_id[t]
        path = f"nodes[{t}]"
        for key, name in (("L", "left"), ("R", "right"), ("P", "parent")):
            value = _field(rec, key, path)
            if value is None:
                arrays[name][t] = -1
            elif isinstance(value, int) and 0 <= value < k:
                arrays[name][t] = value
            else:
                raise TreeValidationError(f"{path}.{key}: points to missing node {value!r}")
        op = _field(rec, "o", path)
        if op not in OP_CHARS:
            raise TreeValidationError(f"{path}.o: unknown operator {op!r}")
        ops[t] = OP_CHARS.index(op)
        thresholds[t] = float(_field(rec, "v", path))
        arrays["attribute"][t] = int(_field(rec, "a", path))
        arrays["klass"][t] = int(_field(rec, "c", path))

    tree = TreeGenotype(arrays["attribute"], ops, thresholds, arrays["left"],
                        arrays["right"], arrays["parent"], arrays["klass"],
                        feature_count, class_count)
    validate_tree(tree)
    return tree


def deserialize_tree(text: str) -> TreeGenotype:
    """Parse and fully validate a tree document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeValidationError(f"tree document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise TreeValidationError("tree document must be a JSON object")
    return tree_from_document(doc)


# ---------------------------------------------------------------------------
# Numba kernels: the hot path for fitness evaluation. All reductions are
# integer counts so results are identical at any thread count.

@njit(cache=True)
def _predict_kernel(attr, opc, thr, left, right, cls, X, out):
    for r in range(X.shape[0]):
        node = 0
        while left[node] >= 0:
            x = X[r, attr[node]]
            o = opc[node]
            if o == 0:
                go_left = x < thr[node]
            elif o == 1:
                go_left = x > thr[node]
            else:
                go_left = abs(x - thr[node]) <= 1e-9
            node = left[node] if go_left else right[node]
        out[r] = cls[node]


@njit(cache=True, parallel=True)
def _count_correct_kernel(attr, opc, thr, left, right, cls, base, X, labels, out):
    n = labels.shape[0]
    blocks = X.shape[0] // n
    trees = base.shape[0] - 1
    for t in prange(trees):
        lo = base[t]
        for u in range(blocks):
            good = 0
            row0 = u * n
            for i in range(n):
                r = row0 + i
                node = lo
                while left[node] >= 0:
                    x = X[r, attr[node]]
                    o = opc[node]
                    if o == 0:
                        go_left = x < thr[node]
                    elif o == 1:
                        go_left = x > thr[node]
                    else:
                        go_left = abs(x - thr[node]) <= 1e-9
                    node = lo + (left[node] if go_left else right[node])
                if cls[node] == labels[i]:
                    good += 1
            out[t, u] = good


def stack_forest(trees: list[TreeGenotype]):
    """Concatenate genotype arrays for the batch kernel."""
    base = np.zeros(len(trees) + 1, dtype=np.int64)
    for i, tree in enumerate(trees):
        base[i + 1] = base[i] + len(tree)
    cat = lambda name, dtype: np.concatenate(
        [getattr(t, name) for t in trees]).astype(dtype, copy=False)
    return (cat("attribute", np.int64), cat("operator", np.uint8),
            cat("threshold", np.float64), cat("left", np.int64),
            cat("right", np.int64), cat("klass", np.int64), base)


def correct_counts(trees: list[TreeGenotype], stacked_instances: np.ndarray,
                   labels: np.ndarray) -> np.ndarray:
    """Correct-prediction counts, shape (trees, blocks).

    ``stacked_instances`` holds one or more (len(labels), d) matrices
    stacked along axis 0.
    """
    attr, opc, thr, left, right, cls, base = stack_forest(trees)
    X = np.ascontiguousarray(stacked_instances, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    out = np.empty((len(trees), X.shape[0] // labels.shape[0]), dtype=np.int64)
    _count_correct_kernel(attr, opc, thr, left, right, cls, base, X, labels, out)
    return out
