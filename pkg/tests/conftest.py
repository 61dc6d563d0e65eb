"""Shared fixtures: the loan toy example and small reusable datasets.

The loan fixture encodes three applicants with income and credit-score
features: a one-rule tree separating them on credit score, a robust tree
separating them on income, an always-accept tree, and three perturbed
tables (identity, one flipped credit score, and all applicants collapsed
onto one point).
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import coevotree as ct


@pytest.fixture(scope="session")
def loan():
    """Loan-decision toy world; all values in normalized units."""
    raw_features = np.array([
        [20.0, 40.0],   # applicant 1: low income, low credit score
        [80.0, 70.0],   # applicant 2
        [50.0, 60.0],   # applicant 3
    ])
    labels = np.array([0, 1, 1])  # reject, accept, accept
    table = ct.raw_table_from_arrays(raw_features, labels, name="loan",
                                     label_order="first-appearance")
    dataset, scaling = ct.normalize(table, epsilon=1.0)

    def leaf(klass):
        return dict(a=0, o="<", v=0.0, c=klass)

    def tree(nodes):
        attrs, ops, thrs, lefts, rights, parents, classes = [], [], [], [], [], [], []
        for node in nodes:
            attrs.append(node["a"])
            ops.append("<>=".index(node["o"]))
            thrs.append(node["v"])
            lefts.append(node.get("L", -1))
            rights.append(node.get("R", -1))
            parents.append(node.get("P", -1))
            classes.append(node["c"])
        out = ct.TreeGenotype(attrs, ops, thrs, lefts, rights, parents, classes,
                              feature_count=2, class_count=2)
        ct.validate_tree(out)
        return out

    # credit score >= 55 (normalized: CS > 1/3) -> accept
    rule_credit = tree([
        dict(a=1, o=">", v=1.0 / 3.0, c=0, L=1, R=2, P=-1),
        leaf(1) | dict(P=0),
        leaf(0) | dict(P=0),
    ])
    # income >= 35k (normalized: I > 0.25) -> accept; robust to T2/T3
    rule_income = tree([
        dict(a=0, o=">", v=0.25, c=0, L=1, R=2, P=-1),
        leaf(1) | dict(P=0),
        leaf(0) | dict(P=0),
    ])
    # always accept
    always_accept = tree([leaf(1)])

    t1 = ct.identity_perturbation(dataset)
    t2_values = dataset.instances.copy()
    t2_values[0, 1] = 0.6  # applicant 1 credit score drifts to 58
    t2 = ct.PerturbationGenotype(t2_values)
    t3 = ct.PerturbationGenotype(np.tile([0.5, 0.6], (3, 1)))
    for p in (t1, t2, t3):
        p.check_membership(dataset)

    return {
        "dataset": dataset,
        "scaling": scaling,
        "rule_credit": rule_credit,
        "rule_income": rule_income,
        "always_accept": always_accept,
        "tables": (t1, t2, t3),
    }


@pytest.fixture(scope="session")
def separable():
    """Tiny linearly separable dataset (24 instances, 2 features)."""
    rng = np.random.default_rng(5)
    x0 = rng.normal(0.2, 0.08, size=(12, 2))
    x1 = rng.normal(0.8, 0.08, size=(12, 2))
    X = np.clip(np.vstack([x0, x1]), 0.0, 1.0)
    y = np.array([0] * 12 + [1] * 12)
    return X, y


def make_dataset(X, y, epsilon, name="test"):
    table = ct.raw_table_from_arrays(X, y, name=name, label_order="first-appearance")
    dataset, _ = ct.normalize(table, epsilon)
    return dataset
