"""Shared model builders and reference values for the test suite."""

from __future__ import annotations

import numpy as np

import predgap as pg

# Standard normal CDF at 1, to double precision.
PHI_1 = 0.8413447460685429
# PG2 of the canonical depth-1 tree (split at 0, leaves 0/1) at x0 = -1,
# S = {0}, gaussian sigma = 1: the leaf flips with probability 1 - PHI_1.
CANONICAL_PG2 = 1.0 - PHI_1


def depth1_tree(threshold=0.0, left=0.0, right=1.0) -> pg.Tree:
    return pg.Tree(
        pg.TreeNode.split(0, threshold, pg.TreeNode.leaf(left), pg.TreeNode.leaf(right))
    )


def canonical_ensemble(num_features=1) -> pg.TreeEnsemble:
    """The depth-1 tree used by the hand-derived examples."""
    return pg.TreeEnsemble(trees=(depth1_tree(),), num_features=num_features)


def perfect_tree(rng, num_features, depth) -> pg.Tree:
    def build(level):
        if level == depth:
            return pg.TreeNode.leaf(rng.normal())
        return pg.TreeNode.split(
            int(rng.integers(num_features)),
            float(rng.normal(0.0, 0.8)),
            build(level + 1),
            build(level + 1),
        )

    return pg.Tree(build(0))


def random_tree(rng, num_features, max_depth, lattice_p=0.6) -> pg.Tree:
    """A random-shaped tree; thresholds sometimes land on a small integer
    lattice so that exact threshold ties get exercised."""

    def build(depth):
        if depth >= max_depth or (depth > 0 and rng.random() < 0.3):
            return pg.TreeNode.leaf(rng.normal())
        if rng.random() < lattice_p:
            t = float(rng.integers(-2, 3))
        else:
            t = float(rng.normal())
        return pg.TreeNode.split(int(rng.integers(num_features)), t, build(depth + 1), build(depth + 1))

    return pg.Tree(build(0))


def random_ensemble(rng, num_features, num_trees, max_depth, lattice_p=0.6) -> pg.TreeEnsemble:
    return pg.TreeEnsemble(
        trees=tuple(random_tree(rng, num_features, max_depth, lattice_p) for _ in range(num_trees)),
        num_features=num_features,
    )


def random_discrete(rng, max_points=4) -> pg.Discrete:
    k = int(rng.integers(1, max_points + 1))
    offsets = sorted(
        set(
            float(rng.integers(-2, 3)) if rng.random() < 0.5 else float(np.round(rng.normal(), 2))
            for _ in range(k)
        )
    )
    probs = rng.random(len(offsets)) + 0.1
    probs = np.round(probs / probs.sum(), 6)
    probs[-1] = 1.0 - probs[:-1].sum()
    return pg.Discrete(points=tuple((o, float(p)) for o, p in zip(offsets, probs)))


def lattice_point(rng, num_features) -> np.ndarray:
    """A query point that hits thresholds exactly about half the time."""
    return np.where(
        rng.random(num_features) < 0.5,
        rng.integers(-2, 3, num_features).astype(float),
        rng.normal(size=num_features),
    )


def fixture_ensemble():
    """The benchmark fixture: 10 perfect depth-4 trees over 8 features,
    plus the query pairs (one per subset size) used against sigma = 0.3."""
    rng = np.random.default_rng(20240801)
    d = 8
    ensemble = pg.TreeEnsemble(
        trees=tuple(perfect_tree(rng, d, 4) for _ in range(10)), num_features=d
    )
    X = rng.normal(size=(8, d))
    pairs = [
        (X[i], tuple(sorted(int(q) for q in rng.choice(d, size=i + 1, replace=False))))
        for i in range(8)
    ]
    return ensemble, pairs
