"""Shared fixture builders for the suite."""

import numpy as np
import pytest

from gnnattack.graphdata import GraphDataset, canonical_edges


def make_graph(n=6, d=5, classes=3, edge_prob=0.4, seed=0, features=None):
    """Random undirected graph with round-robin labels and a 50/25/25 split."""
    rng = np.random.default_rng(seed)
    if features is None:
        features = rng.uniform(-1.0, 1.0, size=(n, d))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < edge_prob]
    r = np.arange(n)
    return GraphDataset(
        features=features,
        labels=r % classes,
        edges=canonical_edges(pairs, n) if pairs else np.zeros((0, 2), dtype=np.int64),
        train_mask=r % 4 <= 1,
        val_mask=r % 4 == 2,
        test_mask=r % 4 == 3,
        class_names=tuple(f"c{i}" for i in range(classes)),
    )


def make_separable(n_per_class=5, d=4, gap=2.0, seed=1):
    """Two linearly separable feature clusters, edges only within a class."""
    rng = np.random.default_rng(seed)
    n = 2 * n_per_class
    x = rng.normal(scale=0.3, size=(n, d))
    x[:n_per_class, 0] += gap
    x[n_per_class:, 0] -= gap
    pairs = []
    for base in (0, n_per_class):
        members = range(base, base + n_per_class)
        pairs += [(i, j) for i in members for j in members if i < j and rng.random() < 0.6]
    r = np.arange(n)
    return GraphDataset(
        features=x,
        labels=(r >= n_per_class).astype(np.int64),
        edges=canonical_edges(pairs, n),
        train_mask=r % 2 == 0,
        val_mask=(r % 4 == 1),
        test_mask=(r % 4 == 3),
        class_names=("neg", "pos"),
    )


@pytest.fixture
def small_graph():
    return make_graph()


@pytest.fixture
def separable_graph():
    return make_separable()
