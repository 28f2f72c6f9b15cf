"""Deterministic clustered-embedding corpora.

Stands in for encoder output when no real corpus is on disk: class centers
on the unit sphere, Gaussian scatter, rows renormalized. High-dimensional
centers are near-orthogonal, so intra-class cosine stays high while
inter-class cosine hovers near zero, and a similarity threshold recovers the
class structure as a graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphdata import GraphDataset, SplitConfig, dataset_from_embeddings

__all__ = ["SyntheticSpec", "clustered_embeddings", "clustered_dataset"]


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 4
    per_class: int = 30
    dim: int = 768
    noise: float = 0.35
    threshold: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2 or self.per_class < 1 or self.dim < 2:
            raise ValueError("need at least 2 classes, 1 node per class, 2 dims")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")


def clustered_embeddings(spec: SyntheticSpec) -> tuple[np.ndarray, list[str]]:
    """Unit-norm embedding rows plus string labels, reproducible from the seed."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    centers = rng.normal(size=(spec.num_classes, spec.dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    rows = []
    labels = []
    for c in range(spec.num_classes):
        pts = centers[c] + spec.noise * rng.normal(size=(spec.per_class, spec.dim))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        rows.append(pts)
        labels.extend([f"class_{c}"] * spec.per_class)
    return np.vstack(rows), labels


def clustered_dataset(spec: SyntheticSpec, split: SplitConfig | None = None) -> GraphDataset:
    x, raw = clustered_embeddings(spec)
    split = split or SplitConfig(train_frac=0.2, val_frac=0.2, seed=spec.seed)
    return dataset_from_embeddings(x, raw, threshold=spec.threshold, split=split, name="synthetic")
