"""Dataset loading, similarity-threshold graph construction, and splits.

Two ingestion paths produce the same product: Planetoid-style citation files
(.content + .cites) and precomputed embedding corpora (binary feature file +
label file). Both end in a GraphDataset: an undirected, unweighted graph over
feature rows with integer labels and disjoint train/val/test masks.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "ParseError",
    "DanglingEdgeWarning",
    "SplitConfig",
    "GraphDataset",
    "canonical_edges",
    "degrees",
    "load_planetoid",
    "load_embedding_corpus",
    "write_feature_file",
    "read_feature_file",
    "write_label_file",
    "read_label_file",
    "encode_labels",
    "decode_labels",
    "cosine_similarity",
    "cosine_matrix",
    "build_graph_from_embeddings",
    "dataset_from_embeddings",
    "normalize_adjacency",
    "top_k_degree",
    "stratified_split",
    "load_split_file",
    "write_split_file",
    "write_edge_list",
    "read_edge_list",
    "l1_normalize_rows",
]

FEATURE_MAGIC = b"GFEAT64\x00"


class ParseError(ValueError):
    """An input file does not follow its documented format."""


class DanglingEdgeWarning(UserWarning):
    """A citation edge referenced a node id missing from the content file."""


@dataclass(frozen=True)
class SplitConfig:
    """How train/val/test masks are assigned.

    When ``split_path`` names a JSON file ({"train": [...], "val": [...],
    "test": [...]} of node indices) it wins outright. Otherwise nodes are
    split per class by the fractions, shuffled by ``seed``. The split seed is
    deliberately separate from the training seed so re-seeding an experiment
    never silently moves nodes between splits.
    """

    train_frac: float = 0.1
    val_frac: float = 0.1
    seed: int = 0
    split_path: str | Path | None = None

    def __post_init__(self):
        if not (0 < self.train_frac < 1 and 0 <= self.val_frac < 1):
            raise ValueError("split fractions must lie in (0, 1)")
        if self.train_frac + self.val_frac >= 1:
            raise ValueError("train + val fractions must leave room for test")


@dataclass(frozen=True)
class GraphDataset:
    """Immutable graph over feature rows.

    ``edges`` is the canonical undirected edge set: shape (E, 2) int64 with
    u < v, unique, no self-loops. Masks are pairwise disjoint boolean vectors
    and the train mask is nonempty.
    """

    features: np.ndarray
    labels: np.ndarray
    edges: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    class_names: tuple[str, ...]
    name: str = "unnamed"
    node_ids: tuple[str, ...] = field(default=(), repr=False)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError("features must be a nonempty n×d matrix")
        n = x.shape[0]
        y = np.asarray(self.labels, dtype=np.int64)
        if y.shape != (n,):
            raise ValueError("labels must be one integer per node")
        c = len(self.class_names)
        if c == 0 or y.min() < 0 or y.max() >= c:
            raise ValueError(f"labels must lie in [0, {c})")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ValueError("edge endpoint out of range")
            if (e[:, 0] >= e[:, 1]).any():
                raise ValueError("edges must be canonical: u < v, no self-loops")
            if len(np.unique(e, axis=0)) != len(e):
                raise ValueError("duplicate edges")
        masks = []
        for m in (self.train_mask, self.val_mask, self.test_mask):
            m = np.asarray(m, dtype=bool)
            if m.shape != (n,):
                raise ValueError("masks must have one flag per node")
            masks.append(m)
        tr, va, te = masks
        if (tr & va).any() or (tr & te).any() or (va & te).any():
            raise ValueError("masks must be pairwise disjoint")
        if not tr.any():
            raise ValueError("train mask is empty")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "train_mask", tr)
        object.__setattr__(self, "val_mask", va)
        object.__setattr__(self, "test_mask", te)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def degrees(self) -> np.ndarray:
        return degrees(self.edges, self.n)

    def with_features(self, features: np.ndarray) -> "GraphDataset":
        """Same graph, new feature matrix (poisoned or perturbed copies)."""
        return replace(self, features=np.asarray(features, dtype=np.float64))


def canonical_edges(pairs, n: int) -> np.ndarray:
    """Deduplicated (E, 2) int64 edge array with u < v, sorted, no self-loops."""
    arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError("edge endpoint out of range")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keep = lo != hi
    stacked = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    return stacked.astype(np.int64)


def degrees(edges: np.ndarray, n: int) -> np.ndarray:
    d = np.zeros(n, dtype=np.int64)
    if len(edges):
        np.add.at(d, edges[:, 0], 1)
        np.add.at(d, edges[:, 1], 1)
    return d


def l1_normalize_rows(x: np.ndarray) -> np.ndarray:
    """Rows scaled to unit L1 mass; all-zero rows pass through unchanged."""
    x = np.asarray(x, dtype=np.float64)
    s = np.abs(x).sum(axis=1, keepdims=True)
    return x / np.where(s == 0, 1.0, s)


# ------------------------------------------------------------------ planetoid


def load_planetoid(
    content_path: str | Path,
    cites_path: str | Path,
    split: SplitConfig | None = None,
    normalize_features: bool = True,
    name: str | None = None,
) -> GraphDataset:
    """Read citation-network files into a GraphDataset.

    Content file: one node per line, ``<id> <feature values...> <label>``.
    Cites file: ``<id-cited> <id-citing>`` per line. Citation direction is
    discarded; the graph is undirected. Edges naming unknown ids are dropped
    with a DanglingEdgeWarning, duplicate node ids are a hard ParseError.
    """
    content_path = Path(content_path)
    cites_path = Path(cites_path)
    ids: list[str] = []
    index: dict[str, int] = {}
    rows: list[np.ndarray] = []
    raw_labels: list[str] = []
    width = None
    for lineno, line in enumerate(content_path.read_text().splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 3:
            raise ParseError(f"{content_path}:{lineno}: need id, features, label")
        node_id, *values, label = parts
        if node_id in index:
            raise ParseError(f"{content_path}:{lineno}: duplicate node id {node_id!r}")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(
                f"{content_path}:{lineno}: expected {width} feature values, got {len(values)}"
            )
        try:
            rows.append(np.array(values, dtype=np.float64))
        except ValueError as exc:
            raise ParseError(f"{content_path}:{lineno}: non-numeric feature value") from exc
        index[node_id] = len(ids)
        ids.append(node_id)
        raw_labels.append(label)
    if not ids:
        raise ParseError(f"{content_path}: no nodes")

    pairs: list[tuple[int, int]] = []
    dropped = 0
    for lineno, line in enumerate(cites_path.read_text().splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise ParseError(f"{cites_path}:{lineno}: expected two node ids")
        a, b = parts
        if a not in index or b not in index:
            dropped += 1
            continue
        pairs.append((index[a], index[b]))
    if dropped:
        warnings.warn(
            f"{cites_path}: dropped {dropped} edge(s) naming unknown node ids",
            DanglingEdgeWarning,
            stacklevel=2,
        )

    features = np.stack(rows)
    if normalize_features:
        features = l1_normalize_rows(features)
    labels, class_names = encode_labels(raw_labels)
    edges = canonical_edges(pairs, len(ids))
    split = split or SplitConfig()
    tr, va, te = _resolve_split(labels, split)
    return GraphDataset(
        features=features,
        labels=labels,
        edges=edges,
        train_mask=tr,
        val_mask=va,
        test_mask=te,
        class_names=class_names,
        name=name or content_path.stem,
        node_ids=tuple(ids),
    )


def _resolve_split(labels: np.ndarray, split: SplitConfig):
    if split.split_path is not None:
        return load_split_file(split.split_path, len(labels))
    return stratified_split(labels, split.train_frac, split.val_frac, split.seed)


def stratified_split(labels: np.ndarray, train_frac: float, val_frac: float, seed: int):
    """Per-class shuffle into train/val/test masks.

    Each class contributes floor(frac * count), but at least one train node,
    so even rare classes are represented during fitting. The remainder goes
    to test.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        rng.shuffle(members)
        n_tr = max(1, int(train_frac * members.size))
        n_va = int(val_frac * members.size)
        train[members[:n_tr]] = True
        val[members[n_tr : n_tr + n_va]] = True
        test[members[n_tr + n_va :]] = True
    return train, val, test


def load_split_file(path: str | Path, n: int):
    payload = json.loads(Path(path).read_text())
    masks = []
    for key in ("train", "val", "test"):
        if key not in payload:
            raise ParseError(f"{path}: missing {key!r} index list")
        idx = np.asarray(payload[key], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ParseError(f"{path}: {key} index out of range for n={n}")
        m = np.zeros(n, dtype=bool)
        m[idx] = True
        masks.append(m)
    return tuple(masks)


def write_split_file(path: str | Path, train, val, test) -> None:
    payload = {
        "train": np.flatnonzero(train).tolist(),
        "val": np.flatnonzero(val).tolist(),
        "test": np.flatnonzero(test).tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=0) + "\n")


# ------------------------------------------------------- embedding corpora


def write_feature_file(path: str | Path, matrix: np.ndarray) -> None:
    """Binary layout: 8 magic bytes, u64 n, u64 d, n*d float64, all little-endian."""
    x = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64))
    if x.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(np.array(x.shape, dtype="<u8").tobytes())
        fh.write(x.astype("<f8", copy=False).tobytes())


def read_feature_file(path: str | Path) -> np.ndarray:
    """Read the binary layout; files without the magic are parsed as CSV."""
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(FEATURE_MAGIC):
        try:
            x = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise ParseError(f"{path}: neither feature-file magic nor parseable CSV") from exc
        return x
    header = np.frombuffer(raw, dtype="<u8", count=2, offset=len(FEATURE_MAGIC))
    n, d = (int(v) for v in header)
    payload = raw[len(FEATURE_MAGIC) + 16 :]
    if len(payload) != n * d * 8:
        raise ParseError(f"{path}: header says {n}×{d} but payload has {len(payload)} bytes")
    return np.frombuffer(payload, dtype="<f8").reshape(n, d).astype(np.float64)


def write_label_file(path: str | Path, labels) -> None:
    Path(path).write_text("".join(f"{lab}\n" for lab in labels))


def read_label_file(path: str | Path) -> list[str]:
    text = Path(path).read_text()
    lines = text.splitlines()
    return [ln.strip() for ln in lines]


def load_embedding_corpus(feature_path: str | Path, label_path: str | Path):
    """Feature matrix plus raw label strings, cross-checked for length."""
    x = read_feature_file(feature_path)
    if x.shape[0] == 0:
        raise ValueError(f"{feature_path}: empty dataset (n=0)")
    labels = read_label_file(label_path)
    if len(labels) != x.shape[0]:
        raise ValueError(
            f"feature file has {x.shape[0]} rows but label file has {len(labels)} lines"
        )
    return x, labels


def encode_labels(strings) -> tuple[np.ndarray, tuple[str, ...]]:
    """Map label strings to 0..C-1 ids, classes sorted lexicographically."""
    strings = list(strings)
    if not strings:
        raise ValueError("encode_labels needs at least one label")
    table = tuple(sorted(set(strings)))
    lookup = {name: i for i, name in enumerate(table)}
    return np.array([lookup[s] for s in strings], dtype=np.int64), table


def decode_labels(ids, class_names) -> list[str]:
    return [class_names[i] for i in np.asarray(ids, dtype=np.int64)]


# --------------------------------------------------------- graph construction


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValueError(f"cosine_similarity: length mismatch {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu < 1e-12 or nv < 1e-12:
        return 0.0
    return float(u @ v / (nu * nv))


def cosine_matrix(x: np.ndarray) -> np.ndarray:
    """All-pairs cosine similarities; zero rows are similar to nothing."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    unit = np.where(norms < 1e-12, 0.0, x / np.where(norms < 1e-12, 1.0, norms))
    return unit @ unit.T


def build_graph_from_embeddings(matrix: np.ndarray, threshold: float = 0.85) -> np.ndarray:
    """Undirected edges (i, j), i < j, where cosine similarity exceeds threshold.

    Strictly greater-than, so threshold 1.01 yields no edges even between
    identical rows, and duplicate zero rows never connect (their similarity
    is defined as 0).
    """
    x = np.asarray(matrix, dtype=np.float64)
    sim = cosine_matrix(x)
    iu, ju = np.triu_indices(x.shape[0], k=1)
    keep = sim[iu, ju] > threshold
    return np.stack([iu[keep], ju[keep]], axis=1).astype(np.int64)


def dataset_from_embeddings(
    matrix: np.ndarray,
    raw_labels,
    threshold: float = 0.85,
    split: SplitConfig | None = None,
    name: str = "embedded",
    edges: np.ndarray | None = None,
) -> GraphDataset:
    """Assemble a dataset from a feature matrix and raw labels.

    Edges come from cosine thresholding unless a precomputed edge list is
    passed, in which case the threshold is not consulted at all.
    """
    labels, class_names = encode_labels(raw_labels)
    if edges is None:
        edges = build_graph_from_embeddings(matrix, threshold)
    else:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    split = split or SplitConfig()
    tr, va, te = _resolve_split(labels, split)
    return GraphDataset(
        features=np.asarray(matrix, dtype=np.float64),
        labels=labels,
        edges=edges,
        train_mask=tr,
        val_mask=va,
        test_mask=te,
        class_names=class_names,
        name=name,
    )


def normalize_adjacency(dataset: GraphDataset) -> np.ndarray:
    """Dense symmetric propagation matrix D^-1/2 (A + I) D^-1/2.

    The self-loop keeps every degree at least 1, so the division is always
    defined and an isolated node's row is exactly [.. 0, 1, 0 ..].
    """
    n = dataset.n
    a = np.zeros((n, n))
    e = dataset.edges
    if len(e):
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
    a[np.diag_indices(n)] += 1.0
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def top_k_degree(dataset: GraphDataset, k: int) -> np.ndarray:
    """The k highest-degree node ids, ordered by (degree desc, id asc)."""
    if not 1 <= k <= dataset.n:
        raise ValueError(f"k must lie in [1, {dataset.n}], got {k}")
    deg = dataset.degrees()
    order = np.lexsort((np.arange(dataset.n), -deg))
    return order[:k].astype(np.int64)


# ------------------------------------------------------------------ edge lists


def write_edge_list(path: str | Path, edges: np.ndarray) -> None:
    Path(path).write_text("".join(f"{u} {v}\n" for u, v in np.asarray(edges)))


def read_edge_list(path: str | Path, n: int) -> np.ndarray:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'u v'")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: non-integer node id") from exc
    return canonical_edges(pairs, n)
