"""GCN and GAT node classifiers, trainer, evaluator, checkpoints.

Both models are three propagation layers deep with widths (d, 256, 32, C) by
default. GCN propagates through a fixed normalized adjacency; GAT weighs
neighbors by learned attention computed edge-wise over the edge list with
self-loops added. The final layer emits raw logits.

Both forward functions accept the feature matrix as a plain array or as a
live Tensor, so the attacks can differentiate the same code path with
respect to the inputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .graphdata import GraphDataset, normalize_adjacency
from .tensor import Tensor

__all__ = [
    "TrainingError",
    "TrainConfig",
    "GcnParams",
    "GatParams",
    "EvalReport",
    "GcnStructure",
    "GatStructure",
    "prepare_structure",
    "init_params",
    "gcn_forward",
    "gat_attention",
    "gat_forward",
    "forward_logits",
    "Adam",
    "train",
    "evaluate",
    "evaluate_split",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"GNNCKPT1"
ATTENTION_SLOPE = 0.2


class TrainingError(RuntimeError):
    """Training diverged; ``epoch`` records where the loss went non-finite."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    seed: int = 0
    patience: int = 30
    hidden_dims: tuple[int, ...] = (256, 32)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden dims must be positive")


def _check_chain(weights, biases):
    if len(weights) != len(biases):
        raise ValueError("one bias row per weight matrix")
    for i, (w, b) in enumerate(zip(weights, biases)):
        if w.ndim != 2 or b.shape != (1, w.shape[1]):
            raise ValueError(f"layer {i}: bias shape {b.shape} does not match {w.shape}")
        if i and weights[i - 1].shape[1] != w.shape[0]:
            raise ValueError(f"layer {i}: input dim {w.shape[0]} breaks the chain")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError(f"layer {i}: non-finite parameter")


@dataclass(frozen=True)
class GcnParams:
    """Per-layer weight matrices and bias rows, input to output."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        _check_chain(self.weights, self.biases)

    @property
    def kind(self) -> str:
        return "gcn"

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


@dataclass(frozen=True)
class GatParams:
    """GCN-shaped transform stack plus one attention vector per layer.

    ``attention[l]`` has shape (2 * out_dim, 1): it scores the concatenation
    [W h_i ‖ W h_j] for each edge.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    attention: tuple[np.ndarray, ...]

    def __post_init__(self):
        _check_chain(self.weights, self.biases)
        if len(self.attention) != len(self.weights):
            raise ValueError("one attention vector per layer")
        for i, (w, a) in enumerate(zip(self.weights, self.attention)):
            if a.shape != (2 * w.shape[1], 1):
                raise ValueError(
                    f"layer {i}: attention vector {a.shape} != ({2 * w.shape[1]}, 1)"
                )
            if not np.isfinite(a).all():
                raise ValueError(f"layer {i}: non-finite attention vector")

    @property
    def kind(self) -> str:
        return "gat"

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b, a in zip(self.weights, self.biases, self.attention):
            out.extend([w, b, a])
        return out


@dataclass(frozen=True)
class EvalReport:
    loss: float
    accuracy: float
    split: str
    n: int


# ------------------------------------------------------------- initialization


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(kind: str, num_features: int, num_classes: int,
                hidden_dims: tuple[int, ...] = (256, 32),
                rng: np.random.Generator | None = None):
    """Glorot-uniform weights, zero biases; draw order is fixed per layer."""
    if rng is None:
        rng = T.spawn_streams(0, 2)[0]
    dims = (num_features, *hidden_dims, num_classes)
    weights, biases, attn = [], [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        weights.append(_glorot(rng, d_in, d_out))
        biases.append(np.zeros((1, d_out)))
        if kind == "gat":
            attn.append(_glorot(rng, 2 * d_out, 1))
    if kind == "gcn":
        return GcnParams(weights=tuple(weights), biases=tuple(biases))
    if kind == "gat":
        return GatParams(weights=tuple(weights), biases=tuple(biases), attention=tuple(attn))
    raise ValueError(f"unknown model kind {kind!r}")


# ------------------------------------------------------------------ structure


@dataclass(frozen=True)
class GcnStructure:
    """Dense normalized propagation matrix, built once per dataset."""

    a_norm: np.ndarray


@dataclass(frozen=True)
class GatStructure:
    """Directed edge arrays with self-loops for attention.

    ``receivers[e]`` aggregates ``neighbors[e]``; every undirected edge
    appears in both directions and every node receives from itself.
    """

    receivers: np.ndarray
    neighbors: np.ndarray
    n: int


def prepare_structure(kind: str, dataset: GraphDataset):
    if kind == "gcn":
        return GcnStructure(a_norm=normalize_adjacency(dataset))
    if kind == "gat":
        e = dataset.edges
        loops = np.arange(dataset.n, dtype=np.int64)
        receivers = np.concatenate([e[:, 0], e[:, 1], loops])
        neighbors = np.concatenate([e[:, 1], e[:, 0], loops])
        return GatStructure(receivers=receivers, neighbors=neighbors, n=dataset.n)
    raise ValueError(f"unknown model kind {kind!r}")


def _as_tensor(v) -> Tensor:
    return v if isinstance(v, Tensor) else Tensor.const(v)


# ------------------------------------------------------------------- forwards


def _gcn_logits(weights, biases, prop, x, training, rate, rng):
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        h = T.add(T.matmul(prop, T.matmul(h, w)), b)
        if i < last:
            h = T.relu(h)
            h = T.dropout(h, rate, training, rng)
    return h


def gcn_forward(params: GcnParams, a_norm, x, *, training: bool = False,
                dropout: float = 0.0, rng: np.random.Generator | None = None) -> Tensor:
    """Logits for every node. ``x`` may be a Tensor to get input gradients."""
    weights = [_as_tensor(w) for w in params.weights]
    biases = [_as_tensor(b) for b in params.biases]
    return _gcn_logits(weights, biases, _as_tensor(a_norm), _as_tensor(x),
                       training, dropout, rng)


def gat_attention(w, a, x, structure: GatStructure) -> Tensor:
    """Edge attention column: softmax over each receiver's neighbor set.

    Scores are LeakyReLU(aᵀ [W h_i ‖ W h_j]) for receiver i, neighbor j,
    normalized within the receiver's segment. Self-loops guarantee every
    segment is nonempty, so each row of the implied coefficient matrix sums
    to exactly one.
    """
    h = T.matmul(_as_tensor(x), _as_tensor(w))
    hi = T.gather_rows(h, structure.receivers)
    hj = T.gather_rows(h, structure.neighbors)
    scores = T.leaky_relu(T.matmul(T.concat_cols(hi, hj), _as_tensor(a)), ATTENTION_SLOPE)
    return T.segment_softmax(scores, structure.receivers, structure.n)


def _gat_logits(weights, biases, attns, structure, x, training, rate, rng):
    h = x
    last = len(weights) - 1
    for i, (w, b, a) in enumerate(zip(weights, biases, attns)):
        hw = T.matmul(h, w)
        hi = T.gather_rows(hw, structure.receivers)
        hj = T.gather_rows(hw, structure.neighbors)
        scores = T.leaky_relu(T.matmul(T.concat_cols(hi, hj), a), ATTENTION_SLOPE)
        alpha = T.segment_softmax(scores, structure.receivers, structure.n)
        agg = T.segment_sum(T.mul(hj, alpha), structure.receivers, structure.n)
        h = T.add(agg, b)
        if i < last:
            h = T.leaky_relu(h, ATTENTION_SLOPE)
            h = T.dropout(h, rate, training, rng)
    return h


def gat_forward(params: GatParams, structure: GatStructure, x, *, training: bool = False,
                dropout: float = 0.0, rng: np.random.Generator | None = None) -> Tensor:
    weights = [_as_tensor(w) for w in params.weights]
    biases = [_as_tensor(b) for b in params.biases]
    attns = [_as_tensor(a) for a in params.attention]
    return _gat_logits(weights, biases, attns, structure, _as_tensor(x),
                       training, dropout, rng)


def forward_logits(params, structure, x, *, training: bool = False,
                   dropout: float = 0.0, rng: np.random.Generator | None = None) -> Tensor:
    """Dispatch on parameter type; the attacks treat both models uniformly."""
    if isinstance(params, GcnParams):
        if not isinstance(structure, GcnStructure):
            raise TypeError("GCN parameters need a GcnStructure")
        return gcn_forward(params, structure.a_norm, x,
                           training=training, dropout=dropout, rng=rng)
    if isinstance(params, GatParams):
        if not isinstance(structure, GatStructure):
            raise TypeError("GAT parameters need a GatStructure")
        return gat_forward(params, structure, x,
                           training=training, dropout=dropout, rng=rng)
    raise TypeError(f"unknown parameter type {type(params).__name__}")


# -------------------------------------------------------------------- trainer


class Adam:
    """Adaptive-moment optimizer with coupled L2 weight decay.

    Decay enters through the gradient (g + wd*θ), matching the classic
    regularized-loss formulation rather than the decoupled variant.
    """

    def __init__(self, tensors: list[Tensor], lr: float, weight_decay: float = 0.0,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.tensors = tensors
        self.lr = lr
        self.wd = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in tensors]
        self.v = [np.zeros_like(p.data) for p in tensors]

    def step(self, grads: dict[Tensor, np.ndarray]) -> None:
        self.t += 1
        for i, p in enumerate(self.tensors):
            g = grads[p] + self.wd * p.data
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1**self.t)
            v_hat = self.v[i] / (1 - self.beta2**self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _rebuild(kind: str, tensors: list[Tensor]):
    arrays = [t.data.copy() for t in tensors]
    if kind == "gcn":
        return GcnParams(weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))
    return GatParams(weights=tuple(arrays[0::3]), biases=tuple(arrays[1::3]),
                     attention=tuple(arrays[2::3]))


def train(kind: str, dataset: GraphDataset, config: TrainConfig | None = None,
          structure=None):
    """Fit a fresh model; returns (best-validation params, per-epoch history).

    Two PRNG streams split off the seed keep init independent of dropout.
    Early stopping watches validation loss with the configured patience and
    the returned parameters are the best-validation snapshot, not the last
    epoch. With no validation nodes the train loss stands in. History rows
    are dicts: epoch, train_loss, train_acc, val_loss, val_acc.
    """
    config = config or TrainConfig()
    init_rng, dropout_rng = T.spawn_streams(config.seed, 2)
    params = init_params(kind, dataset.num_features, dataset.num_classes,
                         config.hidden_dims, rng=init_rng)
    if structure is None:
        structure = prepare_structure(kind, dataset)
    tensors = [Tensor.param(a) for a in params.arrays()]
    live = _live_forward(kind, tensors, structure)
    opt = Adam(tensors, config.learning_rate, config.weight_decay)

    x = Tensor.const(dataset.features)
    labels, train_mask = dataset.labels, dataset.train_mask
    select_mask = dataset.val_mask if dataset.val_mask.any() else train_mask

    best_loss = np.inf
    best = _rebuild(kind, tensors)
    best_epoch = 0
    history: list[dict] = []
    since_improved = 0
    for epoch in range(1, config.epochs + 1):
        # Overflow is caught via the explicit finiteness check, so numpy's
        # RuntimeWarnings would only be noise here.
        with np.errstate(all="ignore"):
            logits = live(x, training=True, rate=config.dropout, rng=dropout_rng)
            loss = T.cross_entropy(logits, labels, train_mask)
            step_loss = loss.item()
            if not np.isfinite(step_loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}",
                                    epoch)
            opt.step(T.backward(loss))
            eval_logits = live(x, training=False, rate=0.0, rng=None).data
        row = {"epoch": epoch, "train_loss": step_loss,
               "train_acc": _mask_accuracy(eval_logits, labels, train_mask)}
        row["val_loss"] = _mask_loss(eval_logits, labels, select_mask)
        row["val_acc"] = _mask_accuracy(eval_logits, labels, select_mask)
        history.append(row)

        if row["val_loss"] < best_loss:
            best_loss = row["val_loss"]
            best = _rebuild(kind, tensors)
            best_epoch = epoch
            since_improved = 0
        else:
            since_improved += 1
            if since_improved >= config.patience:
                break
    history_meta = {"best_epoch": best_epoch, "epochs_run": len(history)}
    return best, {"rows": history, **history_meta}


def _live_forward(kind, tensors, structure):
    if kind == "gcn":
        weights, biases = tensors[0::2], tensors[1::2]
        prop = Tensor.const(structure.a_norm)

        def run(x, training, rate, rng):
            return _gcn_logits(weights, biases, prop, x, training, rate, rng)

    elif kind == "gat":
        weights, biases, attns = tensors[0::3], tensors[1::3], tensors[2::3]

        def run(x, training, rate, rng):
            return _gat_logits(weights, biases, attns, structure, x, training, rate, rng)

    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return run


def _mask_loss(logits: np.ndarray, labels, mask) -> float:
    return T.cross_entropy(Tensor.const(logits), labels, mask).item()


def _mask_accuracy(logits: np.ndarray, labels, mask) -> float:
    pred = logits[mask].argmax(axis=1)
    return float((pred == labels[mask]).mean())


def evaluate(params, dataset: GraphDataset, mask, split: str = "custom",
             structure=None) -> EvalReport:
    """Inference-mode loss and argmax accuracy over the masked nodes."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("evaluate over an empty mask")
    if structure is None:
        structure = prepare_structure(params.kind, dataset)
    logits = forward_logits(params, structure, dataset.features).data
    return EvalReport(
        loss=_mask_loss(logits, dataset.labels, mask),
        accuracy=_mask_accuracy(logits, dataset.labels, mask),
        split=split,
        n=int(mask.sum()),
    )


def evaluate_split(params, dataset: GraphDataset, split: str,
                   structure=None) -> EvalReport:
    mask = {"train": dataset.train_mask, "val": dataset.val_mask,
            "test": dataset.test_mask}[split]
    return evaluate(params, dataset, mask, split=split, structure=structure)


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(path: str | Path, params) -> None:
    """Binary layout: magic, kind tag, array count, then (rows, cols, payload)
    per array in the canonical parameter order. Little-endian throughout."""
    arrays = params.arrays()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<4s", params.kind.encode().ljust(4, b"\x00")))
        fh.write(struct.pack("<Q", len(arrays)))
        for a in arrays:
            fh.write(struct.pack("<QQ", *a.shape))
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path):
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    off = len(CHECKPOINT_MAGIC)
    kind = raw[off : off + 4].rstrip(b"\x00").decode()
    off += 4
    (count,) = struct.unpack_from("<Q", raw, off)
    off += 8
    arrays = []
    for _ in range(count):
        rows, cols = struct.unpack_from("<QQ", raw, off)
        off += 16
        size = rows * cols * 8
        arrays.append(np.frombuffer(raw[off : off + size], dtype="<f8")
                      .reshape(rows, cols).astype(np.float64))
        off += size
    if off != len(raw):
        raise ValueError(f"{path}: trailing bytes after weight payload")
    if kind == "gcn":
        if count % 2:
            raise ValueError(f"{path}: gcn checkpoints hold weight/bias pairs")
        return GcnParams(weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))
    if kind == "gat":
        if count % 3:
            raise ValueError(f"{path}: gat checkpoints hold weight/bias/attention triples")
        return GatParams(weights=tuple(arrays[0::3]), biases=tuple(arrays[1::3]),
                         attention=tuple(arrays[2::3]))
    raise ValueError(f"{path}: unknown model kind {kind!r}")
