"""Dense 2-D reverse-mode autodiff engine.

Everything is a (rows, cols) float64 matrix. The op set is exactly what the
graph models and the feature-space attacks need: matmul, add, elementwise
product, scale, concat, relu/leaky_relu, softmax variants, log-sum-exp,
L2 row normalization, cross-entropy, dropout, plus gather/segment ops for
edge-wise attention. Gradients are exact and deterministic; attacks rely on
gradients with respect to *inputs* as much as parameters, so every op
propagates to all differentiable operands.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeMismatch",
    "EmptySegmentError",
    "add",
    "mul",
    "scale",
    "matmul",
    "transpose",
    "concat_cols",
    "relu",
    "leaky_relu",
    "row_softmax",
    "segment_softmax",
    "gather_rows",
    "segment_sum",
    "sum_all",
    "l2_normalize_rows",
    "log_sum_exp_rows",
    "cross_entropy",
    "dropout",
    "backward",
    "spawn_streams",
]


class ShapeMismatch(ValueError):
    """Operand shapes are incompatible for the requested op."""


class EmptySegmentError(ValueError):
    """A segment softmax was asked to normalize over an empty neighbor set."""


def spawn_streams(seed: int, n: int) -> tuple[np.random.Generator, ...]:
    """n independent PCG64 streams split off one 64-bit seed.

    Stream 0 is conventionally used for parameter init and stream 1 for
    dropout, so changing the number of dropout draws never perturbs init.
    """
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n))


class Tensor:
    """A (rows, cols) float64 matrix node in the computation graph."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _op: str = "leaf"):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D matrices, got ndim={arr.ndim}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = None
        self._op = _op

    @classmethod
    def const(cls, data) -> "Tensor":
        return cls(data, requires_grad=False)

    @classmethod
    def param(cls, data) -> "Tensor":
        return cls(np.array(data, dtype=np.float64), requires_grad=True)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, scale(other, -1.0))

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def backward(self) -> dict["Tensor", np.ndarray]:
        return backward(self)


def _node(data, parents, op) -> Tensor:
    out = Tensor(
        data,
        requires_grad=any(p.requires_grad for p in parents),
        _parents=tuple(parents),
        _op=op,
    )
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may also be a (1, cols) row, broadcast over rows."""
    if a.shape == b.shape:
        out = _node(a.data + b.data, (a, b), "add")

        def bwd(g):
            return g, g

    elif b.shape == (1, a.shape[1]):
        out = _node(a.data + b.data, (a, b), "add_row")

        def bwd(g):
            return g, g.sum(axis=0, keepdims=True)

    else:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    out._backward = bwd
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; b may also be a (rows, 1) column, broadcast over cols."""
    if a.shape == b.shape:
        out = _node(a.data * b.data, (a, b), "mul")

        def bwd(g):
            return g * b.data, g * a.data

    elif b.shape == (a.shape[0], 1):
        out = _node(a.data * b.data, (a, b), "mul_col")

        def bwd(g):
            return g * b.data, (g * a.data).sum(axis=1, keepdims=True)

    else:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}")
    out._backward = bwd
    return out


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = _node(a.data * s, (a,), "scale")
    out._backward = lambda g: (g * s,)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    out = _node(a.data @ b.data, (a, b), "matmul")

    def bwd(g):
        # Skipping the constant side matters: the n×n propagation matrix is
        # a constant operand and its gradient would cost O(n²·d).
        return (
            g @ b.data.T if a.requires_grad else None,
            a.data.T @ g if b.requires_grad else None,
        )

    out._backward = bwd
    return out


def transpose(a: Tensor) -> Tensor:
    out = _node(a.data.T.copy(), (a,), "transpose")
    out._backward = lambda g: (g.T,)
    return out


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise concatenation [a ‖ b] of two matrices with equal row count."""
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"concat_cols: {a.shape} vs {b.shape}")
    out = _node(np.concatenate([a.data, b.data], axis=1), (a, b), "concat_cols")
    na = a.shape[1]
    out._backward = lambda g: (g[:, :na], g[:, na:])
    return out


def relu(a: Tensor) -> Tensor:
    """max(x, 0); subgradient at 0 is 0."""
    mask = a.data > 0
    out = _node(np.where(mask, a.data, 0.0), (a,), "relu")
    out._backward = lambda g: (g * mask,)
    return out


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    """x for x>0 else slope*x; subgradient at 0 is slope."""
    factor = np.where(a.data > 0, 1.0, float(slope))
    out = _node(a.data * factor, (a,), "leaky_relu")
    out._backward = lambda g: (g * factor,)
    return out


def row_softmax(a: Tensor) -> Tensor:
    """Softmax over each row, max-shifted for stability."""
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _node(y, (a,), "row_softmax")

    def bwd(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    out._backward = bwd
    return out


def segment_softmax(scores: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Softmax of an (E, 1) score column within each segment.

    ``segments[e]`` names the group of entry e (for attention: the
    destination node whose neighbor set is being normalized). Every segment
    in [0, num_segments) must be nonempty.
    """
    if scores.shape[1] != 1:
        raise ShapeMismatch(f"segment_softmax expects an (E, 1) column, got {scores.shape}")
    seg = np.asarray(segments, dtype=np.int64)
    if seg.shape != (scores.shape[0],):
        raise ShapeMismatch("segments must be one id per score row")
    m = np.full(num_segments, -np.inf)
    np.maximum.at(m, seg, scores.data[:, 0])
    if np.isneginf(m).any():
        raise EmptySegmentError("segment softmax over an empty segment")
    e = np.exp(scores.data[:, 0] - m[seg])
    denom = np.bincount(seg, weights=e, minlength=num_segments)
    y = (e / denom[seg]).reshape(-1, 1)
    out = _node(y, (scores,), "segment_softmax")

    def bwd(g):
        # Within each segment the softmax Jacobian gives y*(g - sum(g*y)).
        gy = (g * y)[:, 0]
        seg_dot = np.bincount(seg, weights=gy, minlength=num_segments)
        return (y * (g - seg_dot[seg].reshape(-1, 1)),)

    out._backward = bwd
    return out


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    """Select rows a[index]; duplicate indices accumulate in the backward pass."""
    idx = np.asarray(index, dtype=np.int64)
    out = _node(a.data[idx], (a,), "gather_rows")

    def bwd(g):
        da = np.zeros_like(a.data)
        np.add.at(da, idx, g)
        return (da,)

    out._backward = bwd
    return out


def segment_sum(a: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of a into ``num_segments`` output rows keyed by segment id."""
    seg = np.asarray(segments, dtype=np.int64)
    if seg.shape != (a.shape[0],):
        raise ShapeMismatch("segments must be one id per row")
    result = np.zeros((num_segments, a.shape[1]))
    np.add.at(result, seg, a.data)
    out = _node(result, (a,), "segment_sum")
    out._backward = lambda g: (g[seg],)
    return out


def sum_all(a: Tensor) -> Tensor:
    out = _node(np.array([[a.data.sum()]]), (a,), "sum_all")
    out._backward = lambda g: (np.full_like(a.data, g[0, 0]),)
    return out


def l2_normalize_rows(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row to unit L2 norm; rows with norm < eps map to zero.

    The zero-row guard makes downstream cosine similarities well defined
    (a zero embedding is "similar to nothing").
    """
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    live = norms >= eps
    safe = np.where(live, norms, 1.0)
    y = np.where(live, a.data / safe, 0.0)
    out = _node(y, (a,), "l2_normalize_rows")

    def bwd(g):
        # d(x/|x|) = (g - y (g.y)) / |x| on live rows, 0 on dead rows.
        gy = (g * y).sum(axis=1, keepdims=True)
        return (np.where(live, (g - y * gy) / safe, 0.0),)

    out._backward = bwd
    return out


def log_sum_exp_rows(a: Tensor) -> Tensor:
    """Per-row log(sum(exp(x))), max-shifted, returned as an (n, 1) column."""
    m = a.data.max(axis=1, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=1, keepdims=True)
    out = _node(m + np.log(s), (a,), "log_sum_exp_rows")
    soft = e / s
    out._backward = lambda g: (soft * g,)
    return out


def cross_entropy(logits: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean negative log-softmax probability of the true label over masked rows."""
    y = np.asarray(labels, dtype=np.int64)
    m = np.asarray(mask, dtype=bool)
    n, c = logits.shape
    if y.shape != (n,) or m.shape != (n,):
        raise ShapeMismatch("labels and mask must have one entry per logits row")
    if not m.any():
        raise ValueError("cross_entropy over an empty mask")
    if y.min() < 0 or y.max() >= c:
        raise ValueError(f"labels must lie in [0, {c})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.flatnonzero(m)
    loss = -logp[rows, y[rows]].mean()
    out = _node(np.array([[loss]]), (logits,), "cross_entropy")

    def bwd(g):
        d = np.zeros_like(logits.data)
        p = np.exp(logp[rows])
        p[np.arange(rows.size), y[rows]] -= 1.0
        d[rows] = p / rows.size
        return (d * g[0, 0],)

    out._backward = bwd
    return out


def dropout(a: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Zero entries with probability ``rate`` and rescale survivors (train only)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    if rng is None:
        raise ValueError("training-mode dropout needs an rng stream")
    keep = rng.random(a.shape) >= rate
    factor = keep / (1.0 - rate)
    out = _node(a.data * factor, (a,), "dropout")
    out._backward = lambda g: (g * factor,)
    return out


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse-mode sweep from a scalar loss.

    Visits the graph in reverse topological order exactly once, writes
    ``.grad`` on every tensor that requires grad, and returns a map from the
    requires_grad *leaves* to their gradients.
    """
    if loss.shape != (1, 1):
        raise ValueError(f"backward needs a scalar (1, 1) loss, got {loss.shape}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and p.requires_grad:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    leaves: dict[Tensor, np.ndarray] = {}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        node.grad = g
        if node._backward is None:
            leaves[node] = g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    return leaves
