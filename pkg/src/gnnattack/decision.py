"""Decision-time feature attacks: FGSM and projected gradient descent.

The attacks perturb rows of the feature matrix for a chosen target-node set
(typically the top-K degree nodes), maximizing the model's cross-entropy on
those nodes while every target row stays inside a per-row ε-ball. The model
itself, and the graph structure, are never touched.

Projection is radial for every norm: η ← min(ε, ‖η‖_p) · η/‖η‖_p. For p = ∞
the canonical alternative is coordinate clamping, available as the "clamp"
projection mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graphdata import GraphDataset, top_k_degree
from .models import EvalReport, evaluate, forward_logits, prepare_structure
from .tensor import Tensor

__all__ = [
    "AttackError",
    "AttackBudget",
    "Perturbation",
    "parse_norm",
    "norm_name",
    "row_norms",
    "project_norm",
    "project_rows",
    "fgsm",
    "pgd_attack",
    "topk_pgd_attack",
    "attack_report",
]

NORM_BOUND_SLACK = 1 + 1e-9
PROJECTIONS = ("radial", "clamp")


class AttackError(RuntimeError):
    """The attack hit a non-finite loss or gradient at ``iteration``."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


def parse_norm(value) -> float:
    """Accept 1/2/inf as numbers or the l1/l2/linf spellings."""
    if isinstance(value, str):
        table = {"l1": 1.0, "l2": 2.0, "linf": np.inf, "1": 1.0, "2": 2.0, "inf": np.inf}
        try:
            return table[value.lower()]
        except KeyError:
            raise ValueError(f"unknown norm {value!r}; use l1, l2, or linf") from None
    p = float(value)
    if p not in (1.0, 2.0, np.inf):
        raise ValueError(f"norm must be 1, 2, or inf, got {value!r}")
    return p


def norm_name(p: float) -> str:
    return {1.0: "l1", 2.0: "l2", np.inf: "linf"}[float(p)]


@dataclass(frozen=True)
class AttackBudget:
    """Per-row budget: norm p, radius ε, step α, iteration count, target count.

    ``k=None`` means every node. ``step=None`` defaults to ε/4, the usual
    fraction that lets the iterate cross the ball a few times.
    """

    norm: float = np.inf
    eps: float = 0.1
    step: float | None = None
    iterations: int = 40
    k: int | None = None
    projection: str = "radial"

    def __post_init__(self):
        object.__setattr__(self, "norm", parse_norm(self.norm))
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.step is None:
            object.__setattr__(self, "step", self.eps / 4.0)
        if self.eps > 0 and self.step <= 0:
            raise ValueError("step must be positive for a nonzero eps")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}")

    def resolve_k(self, n: int) -> int:
        k = n if self.k is None else self.k
        if not 1 <= k <= n:
            raise ValueError(f"k must lie in [1, {n}], got {k}")
        return k


@dataclass(frozen=True)
class Perturbation:
    """A dense delta matrix that is exactly zero off the target rows."""

    delta: np.ndarray
    targets: np.ndarray
    norm: float
    eps: float

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=np.float64)
        targets = np.unique(np.asarray(self.targets, dtype=np.int64))
        if delta.ndim != 2:
            raise ValueError("delta must be an n×d matrix")
        if targets.size == 0:
            raise ValueError("target set is empty")
        if targets.min() < 0 or targets.max() >= delta.shape[0]:
            raise ValueError("target id out of range")
        off = np.ones(delta.shape[0], dtype=bool)
        off[targets] = False
        if delta[off].any():
            raise ValueError("nonzero perturbation outside the target rows")
        bound = self.eps * NORM_BOUND_SLACK
        if row_norms(delta[targets], self.norm).max(initial=0.0) > bound:
            raise ValueError(f"target row exceeds the eps={self.eps} ball")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "targets", targets)

    def apply(self, features: np.ndarray) -> np.ndarray:
        """X' = X + δ, leaving non-target rows bit-identical to X."""
        out = np.array(features, dtype=np.float64, copy=True)
        out[self.targets] += self.delta[self.targets]
        return out


def row_norms(rows: np.ndarray, p: float) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[0] == 0:
        return np.zeros(0)
    p = parse_norm(p)
    if p == 1.0:
        return np.abs(rows).sum(axis=1)
    if p == 2.0:
        return np.sqrt((rows * rows).sum(axis=1))
    return np.abs(rows).max(axis=1)


def project_norm(eta: np.ndarray, p: float, eps: float) -> np.ndarray:
    """Radial projection of one vector: min(ε, ‖η‖_p)·η/‖η‖_p.

    Vectors already inside the ball (including η = 0) come back unchanged,
    which makes the projection exactly idempotent.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    eta = np.asarray(eta, dtype=np.float64)
    nrm = float(row_norms(eta.reshape(1, -1), p)[0])
    if nrm <= eps:
        return eta
    return eta * (eps / nrm)


def project_rows(delta: np.ndarray, p: float, eps: float, mode: str = "radial") -> np.ndarray:
    """Row-wise projection of a matrix; "clamp" coordinate-clips when p = ∞."""
    p = parse_norm(p)
    if mode == "clamp" and p == np.inf:
        return np.clip(delta, -eps, eps)
    nrm = row_norms(delta, p)
    over = nrm > eps
    scale = np.where(over, eps / np.where(nrm == 0, 1.0, nrm), 1.0)
    return delta * scale[:, None]


def _target_mask(dataset: GraphDataset, targets) -> tuple[np.ndarray, np.ndarray]:
    targets = np.unique(np.asarray(targets, dtype=np.int64))
    if targets.size == 0:
        raise ValueError("target set is empty")
    if targets.min() < 0 or targets.max() >= dataset.n:
        raise ValueError("target id out of range")
    mask = np.zeros(dataset.n, dtype=bool)
    mask[targets] = True
    return targets, mask


def _target_loss_grad(params, structure, dataset, features, mask):
    """Gradient of the joint target cross-entropy with respect to the features."""
    xt = Tensor.param(features)
    with np.errstate(all="ignore"):
        logits = forward_logits(params, structure, xt)
        loss = T.cross_entropy(logits, dataset.labels, mask)
        grads = T.backward(loss)
    return loss.item(), grads[xt]


def fgsm(params, dataset: GraphDataset, targets, eps: float,
         structure=None) -> Perturbation:
    """One-shot sign-of-gradient perturbation: η = ε·sign(∇_X J) on target rows."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    targets, mask = _target_mask(dataset, targets)
    if structure is None:
        structure = prepare_structure(params.kind, dataset)
    delta = np.zeros_like(dataset.features)
    if eps > 0:
        _, grad = _target_loss_grad(params, structure, dataset, dataset.features, mask)
        delta[targets] = eps * np.sign(grad[targets])
    return Perturbation(delta=delta, targets=targets, norm=np.inf, eps=eps)


def pgd_attack(params, dataset: GraphDataset, targets, budget: AttackBudget,
               structure=None) -> Perturbation:
    """Iterated sign ascent with per-row projection after every step.

    Each iteration runs a full inference-mode forward/backward on X + η, so
    gradients see the perturbation flowing through the whole convolution.
    """
    targets, mask = _target_mask(dataset, targets)
    if structure is None:
        structure = prepare_structure(params.kind, dataset)
    delta = np.zeros_like(dataset.features)
    if budget.eps == 0:
        return Perturbation(delta=delta, targets=targets, norm=budget.norm, eps=0.0)
    for iteration in range(1, budget.iterations + 1):
        loss, grad = _target_loss_grad(
            params, structure, dataset, dataset.features + delta, mask)
        if not (np.isfinite(loss) and np.isfinite(grad[targets]).all()):
            raise AttackError(f"non-finite gradient at iteration {iteration}", iteration)
        stepped = delta[targets] + budget.step * np.sign(grad[targets])
        delta[targets] = project_rows(stepped, budget.norm, budget.eps, budget.projection)
    return Perturbation(delta=delta, targets=targets, norm=budget.norm, eps=budget.eps)


def topk_pgd_attack(params, dataset: GraphDataset, budget: AttackBudget,
                    structure=None) -> tuple[np.ndarray, Perturbation]:
    """Attack the K highest-degree nodes; returns (X', Perturbation)."""
    k = budget.resolve_k(dataset.n)
    targets = top_k_degree(dataset, k)
    pert = pgd_attack(params, dataset, targets, budget, structure=structure)
    return pert.apply(dataset.features), pert


def attack_report(params, dataset: GraphDataset, x_prime: np.ndarray,
                  structure=None, split: str = "test") -> EvalReport:
    """Inference-mode evaluation with the perturbed features swapped in."""
    mask = {"train": dataset.train_mask, "val": dataset.val_mask,
            "test": dataset.test_mask}[split]
    return evaluate(params, dataset.with_features(x_prime), mask,
                    split=split, structure=structure)
