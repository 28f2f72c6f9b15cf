"""Training-time feature poisoning.

Two families. Mean shift pulls every feature row toward the global mean row
by a factor λ, a closed-form homogenization. Contrastive poisoning descends
a two-term objective over a free copy X* of the features: a similarity term
that pushes all poisoned rows toward each other, and a dissimilarity term
that pushes them away from their clean originals,

    L = λ·L_sim + (1−λ)·L_dis.

Both produce a feature matrix to hand to poison_retrain_evaluate, which
retrains from scratch and reports accuracy on the poisoned graph and on the
clean graph side by side.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import tensor as T
from .graphdata import GraphDataset
from .models import Adam, EvalReport, evaluate_split, TrainConfig, train
from .tensor import Tensor

__all__ = [
    "PoisonError",
    "PoisonConfig",
    "PoisonOutcome",
    "mean_shift_poison",
    "gcl_sim_loss",
    "gcl_dis_loss",
    "gcl_poison",
    "poison_retrain_evaluate",
    "write_trace_csv",
]

SIMILARITIES = ("cosine", "dot")


class PoisonError(RuntimeError):
    """Poison optimization went non-finite at ``epoch``."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class PoisonConfig:
    lam: float = 0.3
    epochs: int = 200
    learning_rate: float = 0.01
    similarity: str = "cosine"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be nonnegative")
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"similarity must be one of {SIMILARITIES}")


@dataclass(frozen=True)
class PoisonOutcome:
    """Poisoned features plus whatever stage produced them recorded alongside.

    The optimization path fills ``trace`` (one row per epoch: epoch, l_sim,
    l_dis, total) and the final loss values; the retrain path fills the two
    reports. The harness merges both via ``merged``.
    """

    x_star: np.ndarray
    sim_loss: float | None = None
    dis_loss: float | None = None
    trace: tuple = ()
    clean_report: EvalReport | None = None
    poisoned_report: EvalReport | None = None

    def merged(self, other: "PoisonOutcome") -> "PoisonOutcome":
        return replace(
            self,
            clean_report=other.clean_report,
            poisoned_report=other.poisoned_report,
        )


def mean_shift_poison(x: np.ndarray, lam: float) -> np.ndarray:
    """Rows blended with the global mean row: (1−λ)·x_i + λ·x̄.

    The mean is computed once from the input, so column means survive the
    blend and total row variance contracts by exactly (1−λ)².
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    x = np.asarray(x, dtype=np.float64)
    if lam == 0.0:
        return x.copy()
    mean = x.mean(axis=0)
    if lam == 1.0:
        return np.broadcast_to(mean, x.shape).copy()
    return (1.0 - lam) * x + lam * mean


def _embed(t: Tensor, similarity: str) -> Tensor:
    if similarity == "cosine":
        return T.l2_normalize_rows(t)
    return t


def gcl_sim_loss(x_star, similarity: str = "cosine") -> Tensor:
    """Negative mean pairwise similarity of the poisoned rows.

    The double sum is literal and includes i = j, so N mutually orthogonal
    unit rows score −1 (the self-similarity floor) and N identical unit rows
    score −N.
    """
    t = x_star if isinstance(x_star, Tensor) else Tensor.param(x_star)
    if t.shape[0] < 1:
        raise ValueError("need at least one row")
    u = _embed(t, similarity)
    total = T.sum_all(T.matmul(u, T.transpose(u)))
    return T.scale(total, -1.0 / t.shape[0])


def gcl_dis_loss(x_clean: np.ndarray, x_star, similarity: str = "cosine") -> Tensor:
    """Σ_i log Σ_j exp(sim(clean_i, poisoned_j)), max-shift stabilized."""
    t = x_star if isinstance(x_star, Tensor) else Tensor.param(x_star)
    clean = Tensor.const(np.asarray(x_clean, dtype=np.float64))
    if clean.shape != t.shape:
        raise ValueError(f"shape mismatch: {clean.shape} vs {t.shape}")
    scores = T.matmul(_embed(clean, similarity), T.transpose(_embed(t, similarity)))
    return T.sum_all(T.log_sum_exp_rows(scores))


def gcl_poison(x: np.ndarray, config: PoisonConfig) -> PoisonOutcome:
    """Descend λ·L_sim + (1−λ)·L_dis over a free copy of the features.

    X* starts at X and is updated by an adaptive-moment optimizer for the
    configured number of epochs. The run is deterministic: the objective and
    initializer have no random component, so the seed only labels the run.
    """
    x = np.asarray(x, dtype=np.float64)
    x_star = Tensor.param(x.copy())
    opt = Adam([x_star], lr=config.learning_rate)
    trace = []
    for epoch in range(1, config.epochs + 1):
        with np.errstate(all="ignore"):
            sim = gcl_sim_loss(x_star, config.similarity)
            dis = gcl_dis_loss(x, x_star, config.similarity)
            total = T.add(T.scale(sim, config.lam), T.scale(dis, 1.0 - config.lam))
            values = (sim.item(), dis.item(), total.item())
            if not all(np.isfinite(v) for v in values):
                raise PoisonError(f"non-finite poison loss at epoch {epoch}", epoch)
            opt.step(T.backward(total))
        trace.append({"epoch": epoch, "l_sim": values[0], "l_dis": values[1],
                      "total": values[2]})
    return PoisonOutcome(
        x_star=x_star.data.copy(),
        sim_loss=trace[-1]["l_sim"],
        dis_loss=trace[-1]["l_dis"],
        trace=tuple(trace),
    )


def poison_retrain_evaluate(dataset: GraphDataset, x_star: np.ndarray,
                            config: TrainConfig | None = None,
                            kind: str = "gcn") -> PoisonOutcome:
    """Retrain from scratch on X* and report both sides of the swap.

    ``poisoned_report`` evaluates the poisoned-trained model on the poisoned
    features; ``clean_report`` evaluates the same model on the original
    features. Splits and training config are identical to a clean run.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.shape != dataset.features.shape:
        raise ValueError(
            f"poisoned features {x_star.shape} do not match dataset "
            f"{dataset.features.shape}")
    poisoned = dataset.with_features(x_star)
    params, _ = train(kind, poisoned, config)
    return PoisonOutcome(
        x_star=x_star,
        poisoned_report=evaluate_split(params, poisoned, "test"),
        clean_report=evaluate_split(params, dataset, "test"),
    )


def write_trace_csv(path: str | Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "l_sim", "l_dis", "total"])
        writer.writeheader()
        for row in trace:
            writer.writerow(row)
