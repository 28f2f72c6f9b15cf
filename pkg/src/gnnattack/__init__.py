"""Feature-space robustness workbench for small graph neural networks."""

from .decision import AttackBudget, Perturbation, fgsm, pgd_attack, topk_pgd_attack
from .graphdata import GraphDataset, SplitConfig, load_planetoid
from .harness import ExperimentConfig, parse_config
from .models import TrainConfig, evaluate, load_checkpoint, save_checkpoint, train
from .poison import PoisonConfig, gcl_poison, mean_shift_poison
from .tensor import Tensor

__version__ = "0.1.0"

__all__ = [
    "AttackBudget",
    "ExperimentConfig",
    "GraphDataset",
    "Perturbation",
    "PoisonConfig",
    "SplitConfig",
    "Tensor",
    "TrainConfig",
    "__version__",
    "evaluate",
    "fgsm",
    "gcl_poison",
    "load_checkpoint",
    "load_planetoid",
    "mean_shift_poison",
    "parse_config",
    "pgd_attack",
    "save_checkpoint",
    "topk_pgd_attack",
    "train",
]
