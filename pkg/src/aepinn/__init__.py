"""Attention-enhanced physics-informed neural networks for elliptic
interface problems, with an in-package differentiation engine, reference
baselines, and a reproducible benchmark harness."""

from . import baselines, geometry, jets, metrics, networks, presets, problems, sampling, tape, training
from .jets import ValueJet, check_gradient_fd, eval_jet, loss_gradient
from .metrics import ErrorReport, ResultRow, compute_errors, error_table
from .networks import CompositeModel, FcnArch, IaArch, load_checkpoint, save_checkpoint
from .presets import preset
from .problems import ExactSolutionModel, ProblemSpec, builtin
from .sampling import Rng
from .solvers import InterfaceSolver
from .training import (
    AdamState,
    LossBreakdown,
    LossWeights,
    TrainConfig,
    TrainHistory,
    adam_step,
    assemble_loss,
    gradcheck,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CompositeModel",
    "ErrorReport",
    "ExactSolutionModel",
    "FcnArch",
    "IaArch",
    "InterfaceSolver",
    "LossBreakdown",
    "LossWeights",
    "ProblemSpec",
    "ResultRow",
    "Rng",
    "TrainConfig",
    "TrainHistory",
    "ValueJet",
    "adam_step",
    "assemble_loss",
    "builtin",
    "check_gradient_fd",
    "compute_errors",
    "error_table",
    "eval_jet",
    "gradcheck",
    "load_checkpoint",
    "loss_gradient",
    "preset",
    "save_checkpoint",
    "train",
    "__version__",
]
