"""Desk-scale prior-token + LoRA decoder (numpy, hand-written gradients)."""
from .ablation import ablate
from .audit import effective_rank_audit, grad_check
from .config import PRODUCTION_SCALE, ToyConfig, TrainConfig
from .model import Batch, Sample, ToyEmoLA, assemble_sequence, frozen_hash, prior_project
from .synthetic import SyntheticFaces, TaskSpec
from .train import AdamW, TrainingError, evaluate, fit, train_step

__all__ = [
    "AdamW", "Batch", "PRODUCTION_SCALE", "Sample", "SyntheticFaces", "TaskSpec", "ToyConfig", "ToyEmoLA",
    "TrainConfig", "TrainingError", "ablate", "assemble_sequence", "effective_rank_audit", "evaluate",
    "fit", "frozen_hash", "grad_check", "prior_project", "train_step",
]
