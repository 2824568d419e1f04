"""Generalized-Kelly candidate labels and free-energy classification losses.

The kelly module solves the multi-outcome optimal-betting problem in closed
form and carries its own brute-force grid oracle; losses provides the
expected-free-energy objective together with the cross-entropy family, the
Dice surrogate, and the Lovasz-Softmax loss, all with analytic gradients in
the logits; network/optimizer/data/trainer form a desk-scale training
harness around them, and verify replays the math against independent
oracles.
"""

from .kelly import (
    KellySolution,
    brute_force_oracle,
    candidate_labels,
    candidate_labels_batch,
    clamp_probabilities,
    kelly_objective_value,
    log_growth,
)
from .losses import (
    LossEvaluation,
    WeightSpec,
    class_balanced_weight,
    cross_entropy,
    dice_similarity,
    efe_decompose,
    efe_loss,
    focal,
    jaccard_distance_set,
    lovasz_extension,
    lovasz_grad,
    lovasz_softmax,
    softmax,
    vfe_decompose,
    weighted_cross_entropy,
    weighted_focal,
)
from .network import LayerSpec, NetworkParams, backward, forward, init_he, load_params, save_params
from .optimizer import AdamState, adam_step, gd_step, init_adam
from .data import Dataset, batches, corrupt_labels, generate, load_dataset, save_dataset, synthesize_priors
from .trainer import MetricsReport, TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Dataset",
    "KellySolution",
    "LayerSpec",
    "LossEvaluation",
    "MetricsReport",
    "NetworkParams",
    "TrainConfig",
    "WeightSpec",
    "adam_step",
    "backward",
    "batches",
    "brute_force_oracle",
    "candidate_labels",
    "candidate_labels_batch",
    "clamp_probabilities",
    "class_balanced_weight",
    "corrupt_labels",
    "cross_entropy",
    "dice_similarity",
    "efe_decompose",
    "efe_loss",
    "evaluate",
    "focal",
    "forward",
    "gd_step",
    "generate",
    "init_adam",
    "init_he",
    "jaccard_distance_set",
    "kelly_objective_value",
    "load_dataset",
    "load_params",
    "log_growth",
    "lovasz_extension",
    "lovasz_grad",
    "lovasz_softmax",
    "save_dataset",
    "save_params",
    "softmax",
    "synthesize_priors",
    "train",
    "vfe_decompose",
    "weighted_cross_entropy",
    "weighted_focal",
]
