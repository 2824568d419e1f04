"""Mini-batch training loop and one-vs-rest evaluation.

Wires the network, the losses, the Adam optimizer, and the per-iteration
candidate-label sweep together under four supervision modes:

    grpr  reference labels + priors
    grnp  reference labels only (uniform priors substituted)
    ngpr  priors only (uniform label rows substituted)
    ngnp  neither (uniform both)

Early stopping tracks an exponential moving average of the validation loss
and returns the parameters from the best-EMA iteration.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields

import numpy as np

from . import losses
from .data import Dataset, batches
from .kelly import candidate_labels_batch
from .network import LayerSpec, NetworkParams, backward, flatten, forward, init_he, unflatten
from .optimizer import adam_step, init_adam

LOSS_NAMES = ("efe", "ce", "wce", "focal", "wfocal", "dice", "lovasz")
MODE_NAMES = ("grpr", "grnp", "ngpr", "ngnp")


class IncompatibleConfigError(ValueError):
    """Loss and supervision mode cannot be combined."""


@dataclass
class TrainConfig:
    loss: str = "efe"
    mode: str = "grpr"
    hidden_widths: tuple[int, ...] = (16,)
    dropout_retention: float = 1.0
    gamma_mod: float = 2.0
    class_weights: tuple[float, ...] | None = None
    alpha_lr: float = 0.001
    beta_fm: float = 0.90
    beta_sm: float = 0.99
    batch_size: int = 32
    max_iterations: int = 15000
    patience: int = 100
    ema_decay: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.mode not in MODE_NAMES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in [0, 1)")


@dataclass
class HistoryRecord:
    iteration: int
    train_loss: float
    val_loss: float
    val_loss_ema: float
    uncertainty_term: float | None = None
    expected_complexity_term: float | None = None


@dataclass
class MetricsReport:
    precision: np.ndarray
    recall: np.ndarray
    dice: np.ndarray
    jaccard: np.ndarray
    f1: np.ndarray
    precision_defined: np.ndarray
    recall_defined: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_dice: float
    macro_jaccard: float
    macro_f1: float
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=int))

    def to_dict(self) -> dict:
        return {
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "dice": self.dice.tolist(),
            "jaccard": self.jaccard.tolist(),
            "f1": self.f1.tolist(),
            "precision_defined": self.precision_defined.tolist(),
            "recall_defined": self.recall_defined.tolist(),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_dice": self.macro_dice,
            "macro_jaccard": self.macro_jaccard,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.tolist(),
        }


def supervised(mode: str) -> bool:
    return mode in ("grpr", "grnp")


def check_compatibility(config: TrainConfig) -> None:
    """Supervised-only losses need reference labels (gr* modes)."""
    if config.loss != "efe" and not supervised(config.mode):
        raise IncompatibleConfigError(
            f"loss {config.loss!r} needs reference labels; mode {config.mode!r} has none"
        )


def _derived_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def _label_matrix(dataset: Dataset, mode: str) -> np.ndarray:
    k = dataset.n_classes
    if supervised(mode):
        rows = np.zeros((len(dataset), k))
        rows[np.arange(len(dataset)), dataset.reference_labels] = 1.0
        return rows
    return np.full((len(dataset), k), 1.0 / k)


def _prior_matrix(dataset: Dataset, mode: str) -> np.ndarray:
    if mode in ("grpr", "ngpr"):
        return dataset.priors
    return np.full((len(dataset), dataset.n_classes), 1.0 / dataset.n_classes)


def _evaluate_loss(
    config: TrainConfig,
    posteriors: np.ndarray,
    labels: np.ndarray,
    priors: np.ndarray,
    reference_labels: np.ndarray,
) -> losses.LossEvaluation:
    name = config.loss
    if name == "efe":
        if supervised(config.mode):
            fallback = reference_labels
        else:
            fallback = posteriors.argmax(axis=1)
        mask, _, _ = candidate_labels_batch(priors, posteriors, fallback_labels=fallback)
        return losses.efe_loss(posteriors, labels, priors, mask)
    if name == "ce":
        return losses.cross_entropy(posteriors, labels)
    spec = losses.WeightSpec(
        class_weights=None if config.class_weights is None else np.asarray(config.class_weights, dtype=float)
    )
    counts = labels.sum(axis=0)
    if name == "wce":
        return losses.weighted_cross_entropy(posteriors, labels, spec, counts)
    if name == "focal":
        return losses.focal(posteriors, labels, config.gamma_mod)
    if name == "wfocal":
        return losses.weighted_focal(posteriors, labels, spec, counts, config.gamma_mod)
    if name == "dice":
        ev = losses.dice_similarity(posteriors, labels)
        return losses.LossEvaluation(1.0 - ev.value, -ev.grad_logits)
    if name == "lovasz":
        return losses.lovasz_softmax(posteriors, labels)
    raise ValueError(f"unknown loss {name!r}")  # pragma: no cover


def _network_specs(config: TrainConfig, n_features: int, n_classes: int) -> tuple[LayerSpec, ...]:
    widths = [n_features, *config.hidden_widths, n_classes]
    specs = []
    for i, (w_in, w_out) in enumerate(zip(widths[:-1], widths[1:])):
        last = i == len(widths) - 2
        specs.append(
            LayerSpec(
                input_width=w_in,
                output_width=w_out,
                activation="linear" if last else "prelu",
                dropout_retention=1.0 if last else config.dropout_retention,
            )
        )
    return tuple(specs)


def train(config: TrainConfig, train_set: Dataset, val_set: Dataset):
    """Optimize a fresh network on train_set; returns (params, history).

    Each iteration consumes one shuffled mini-batch, updates the parameters
    with Adam, and scores the configured loss on the full validation set in
    inference mode.  Training stops when the validation-loss EMA has not
    improved on its best value for ``patience`` iterations, or at
    ``max_iterations``; the returned parameters are a snapshot from the
    best-EMA iteration.  Candidate sets for the expected-free-energy loss
    are recomputed from fresh posteriors every iteration.
    """
    check_compatibility(config)
    if train_set.n_classes != val_set.n_classes or train_set.n_features != val_set.n_features:
        raise ValueError("train and validation sets have mismatched shapes")

    specs = _network_specs(config, train_set.n_features, train_set.n_classes)
    params = init_he(specs, seed=_derived_seed(config.seed, 0))
    state = init_adam(
        flatten(params.layers).size, config.alpha_lr, config.beta_fm, config.beta_sm
    )

    train_labels = _label_matrix(train_set, config.mode)
    train_priors = _prior_matrix(train_set, config.mode)
    val_labels = _label_matrix(val_set, config.mode)
    val_priors = _prior_matrix(val_set, config.mode)

    history: list[HistoryRecord] = []
    best_ema = np.inf
    best_iteration = 0
    best_params = params.copy()
    ema = None
    iteration = 0
    epoch = 0
    stop = False
    while not stop:
        for idx in batches(train_set, config.batch_size, _derived_seed(config.seed, 1, epoch)):
            iteration += 1
            logits, cache = forward(
                params,
                train_set.features[idx],
                training=True,
                seed=_derived_seed(config.seed, 2, iteration),
            )
            ev = _evaluate_loss(
                config,
                losses.softmax(logits),
                train_labels[idx],
                train_priors[idx],
                train_set.reference_labels[idx],
            )
            grads = backward(params, cache, ev.grad_logits)
            state, flat = adam_step(state, flatten(params.layers), flatten(grads))
            params = NetworkParams(specs=params.specs, layers=unflatten(flat, params.specs))

            val_logits, _ = forward(params, val_set.features, training=False)
            val_ev = _evaluate_loss(
                config,
                losses.softmax(val_logits),
                val_labels,
                val_priors,
                val_set.reference_labels,
            )
            if ema is None:
                ema = val_ev.value
            else:
                ema = config.ema_decay * ema + (1.0 - config.ema_decay) * val_ev.value
            history.append(
                HistoryRecord(
                    iteration=iteration,
                    train_loss=ev.value,
                    val_loss=val_ev.value,
                    val_loss_ema=ema,
                    uncertainty_term=ev.uncertainty,
                    expected_complexity_term=ev.expected_complexity,
                )
            )
            if ema < best_ema:
                best_ema = ema
                best_iteration = iteration
                best_params = params.copy()
            if iteration - best_iteration >= config.patience or iteration >= config.max_iterations:
                stop = True
                break
        epoch += 1
    return best_params, history


def evaluate(params: NetworkParams, test_set: Dataset) -> MetricsReport:
    """One-vs-rest metrics of the argmax predictions against the true labels.

    Ties go to the lowest class index.  Zero-denominator precision/recall
    are reported as 0 with the matching *_defined flag cleared; a class
    absent from both truth and predictions scores Dice and Jaccard 1.
    """
    logits, _ = forward(params, test_set.features, training=False)
    predictions = logits.argmax(axis=1)
    k = test_set.n_classes
    confusion = np.zeros((k, k), dtype=int)
    np.add.at(confusion, (test_set.true_labels, predictions), 1)

    tp = np.diag(confusion).astype(float)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp

    prec_den = tp + fp
    rec_den = tp + fn
    precision_defined = prec_den > 0
    recall_defined = rec_den > 0
    precision = np.where(precision_defined, tp / np.where(prec_den > 0, prec_den, 1.0), 0.0)
    recall = np.where(recall_defined, tp / np.where(rec_den > 0, rec_den, 1.0), 0.0)

    overlap = 2.0 * tp + fp + fn
    dice = np.where(overlap > 0, 2.0 * tp / np.where(overlap > 0, overlap, 1.0), 1.0)
    union = tp + fp + fn
    jaccard = np.where(union > 0, tp / np.where(union > 0, union, 1.0), 1.0)
    pr_sum = precision + recall
    f1 = np.where(pr_sum > 0, 2.0 * precision * recall / np.where(pr_sum > 0, pr_sum, 1.0), 0.0)

    return MetricsReport(
        precision=precision,
        recall=recall,
        dice=dice,
        jaccard=jaccard,
        f1=f1,
        precision_defined=precision_defined,
        recall_defined=recall_defined,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_dice=float(dice.mean()),
        macro_jaccard=float(jaccard.mean()),
        macro_f1=float(f1.mean()),
        confusion=confusion,
    )


HISTORY_COLUMNS = (
    "iteration",
    "train_loss",
    "val_loss",
    "val_loss_ema",
    "uncertainty_term",
    "expected_complexity_term",
)


def write_history(history: list[HistoryRecord], path) -> None:
    """History CSV with shortest-round-trip float formatting (deterministic)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        for rec in history:
            cells = [str(rec.iteration)]
            for name in HISTORY_COLUMNS[1:]:
                value = getattr(rec, name)
                cells.append("" if value is None else repr(float(value)))
            fh.write(",".join(cells) + "\n")


def read_history(path) -> list[HistoryRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != HISTORY_COLUMNS:
            raise ValueError(f"unexpected history header {header!r}")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            records.append(
                HistoryRecord(
                    iteration=int(cells[0]),
                    train_loss=float(cells[1]),
                    val_loss=float(cells[2]),
                    val_loss_ema=float(cells[3]),
                    uncertainty_term=float(cells[4]) if cells[4] else None,
                    expected_complexity_term=float(cells[5]) if cells[5] else None,
                )
            )
    return records


def config_from_dict(doc: dict) -> TrainConfig:
    """Build a TrainConfig from a plain dict, rejecting unknown keys."""
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    doc = copy.deepcopy(doc)
    if "hidden_widths" in doc:
        doc["hidden_widths"] = tuple(int(w) for w in doc["hidden_widths"])
    if doc.get("class_weights") is not None:
        doc["class_weights"] = tuple(float(w) for w in doc["class_weights"])
    return TrainConfig(**doc)
