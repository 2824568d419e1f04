"""Classification objectives evaluated as value plus gradient in the logits.

Every loss takes an (N, K) matrix of softmax posteriors and an (N, K) label
matrix whose rows are one-hot (supervised) or uniform 1/K (label-free), and
returns a LossEvaluation holding the scalar value and the analytic gradient
with respect to the pre-softmax outputs.  Gradients are derived in the
posteriors and chained through the softmax Jacobian, which makes every
gradient row sum to zero.

The cross-entropy family (plain, class-weighted, focal, weighted focal)
normalizes by 1/(K*N) and returns nonnegative values.  The Dice similarity
is returned as the quantity to *maximize*; callers minimizing it should use
1 - value and negate the gradient.  The Lovasz-Softmax loss is the convex
closure of the per-class Jaccard distance over sorted mispredictions.  The
expected-free-energy loss combines a label-weighted posterior-entropy term
with the coarsened prior/posterior divergence over per-sample candidate
outcome sets from the kelly module, which are held constant under
differentiation.

vfe_decompose / efe_decompose are single-distribution diagnostics for the
free-energy identities; they do not produce gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .kelly import clamp_probabilities, clamp_probability_rows

LN_EPS = 1e-12


class LabelsNotOneHotError(ValueError):
    """A supervised-only loss received rows that are not one-hot."""


@dataclass
class LossEvaluation:
    """Scalar loss value (nats) and its gradient in the logits.

    The expected-free-energy loss additionally reports its two terms for
    diagnostics; they are None for every other loss.
    """

    value: float
    grad_logits: np.ndarray
    uncertainty: float | None = None
    expected_complexity: float | None = None


@dataclass
class WeightSpec:
    """Weighting knobs for the weighted cross-entropy family.

    ``class_weights``, when given, overrides the inverse-frequency weights
    computed from the batch class counts.  ``sample_weights`` overrides the
    border-distance weight w_mo * exp(-(d1 + d2)^2 / (2 sigma_mo^2)) that is
    otherwise derived from ``d1``/``d2`` when those are supplied.
    """

    class_weights: np.ndarray | None = None
    sample_weights: np.ndarray | None = None
    gamma_mod: float = 2.0
    w_mo: float = 10.0
    sigma_mo: float = 5.0
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None


def softmax(logits) -> np.ndarray:
    """Row-wise softmax with max-subtraction for overflow safety."""
    z = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _ln(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, LN_EPS))


def _check_pair(posteriors, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(posteriors, dtype=float)
    l = np.asarray(labels, dtype=float)
    if p.ndim != 2 or p.shape != l.shape:
        raise ValueError(f"posteriors {p.shape} and labels {l.shape} must be equal 2-d shapes")
    return p, l


def _chain_softmax(posteriors: np.ndarray, grad_posteriors: np.ndarray) -> np.ndarray:
    """Pull a posterior-space gradient back through the softmax Jacobian."""
    inner = (grad_posteriors * posteriors).sum(axis=1, keepdims=True)
    return posteriors * (grad_posteriors - inner)


def _onehot_required(labels: np.ndarray) -> None:
    binary = np.all((labels == 0.0) | (labels == 1.0))
    if not binary or not np.all(labels.sum(axis=1) == 1.0):
        raise LabelsNotOneHotError("labels must be exactly one-hot rows")


# ---------------------------------------------------------------------------
# cross-entropy family
# ---------------------------------------------------------------------------

def cross_entropy(posteriors, labels) -> LossEvaluation:
    """Softmax cross entropy, normalized by 1/(K*N)."""
    p, l = _check_pair(posteriors, labels)
    n, k = p.shape
    scale = 1.0 / (k * n)
    value = -scale * float((l * _ln(p)).sum())
    grad_post = -scale * l / np.maximum(p, LN_EPS)
    return LossEvaluation(value, _chain_softmax(p, grad_post))


def _class_weights(weights: WeightSpec | None, class_counts, k: int) -> np.ndarray:
    if weights is not None and weights.class_weights is not None:
        w = np.asarray(weights.class_weights, dtype=float)
        if w.shape != (k,):
            raise ValueError("class_weights must have one entry per class")
        if np.any(w <= 0.0):
            raise ValueError("class_weights must be positive")
        return w
    counts = np.asarray(class_counts, dtype=float)
    if counts.shape != (k,):
        raise ValueError("class_counts must have one entry per class")
    return counts.sum() / (counts + 1e-8)


def _sample_weights(weights: WeightSpec | None, n: int) -> np.ndarray:
    if weights is None:
        return np.zeros(n)
    if weights.sample_weights is not None:
        w = np.asarray(weights.sample_weights, dtype=float)
        if w.shape != (n,):
            raise ValueError("sample_weights must have one entry per sample")
        return w
    if weights.d1 is not None and weights.d2 is not None:
        d = np.asarray(weights.d1, dtype=float) + np.asarray(weights.d2, dtype=float)
        return weights.w_mo * np.exp(-(d * d) / (2.0 * weights.sigma_mo**2))
    return np.zeros(n)


def weighted_cross_entropy(posteriors, labels, weights: WeightSpec | None, class_counts) -> LossEvaluation:
    """Cross entropy with per-class inverse-frequency plus per-sample weights.

    The class weight is (sum of batch counts) / (count_c + 1e-8); despite
    its name it exceeds 1 for any non-dominant class.  The per-sample
    border-distance weight is added on top when distances are supplied.
    """
    p, l = _check_pair(posteriors, labels)
    n, k = p.shape
    w = _class_weights(weights, class_counts, k)[None, :] + _sample_weights(weights, n)[:, None]
    scale = 1.0 / (k * n)
    value = -scale * float((w * l * _ln(p)).sum())
    grad_post = -scale * w * l / np.maximum(p, LN_EPS)
    return LossEvaluation(value, _chain_softmax(p, grad_post))


def focal(posteriors, labels, gamma_mod: float) -> LossEvaluation:
    """Cross entropy modulated by (1 - posterior)^gamma_mod.

    gamma_mod = 0 reduces exactly to cross_entropy, value and gradient.
    """
    if gamma_mod < 0.0:
        raise ValueError("gamma_mod must be >= 0")
    p, l = _check_pair(posteriors, labels)
    n, k = p.shape
    scale = 1.0 / (k * n)
    pc = np.maximum(p, LN_EPS)
    one_minus = 1.0 - p
    mod = one_minus**gamma_mod
    value = -scale * float((mod * l * np.log(pc)).sum())
    if gamma_mod == 0.0:
        # bit-identical to cross_entropy, so the reduction survives formatting
        grad_post = -scale * l / pc
    else:
        dmod = -gamma_mod * one_minus ** (gamma_mod - 1.0)
        grad_post = -scale * l * (dmod * np.log(pc) + mod / pc)
    return LossEvaluation(value, _chain_softmax(p, grad_post))


def weighted_focal(posteriors, labels, weights: WeightSpec | None, class_counts, gamma_mod: float) -> LossEvaluation:
    """Focal loss with the same per-class weights as weighted_cross_entropy."""
    if gamma_mod < 0.0:
        raise ValueError("gamma_mod must be >= 0")
    p, l = _check_pair(posteriors, labels)
    n, k = p.shape
    w = _class_weights(weights, class_counts, k)[None, :]
    scale = 1.0 / (k * n)
    pc = np.maximum(p, LN_EPS)
    one_minus = 1.0 - p
    mod = one_minus**gamma_mod
    value = -scale * float((w * mod * l * np.log(pc)).sum())
    if gamma_mod == 0.0:
        grad_post = -scale * w * l / pc
    else:
        dmod = -gamma_mod * one_minus ** (gamma_mod - 1.0)
        grad_post = -scale * w * l * (dmod * np.log(pc) + mod / pc)
    return LossEvaluation(value, _chain_softmax(p, grad_post))


def class_balanced_weight(effective_number: float, count: int) -> float:
    """Weight [1 - (n-1)/n] / [1 - ((n-1)/n)^count] from the effective number n.

    Tends to 1/count as n grows; equals 1 at count = 1.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if effective_number <= 1.0:
        raise ValueError("effective_number must exceed 1")
    ratio = (effective_number - 1.0) / effective_number
    return (1.0 - ratio) / (1.0 - ratio**count)


# ---------------------------------------------------------------------------
# metric-based losses
# ---------------------------------------------------------------------------

def dice_similarity(posteriors, labels) -> LossEvaluation:
    """Soft Dice similarity (2/K) * sum_c intersection_c / mass_c.

    A class absent from both labels and posteriors counts as perfectly
    matched (per-class Dice 1, i.e. bracket 1/2).  This is a similarity to
    maximize; a minimizing trainer should target 1 - value with the negated
    gradient.
    """
    p, l = _check_pair(posteriors, labels)
    n, k = p.shape
    num = (l * p).sum(axis=0)
    den = (l * l + p * p).sum(axis=0)
    empty = den == 0.0
    safe_den = np.where(empty, 1.0, den)
    brackets = np.where(empty, 0.5, num / safe_den)
    value = (2.0 / k) * float(brackets.sum())
    grad_post = (2.0 / k) * (l * safe_den - 2.0 * p * num) / safe_den**2
    grad_post[:, empty] = 0.0
    return LossEvaluation(value, _chain_softmax(p, grad_post))


def jaccard_distance_set(mispredictions, ground_truth, predictions) -> float:
    """Jaccard distance |mispredictions| / |ground_truth OR predictions|.

    ``mispredictions`` must be the XOR of the two masks.  Returns 0 when
    ground truth and predictions are both empty.
    """
    m = np.asarray(mispredictions, dtype=bool)
    gt = np.asarray(ground_truth, dtype=bool)
    pred = np.asarray(predictions, dtype=bool)
    union = int(np.count_nonzero(gt | pred))
    if union == 0:
        return 0.0
    return float(np.count_nonzero(m)) / union


def lovasz_grad(sorted_gt) -> np.ndarray:
    """First differences of the Jaccard distance over growing error prefixes.

    ``sorted_gt`` is the ground-truth indicator already permuted by
    descending misprediction.  Runs in O(N) by tracking the cumulative
    intersection and union.
    """
    gt = np.asarray(sorted_gt, dtype=float)
    if gt.size == 0:
        return np.zeros(0)
    gts = gt.sum()
    intersection = gts - np.cumsum(gt)
    union = gts + np.cumsum(1.0 - gt)
    jd = 1.0 - intersection / union
    return np.diff(jd, prepend=0.0)


def lovasz_extension(mispredictions, ground_truth) -> float:
    """Convex closure of the Jaccard distance at a nonnegative error vector.

    Coincides with jaccard_distance_set on binary inputs and interpolates
    convexly elsewhere.  Sorting is stable with ties broken by ascending
    sample index.
    """
    m = np.asarray(mispredictions, dtype=float)
    gt = np.asarray(ground_truth, dtype=float)
    order = np.argsort(-m, kind="stable")
    return float(m[order] @ lovasz_grad(gt[order]))


def lovasz_softmax(posteriors, labels) -> LossEvaluation:
    """Per-class Lovasz extension of the Jaccard distance, averaged by 1/(K*N).

    Supervised only: labels must be one-hot.  The misprediction for the
    labeled class is 1 - posterior and the posterior itself elsewhere.  The
    gradient in the mispredictions is the prefix-difference vector scattered
    back through the per-class sort (the extension is piecewise linear).
    """
    p, l = _check_pair(posteriors, labels)
    _onehot_required(l)
    n, k = p.shape
    m = np.where(l == 1.0, 1.0 - p, p)
    scale = 1.0 / (k * n)
    value = 0.0
    grad_m = np.zeros_like(p)
    for c in range(k):
        order = np.argsort(-m[:, c], kind="stable")
        g = lovasz_grad(l[order, c])
        value += float(m[order, c] @ g)
        grad_m[order, c] = g
    sign = np.where(l == 1.0, -1.0, 1.0)
    grad_post = scale * sign * grad_m
    return LossEvaluation(scale * value, _chain_softmax(p, grad_post))


# ---------------------------------------------------------------------------
# expected-free-energy loss and decomposition diagnostics
# ---------------------------------------------------------------------------

def _candidate_mask(candidate_sets, n: int, k: int) -> np.ndarray:
    if isinstance(candidate_sets, np.ndarray) and candidate_sets.dtype == bool:
        if candidate_sets.shape != (n, k):
            raise ValueError("candidate mask shape must match posteriors")
        return candidate_sets
    sets: Sequence = list(candidate_sets)
    if len(sets) != n:
        raise ValueError(f"expected {n} candidate sets, got {len(sets)}")
    mask = np.zeros((n, k), dtype=bool)
    for j, cand in enumerate(sets):
        idx = sorted(getattr(cand, "candidates", cand))
        mask[j, idx] = True
    return mask


def efe_loss(posteriors, labels, priors, candidate_sets) -> LossEvaluation:
    """Expected free energy: label-weighted uncertainty plus expected complexity.

    uncertainty        = -1/(K*N) * sum l * p * ln p
    expected_complexity = 1/(K*N) * sum_j [ sum_{c in cand_j} a ln(a/p)
                                            + rest_a * ln(rest_a / rest_p) ]

    ``candidate_sets`` is one candidate collection per sample (KellySolution
    instances, index sets, or an (N, K) boolean mask).  The sets come from a
    discrete pre-minimization and are treated as constants: the gradient
    flows only through the posteriors.  Both terms are reported on the
    returned evaluation.
    """
    p_raw, l = _check_pair(posteriors, labels)
    n, k = p_raw.shape
    a = clamp_probability_rows(priors)
    if a.shape != (n, k):
        raise ValueError("priors shape must match posteriors")
    p = clamp_probability_rows(p_raw)
    mask = _candidate_mask(candidate_sets, n, k)

    scale = 1.0 / (k * n)
    ln_p = np.log(p)
    uncertainty = -scale * float((l * p * ln_p).sum())
    grad_unc = -scale * l * (ln_p + 1.0)

    rest_a = np.where(mask, 0.0, a).sum(axis=1)
    rest_p = np.where(mask, 0.0, p).sum(axis=1)
    cand_terms = np.where(mask, a * (np.log(a) - ln_p), 0.0).sum(axis=1)
    rest_terms = np.where(rest_a > 0.0, rest_a * np.log(np.maximum(rest_a, LN_EPS) / np.maximum(rest_p, LN_EPS)), 0.0)
    complexity = scale * float((cand_terms + rest_terms).sum())
    ratio = np.where(rest_p > 0.0, rest_a / np.maximum(rest_p, LN_EPS), 0.0)
    grad_cmp = scale * np.where(mask, -a / p, -ratio[:, None])

    grad_post = grad_unc + grad_cmp
    return LossEvaluation(
        value=uncertainty + complexity,
        grad_logits=_chain_softmax(p, grad_post),
        uncertainty=uncertainty,
        expected_complexity=complexity,
    )


class VfeDecomposition(NamedTuple):
    complexity: float
    accuracy: float
    entropy: float
    cross_entropy: float


def vfe_decompose(state_dist, approx_state_dist, approx_likelihood) -> VfeDecomposition:
    """Variational free energy split two ways.

    complexity - accuracy and cross_entropy - entropy are the same quantity
    by construction; both decompositions are returned so the identity can be
    checked numerically.
    """
    p = clamp_probabilities(state_dist)
    q = clamp_probabilities(approx_state_dist)
    lh = np.asarray(approx_likelihood, dtype=float)
    if lh.shape != p.shape:
        raise ValueError("likelihood length must match the state distribution")
    if np.any(lh <= 0.0) or np.any(lh > 1.0):
        raise ValueError("likelihood entries must lie in (0, 1]")
    complexity = float(np.sum(p * (np.log(p) - np.log(q))))
    accuracy = float(np.sum(p * np.log(lh)))
    entropy = -float(np.sum(p * np.log(p)))
    cross_entropy = -float(np.sum(p * np.log(q * lh)))
    return VfeDecomposition(complexity, accuracy, entropy, cross_entropy)


class EfeDecomposition(NamedTuple):
    expected_complexity: float
    uncertainty: float


def efe_decompose(preferred_obs, predicted_obs, state_dist) -> EfeDecomposition:
    """Expected free energy terms for one preferred/predicted observation pair."""
    p = clamp_probabilities(preferred_obs)
    q = clamp_probabilities(predicted_obs)
    s = clamp_probabilities(state_dist)
    expected_complexity = float(np.sum(p * (np.log(p) - np.log(q))))
    uncertainty = float(s.sum() * -np.sum(q * np.log(q)))
    return EfeDecomposition(expected_complexity, uncertainty)
