"""Brute-force and finite-difference verification suites.

Each suite replays the closed-form math against an independent oracle and
reports one PropertyResult per property: the exhaustive grid maximum versus
the candidate sweep, separation/conservation/identity checks on the sweep's
output, central finite differences against every analytic loss gradient
composed with a two-layer network, and the vertex/submodularity/convexity
properties of the Jaccard-distance extension.  The cli ``verify`` command
prints these results; the acceptance tests assert them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import losses
from .kelly import (
    brute_force_oracle,
    candidate_labels,
    candidate_labels_batch,
    clamp_probabilities,
    kelly_objective_value,
)
from .network import LayerSpec, NetworkParams, backward, flatten, forward, init_he, unflatten

PAIR_FLOOR = 0.05


@dataclass
class PropertyResult:
    name: str
    passed: bool
    worst_error: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: worst error {self.worst_error:.3e} (tolerance {self.tolerance:.0e})"
        if self.detail:
            text += f" [{self.detail}]"
        return text


def finite_difference_gradient(func, x0, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of a vector."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (func(xp) - func(xm)) / (2.0 * h)
    return grad


def relative_gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute deviation scaled by the gradient magnitude (floored at 1)."""
    scale = max(1.0, float(np.abs(analytic).max(initial=0.0)))
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale


def draw_probability_pair(rng: np.random.Generator, k: int, floor: float = PAIR_FLOOR):
    """A random (prior, posterior) pair with entries bounded away from 0.

    The floor keeps the objective's curvature bounded so a fixed-step grid
    search is a meaningful oracle; near the simplex boundary the grid's own
    resolution error would dominate any closed-form discrepancy.
    """
    draws = []
    for _ in range(2):
        v = rng.dirichlet(np.ones(k))
        v = np.clip(v, floor, None)
        draws.append(v / v.sum())
    return draws[0], draws[1]


# ---------------------------------------------------------------------------
# Kelly suite
# ---------------------------------------------------------------------------

def kelly_suite(trials: int = 1000, seed: int = 0, grid_step: float = 0.005) -> list[PropertyResult]:
    """Closed form vs exhaustive grid plus the optimality-condition checks."""
    gap_tol, below_tol, cons_tol, ident_tol = 1e-3, 1e-9, 1e-9, 1e-12
    worst_gap = worst_below = worst_cons = worst_ident = 0.0
    kkt_ok = True
    card_ok = True
    min_objective = np.inf
    for trial in range(trials):
        k = (2, 3, 4)[trial % 3]
        rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
        prior, posterior = draw_probability_pair(rng, k)
        sol = candidate_labels(prior, posterior)
        _, grid_value = brute_force_oracle(prior, posterior, grid_step)

        worst_gap = max(worst_gap, abs(sol.log_growth - grid_value))
        worst_below = max(worst_below, grid_value - sol.log_growth)
        worst_cons = max(worst_cons, abs(sol.fractions.sum() + sol.unspent - 1.0))
        objective = kelly_objective_value(sol, prior, posterior)
        worst_ident = max(worst_ident, abs(objective - sol.log_growth))
        min_objective = min(min_objective, objective)

        a = clamp_probabilities(prior)
        p = clamp_probabilities(posterior)
        q = a / p
        cand = sorted(sol.candidates)
        rest = sorted(set(range(k)) - sol.candidates)
        if cand and q[cand].min() <= sol.unspent:
            kkt_ok = False
        if rest and q[rest].max() > sol.unspent:
            kkt_ok = False
        if len(sol.candidates) > k - 1:
            card_ok = False

    return [
        PropertyResult(
            "kelly-closed-form-vs-grid", worst_gap <= gap_tol, worst_gap, gap_tol,
            f"{trials} pairs, grid step {grid_step}",
        ),
        PropertyResult(
            "kelly-never-below-grid", worst_below <= below_tol, worst_below, below_tol,
        ),
        PropertyResult(
            "kelly-kkt-separation", kkt_ok, 0.0 if kkt_ok else 1.0, 0.0,
            "strict on candidates, non-strict on the rest",
        ),
        PropertyResult("kelly-conservation", worst_cons <= cons_tol, worst_cons, cons_tol),
        PropertyResult(
            "kelly-objective-identity", worst_ident <= ident_tol, worst_ident, ident_tol,
            "coarsened-KL form equals achieved log-growth",
        ),
        PropertyResult(
            "kelly-objective-nonnegative", min_objective >= 0.0, max(0.0, -min_objective), 0.0,
        ),
        PropertyResult(
            "kelly-cardinality", card_ok, 0.0 if card_ok else 1.0, 0.0,
            "at most K-1 candidates before fallback",
        ),
    ]


# ---------------------------------------------------------------------------
# gradient suite
# ---------------------------------------------------------------------------

GRADIENT_LOSSES = ("ce", "wce", "focal-g0", "focal-g2", "wfocal", "dice", "lovasz", "efe")


def _loss_value_and_grad(name, posteriors, labels, priors, mask):
    counts = labels.sum(axis=0)
    if name == "ce":
        return losses.cross_entropy(posteriors, labels)
    if name == "wce":
        return losses.weighted_cross_entropy(posteriors, labels, None, counts)
    if name == "focal-g0":
        return losses.focal(posteriors, labels, 0.0)
    if name == "focal-g2":
        return losses.focal(posteriors, labels, 2.0)
    if name == "wfocal":
        return losses.weighted_focal(posteriors, labels, None, counts, 2.0)
    if name == "dice":
        return losses.dice_similarity(posteriors, labels)
    if name == "lovasz":
        return losses.lovasz_softmax(posteriors, labels)
    if name == "efe":
        return losses.efe_loss(posteriors, labels, priors, mask)
    raise ValueError(name)


def _gradient_instance(rng: np.random.Generator, k: int, n: int):
    d, hidden = 3, 4
    specs = (
        LayerSpec(d, hidden, activation="prelu"),
        LayerSpec(hidden, k, activation="linear"),
    )
    params = init_he(specs, seed=int(rng.integers(2**31)))
    features = rng.standard_normal((n, d))
    labels = np.zeros((n, k))
    labels[np.arange(n), rng.integers(0, k, n)] = 1.0
    priors = np.vstack([rng.dirichlet(np.ones(k)) for _ in range(n)])
    return specs, params, features, labels, priors


def gradient_suite(instances: int = 100, seed: int = 0, h: float = 1e-6, tol: float = 1e-5) -> list[PropertyResult]:
    """Central finite differences vs every analytic loss gradient.

    Each instance composes the loss with a two-layer network and perturbs
    the flattened parameters.  Candidate sets for the expected-free-energy
    loss are frozen at the unperturbed posteriors, matching the loss's
    stop-gradient semantics.  Also tracks the softmax null-direction
    property (gradient rows sum to zero).
    """
    rowsum_tol = 1e-7
    worst = {name: 0.0 for name in GRADIENT_LOSSES}
    worst_rowsum = 0.0
    for i in range(instances):
        k = (2, 3, 4)[i % 3]
        n = (1, 2, 8)[(i // 3) % 3]
        rng = np.random.default_rng(np.random.SeedSequence([seed, 77, i]))
        specs, params, features, labels, priors = _gradient_instance(rng, k, n)
        theta0 = flatten(params.layers)

        logits0, _ = forward(params, features, training=False)
        post0 = losses.softmax(logits0)
        mask, _, _ = candidate_labels_batch(priors, post0, fallback_labels=labels.argmax(axis=1))

        for name in GRADIENT_LOSSES:
            def value_at(theta, loss_name=name):
                p = NetworkParams(specs=specs, layers=unflatten(theta, specs))
                logits, _ = forward(p, features, training=False)
                return _loss_value_and_grad(loss_name, losses.softmax(logits), labels, priors, mask).value

            logits, cache = forward(params, features, training=False)
            ev = _loss_value_and_grad(name, losses.softmax(logits), labels, priors, mask)
            worst_rowsum = max(worst_rowsum, float(np.abs(ev.grad_logits.sum(axis=1)).max()))
            analytic = flatten(backward(params, cache, ev.grad_logits))
            numeric = finite_difference_gradient(value_at, theta0, h)
            worst[name] = max(worst[name], relative_gradient_error(analytic, numeric))

    results = [
        PropertyResult(
            f"gradient-{name}", worst[name] <= tol, worst[name], tol,
            f"{instances} instances, h={h:g}",
        )
        for name in GRADIENT_LOSSES
    ]
    results.append(
        PropertyResult("gradient-zero-row-sums", worst_rowsum <= rowsum_tol, worst_rowsum, rowsum_tol)
    )
    return results


# ---------------------------------------------------------------------------
# Lovasz suite
# ---------------------------------------------------------------------------

def _bit_vectors(n: int):
    return [np.array(bits, dtype=float) for bits in itertools.product((0.0, 1.0), repeat=n)]


def lovasz_suite(seed: int = 0, pairs: int = 500) -> list[PropertyResult]:
    """Vertex agreement, prefix consistency, submodularity, and convexity."""
    tol = 1e-12

    worst_vertex = 0.0
    for n in range(1, 5):
        for gt_col in _bit_vectors(n):
            labels = np.column_stack([gt_col, 1.0 - gt_col])
            for pred_col in _bit_vectors(n):
                posteriors = np.column_stack([pred_col, 1.0 - pred_col])
                value = losses.lovasz_softmax(posteriors, labels).value
                expected = 0.0
                for c in range(2):
                    gt = labels[:, c].astype(bool)
                    pred = posteriors[:, c].astype(bool)
                    expected += losses.jaccard_distance_set(gt ^ pred, gt, pred)
                expected /= 2.0 * n
                worst_vertex = max(worst_vertex, abs(value - expected))

    worst_prefix = 0.0
    for n in range(1, 7):
        for gt in _bit_vectors(n):
            prefix_jd = np.cumsum(losses.lovasz_grad(gt))
            for j in range(1, n + 1):
                m = np.zeros(n, dtype=bool)
                m[:j] = True
                direct = losses.jaccard_distance_set(m, gt.astype(bool), gt.astype(bool) ^ m)
                worst_prefix = max(worst_prefix, abs(prefix_jd[j - 1] - direct))

    worst_submod = 0.0
    for n in range(1, 5):
        sets = _bit_vectors(n)
        for gt in sets:
            gtb = gt.astype(bool)

            def jd(mask):
                return losses.jaccard_distance_set(mask, gtb, gtb ^ mask)

            for m1, m2 in itertools.product(sets, repeat=2):
                b1, b2 = m1.astype(bool), m2.astype(bool)
                violation = jd(b1 | b2) + jd(b1 & b2) - jd(b1) - jd(b2)
                worst_submod = max(worst_submod, violation)

    worst_convex = 0.0
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    for i in range(pairs):
        n = 1 + i % 8
        gt = (rng.random(n) < 0.5).astype(float)
        m1 = rng.random(n)
        m2 = rng.random(n)
        mid = losses.lovasz_extension(0.5 * (m1 + m2), gt)
        avg = 0.5 * (losses.lovasz_extension(m1, gt) + losses.lovasz_extension(m2, gt))
        worst_convex = max(worst_convex, mid - avg)

    return [
        PropertyResult(
            "lovasz-vertex-agreement", worst_vertex <= tol, worst_vertex, tol,
            "exhaustive, N<=4, K=2",
        ),
        PropertyResult(
            "lovasz-grad-prefix-sums", worst_prefix <= tol, worst_prefix, tol,
            "exhaustive, N<=6",
        ),
        PropertyResult(
            "jaccard-submodularity", worst_submod <= tol, worst_submod, tol,
            "exhaustive set pairs, N<=4",
        ),
        PropertyResult(
            "lovasz-extension-convexity", worst_convex <= tol, worst_convex, tol,
            f"{pairs} random midpoint pairs, N<=8",
        ),
    ]


SUITES = {
    "kelly": lambda seed, trials: kelly_suite(trials=trials or 1000, seed=seed),
    "gradients": lambda seed, trials: gradient_suite(instances=trials or 100, seed=seed),
    "lovasz": lambda seed, trials: lovasz_suite(seed=seed, pairs=trials or 500),
}


def run_suites(names, seed: int = 0, trials: int | None = None) -> list[PropertyResult]:
    results = []
    for name in names:
        results.extend(SUITES[name](seed, trials))
    return results
