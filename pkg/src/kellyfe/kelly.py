"""Closed-form generalized Kelly betting over mutually exclusive outcomes.

A unit bankroll is split between K mutually exclusive outcomes.  Outcome c
has a win probability ``prior[c]`` and a market belief ``posterior[c]``; a
bet of fraction ``g[c]`` pays ``g[c] / posterior[c]`` when c wins.  The
log-growth of the bankroll,

    G(g) = sum_c prior[c] * ln(1 - sum_k g[k] + g[c] / posterior[c]),

is strictly concave, and its maximizer over {g >= 0, sum(g) < 1} has a
closed form: a descending sweep over the ratios q[c] = prior[c]/posterior[c]
admits outcomes while q stays above the "unspent" ratio

    s = (non-candidate prior mass) / (non-candidate posterior mass),

after which g[c] = prior[c] - posterior[c] * s for admitted outcomes and 0
for the rest.  ``candidate_labels`` implements that sweep,
``brute_force_oracle`` independently maximizes G over an exhaustive grid so
the closed form can be checked rather than trusted, and
``kelly_objective_value`` evaluates the coarsened-KL form of the optimum.

Everything here is pure and operates on plain numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

PROB_CLAMP = 1e-8
MAX_GRID_CLASSES = 4


class InfeasibleFractionsError(ValueError):
    """Allocation fractions leave the feasible betting set."""


class MissingReferenceLabelError(ValueError):
    """Empty candidate set and no reference label to fall back on."""


class GridDimensionError(ValueError):
    """Exhaustive grid search requested for too many classes."""


def clamp_probabilities(values) -> np.ndarray:
    """Clamp entries to [1e-8, 1 - 1e-8] and renormalize to sum 1.

    Keeps vectors on the open simplex so ratios and logarithms stay finite
    even when a softmax underflows.
    """
    p = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("probability vector must be 1-d with length >= 2")
    if not np.all(np.isfinite(p)):
        raise ValueError("probability vector has non-finite entries")
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return p / p.sum()


@dataclass(frozen=True)
class KellySolution:
    """Optimal bet for one prior/posterior pair.

    ``candidates`` are the outcomes with strictly positive allocation
    (plus the fallback label when the sweep admits nothing), ``fractions``
    the per-outcome bet sizes, ``unspent`` the bankroll kept out of play,
    and ``log_growth`` the achieved objective value in nats.
    """

    candidates: frozenset[int]
    fractions: np.ndarray
    unspent: float
    log_growth: float


def log_growth(fractions, prior, posterior) -> float:
    """Expected log bankroll multiplier for the given allocation.

    Raises InfeasibleFractionsError when the allocation leaves the feasible
    set (negative entries, total >= 1, or a non-positive payout bracket).
    """
    a = clamp_probabilities(prior)
    p = clamp_probabilities(posterior)
    g = np.asarray(fractions, dtype=float)
    if g.shape != a.shape:
        raise ValueError("fractions and probabilities differ in length")
    total = g.sum()
    if np.any(g < 0.0) or total >= 1.0:
        raise InfeasibleFractionsError("fractions must be >= 0 with sum < 1")
    brackets = 1.0 - total + g / p
    if np.any(brackets <= 0.0):
        raise InfeasibleFractionsError("non-positive payout bracket")
    return float(a @ np.log(brackets))


def candidate_labels(prior, posterior, reference_label: int | None = None) -> KellySolution:
    """Determine the candidate outcome set and its optimal allocation.

    Sorts q = prior/posterior descending (ties broken by ascending index)
    and admits outcomes while q exceeds the current unspent ratio s, which
    is recomputed over the not-yet-admitted outcomes after every admission.
    Admission requires q > s strictly; the sweep therefore never admits all
    K outcomes (the last one always has q equal to the remaining s).

    When nothing is admitted (which happens exactly when prior equals
    posterior entrywise) the ``reference_label`` is inserted instead, with
    the all-zero allocation kept; a missing reference in that situation
    raises MissingReferenceLabelError.
    """
    a = clamp_probabilities(prior)
    p = clamp_probabilities(posterior)
    if a.shape != p.shape:
        raise ValueError("prior and posterior differ in length")

    q = a / p
    order = np.argsort(-q, kind="stable")
    remaining = np.ones(a.size, dtype=bool)
    admitted: list[int] = []
    s = 1.0
    for idx in order:
        if q[idx] > s:
            admitted.append(int(idx))
            remaining[idx] = False
            s = a[remaining].sum() / p[remaining].sum()
        else:
            break

    fractions = np.zeros_like(a)
    if admitted:
        cand = np.array(admitted)
        fractions[cand] = a[cand] - p[cand] * s
        candidates = frozenset(admitted)
    elif reference_label is not None:
        candidates = frozenset({int(reference_label)})
    else:
        raise MissingReferenceLabelError(
            "empty candidate set and no reference label supplied"
        )
    return KellySolution(
        candidates=candidates,
        fractions=fractions,
        unspent=float(s),
        log_growth=log_growth(fractions, a, p),
    )


def clamp_probability_rows(rows) -> np.ndarray:
    """Row-wise clamp_probabilities for an (N, K) matrix."""
    p = np.asarray(rows, dtype=float)
    if p.ndim != 2 or p.shape[1] < 2:
        raise ValueError("expected an (N, K) matrix with K >= 2")
    if not np.all(np.isfinite(p)):
        raise ValueError("probability rows have non-finite entries")
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return p / p.sum(axis=1, keepdims=True)


def candidate_labels_batch(
    priors, posteriors, fallback_labels=None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized candidate sweep over the rows of a batch.

    Same admission rule as candidate_labels, run on every row at once:
    returns (candidate mask (N, K) bool, fractions (N, K), unspent (N,)).
    Rows that admit nothing get their fallback label marked in the mask with
    an all-zero allocation; if ``fallback_labels`` is None such rows raise
    MissingReferenceLabelError.
    """
    a = clamp_probability_rows(priors)
    p = clamp_probability_rows(posteriors)
    if a.shape != p.shape:
        raise ValueError("priors and posteriors differ in shape")
    n, k = a.shape

    q = a / p
    order = np.argsort(-q, axis=1, kind="stable")
    q_sorted = np.take_along_axis(q, order, axis=1)
    a_sorted = np.take_along_axis(a, order, axis=1)
    p_sorted = np.take_along_axis(p, order, axis=1)
    # rest_*[:, t] = mass of the K - t not-yet-admitted outcomes
    rest_a = np.cumsum(a_sorted[:, ::-1], axis=1)[:, ::-1]
    rest_p = np.cumsum(p_sorted[:, ::-1], axis=1)[:, ::-1]
    levels = np.ones((n, k))
    levels[:, 1:] = rest_a[:, 1:] / rest_p[:, 1:]
    # the sweep admits the leading run of sorted outcomes with q > level
    admitted_sorted = np.cumprod(q_sorted > levels, axis=1).astype(bool)
    n_admitted = admitted_sorted.sum(axis=1)
    # the lowest-q outcome always has q equal to the last level, so
    # n_admitted <= K - 1 and indexing levels at n_admitted is safe
    unspent = levels[np.arange(n), n_admitted]

    mask = np.zeros((n, k), dtype=bool)
    np.put_along_axis(mask, order, admitted_sorted, axis=1)
    fractions = np.where(mask, a - p * unspent[:, None], 0.0)

    empty = n_admitted == 0
    if np.any(empty):
        if fallback_labels is None:
            raise MissingReferenceLabelError(
                "empty candidate set and no fallback labels supplied"
            )
        fb = np.asarray(fallback_labels, dtype=int)
        mask[empty, fb[empty]] = True
    return mask, fractions, unspent


def kelly_objective_value(solution: KellySolution, prior, posterior) -> float:
    """Optimal objective in coarsened-KL form.

    Equals ``log_growth(solution.fractions, prior, posterior)``: candidate
    outcomes contribute prior * ln(prior/posterior) and the non-candidates
    contribute through their pooled masses.  Always >= 0, being a KL
    divergence between the prior and posterior coarsened onto the
    candidate / non-candidate partition.
    """
    a = clamp_probabilities(prior)
    p = clamp_probabilities(posterior)
    mask = np.zeros(a.size, dtype=bool)
    mask[list(solution.candidates)] = True
    value = float(np.sum(a[mask] * (np.log(a[mask]) - np.log(p[mask]))))
    rest_a = a[~mask].sum()
    rest_p = p[~mask].sum()
    if rest_a > 0.0:
        value += float(rest_a * np.log(rest_a / rest_p))
    return value


def _max_units(grid_step: float) -> int:
    # largest m with m * grid_step < 1
    return int((1.0 - 1e-12) // grid_step)


def _combine_full(left: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best split of y units between a combined prefix and one more class.

    Returns (best[y], arg[y]) where best[y] = max_j left[j] + values[y - j]
    for y = 0..n-1, via an anti-diagonal sliding-window maximum.
    """
    n = left.size
    if n == 1:
        return left + values, np.zeros(1, dtype=np.intp)
    padded = np.concatenate([np.full(n - 1, -np.inf), values])
    windows = sliding_window_view(padded, n)[::-1]  # windows[j, y] = values[y - j]
    table = left[:, None] + windows
    arg = table.argmax(axis=0)
    return table[arg, np.arange(n)], arg


def brute_force_oracle(prior, posterior, grid_step: float) -> tuple[np.ndarray, float]:
    """Maximize log_growth over the exhaustive grid {g >= 0, sum(g) < 1}.

    Every grid point g = grid_step * x with integer x >= 0 and
    sum(x) * grid_step < 1 is covered.  The maximum is found exactly by
    dynamic programming over the total number of allocated grid units: for
    a fixed total the objective is a sum of per-class tables, so the best
    split is composed class by class and the overall maximizer recovered by
    backtracking.  This evaluates the same finite search space as direct
    enumeration (against which it is tested) at a fraction of the cost.

    Only the grid granularity is shared with the closed form; no ordering,
    admission, or unspent-ratio logic is reused.
    """
    a = clamp_probabilities(prior)
    p = clamp_probabilities(posterior)
    k = a.size
    if k > MAX_GRID_CLASSES:
        raise GridDimensionError(f"exhaustive grid supports at most {MAX_GRID_CLASSES} classes")
    if not 0.0 < grid_step <= 0.1:
        raise ValueError("grid_step must lie in (0, 0.1]")

    h = float(grid_step)
    m_max = _max_units(h)
    units = np.arange(m_max + 1)
    totals = 1.0 - units * h  # 1 - m*h, strictly positive by construction
    # tables[c][m, x] = a_c * ln(1 - m*h + x*h / p_c); only x <= m is used
    tables = [
        a[c] * np.log(totals[:, None] + units[None, :] * (h / p[c]))
        for c in range(k)
    ]

    # The objective is exactly invariant along g -> g + eps * posterior, so
    # grid maximizers form a ridge; requiring improvement beyond float noise
    # keeps the first (minimal-allocation) point of that ridge.
    tie_tol = 1e-12
    best_value = -np.inf
    best_units: np.ndarray | None = None
    for m in range(m_max + 1):
        rows = [t[m, : m + 1] for t in tables]
        acc = rows[0]
        args = []
        for c in range(1, k - 1):
            acc, arg = _combine_full(acc, rows[c])
            args.append(arg)
        if k > 1:
            # final class only needs the split of exactly m units
            final = acc + rows[k - 1][::-1]
            j = int(final.argmax())
            value = float(final[j])
        else:  # pragma: no cover - K >= 2 enforced by clamp_probabilities
            j = m
            value = float(acc[m])
        if value > best_value + tie_tol:
            best_value = value
            alloc = np.zeros(k, dtype=int)
            alloc[k - 1] = m - j
            y = j
            for c in range(k - 2, 0, -1):
                split = int(args[c - 1][y])
                alloc[c] = y - split
                y = split
            alloc[0] = y
            best_units = alloc

    assert best_units is not None
    return best_units * h, best_value
