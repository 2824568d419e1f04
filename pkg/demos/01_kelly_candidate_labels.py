"""Optimal betting over mutually exclusive outcomes, step by step.

A sample "bets" a unit bankroll on class labels: its prior row gives the
win probabilities, the classifier's softmax posterior plays the market
belief (a bet on class c pays 1/posterior[c]).  The closed-form sweep
decides which classes deserve any money at all -- those become the
sample's candidate labels.
"""

import numpy as np

from kellyfe import brute_force_oracle, candidate_labels, log_growth

prior = np.array([0.6, 0.3, 0.1])       # win probabilities
posterior = np.array([0.2, 0.3, 0.5])   # market belief (softmax output)

# The ratios q = prior/posterior say how mispriced each outcome is.
print("q = prior/posterior:", prior / posterior)

solution = candidate_labels(prior, posterior)
print("candidates:", sorted(solution.candidates))
print("fractions: ", solution.fractions)
print("unspent:   ", solution.unspent)
print("log-growth:", solution.log_growth)

# The sweep admitted classes 0 and 1: both are underpriced (q > 1), while
# class 2 is overpriced (q = 0.2) and keeps its fraction at zero.  The
# unspent 0.2 of the bankroll equals the non-candidate mass ratio.

# Don't trust the closed form -- check it against an exhaustive grid.
grid_fractions, grid_value = brute_force_oracle(prior, posterior, grid_step=0.005)
print("\ngrid maximizer:", grid_fractions, "value", grid_value)
print("closed-form value is within", abs(solution.log_growth - grid_value), "of the grid")

# Nearby allocations are strictly worse:
for bump in ([0.05, 0.0, 0.0], [0.0, 0.0, 0.05], [-0.05, 0.0, 0.0]):
    g = solution.fractions + bump
    print("shifted", g, "->", log_growth(g, prior, posterior))

# When prior == posterior there is no edge; nothing is bet and the sample
# falls back to its reference label.
flat = candidate_labels([1 / 3] * 3, [1 / 3] * 3, reference_label=2)
print("\nno-edge fallback:", sorted(flat.candidates), flat.fractions, flat.unspent)
