"""Training with priors on a 90/9/1 class split.

The expected-free-energy objective consumes per-sample priors (here
synthesized from the true labels with 10% noise, imitating an external
classifier).  Compare its minority-class behaviour with plain cross
entropy, which sees only the reference labels.
"""

import numpy as np

from kellyfe import TrainConfig, evaluate, generate, train
from kellyfe.data import with_synthesized_priors

FREQS = [0.90, 0.09, 0.01]

train_set = with_synthesized_priors(generate(3, 2, 2000, FREQS, 3.0, seed=0), 0.1)
val_set = with_synthesized_priors(generate(3, 2, 1000, FREQS, 3.0, seed=1), 0.1)
print("train class counts:", np.bincount(train_set.true_labels))

for loss, mode in (("efe", "grpr"), ("ce", "grnp")):
    config = TrainConfig(
        loss=loss, mode=mode, hidden_widths=(16,), max_iterations=1500, patience=100, seed=0
    )
    params, history = train(config, train_set, val_set)
    report = evaluate(params, val_set)
    print(f"\n{loss}-{mode}: stopped after {history[-1].iteration} iterations")
    print("  per-class recall:   ", np.round(report.recall, 3))
    print("  per-class precision:", np.round(report.precision, 3))
    print("  macro F1:", round(report.macro_f1, 4))
    if loss == "efe":
        print("  final complexity term:", round(history[-1].expected_complexity_term, 5))

# The minority class (1% of samples, ~20 training rows) is where the two
# objectives can part ways: the prior-driven loss keeps paying attention
# to it even though it barely shows up in the mini-batches.
