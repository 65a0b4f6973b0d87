"""Confusion matrix, per-class scores and a results table.

    python demos/score_predictions.py
"""

import numpy as np

from ecgpipe.metrics import evaluate, format_confusion, format_table
from ecgpipe.records import CLASSES

rng = np.random.default_rng(0)
truth = rng.integers(0, 5, 500)
# a classifier that is right 90% of the time and otherwise guesses
pred = np.where(rng.random(500) < 0.9, truth, rng.integers(0, 5, 500))

r = evaluate(truth, pred)
print(format_confusion(r.confusion))
print()
for c, p, rc, f in zip(CLASSES, r.precision, r.recall, r.f1):
    print(f"{c.value:6s} P {p:.3f}  R {rc:.3f}  F1 {f:.3f}")
print()
print(format_table([("toy", r.accuracy, r.macro_f1)]))
