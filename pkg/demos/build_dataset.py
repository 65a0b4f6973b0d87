"""Balance and split a class profile shaped like the five-corpus merge.

    python demos/build_dataset.py
"""

from collections import Counter

from ecgpipe.dataset import TEST, TRAIN_VAL, ManifestEntry, SplitSpec, balance, class_counts, split
from ecgpipe.records import ArrhythmiaClass

profile = {"AF": 2000, "IAVB": 1700, "SB": 1800, "SNR": 1672, "STach": 1900}
entries = [ManifestEntry(f"{name}_{i:05d}", ArrhythmiaClass.parse(name))
           for name, n in profile.items() for i in range(n)]

kept = balance(entries, seed=7)
print("after balancing:", class_counts(kept), "total", len(kept))

out = split(kept, SplitSpec(test_fraction=0.2, n_folds=10, seed=7))
test = [e for e in out if e.split == TEST]
folds = Counter(e.fold for e in out if e.split == TRAIN_VAL)
print("test:", len(test), dict(Counter(e.label.value for e in test)))
print("fold sizes:", [folds[k] for k in range(10)])
