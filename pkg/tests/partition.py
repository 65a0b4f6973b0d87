"""Partition invariants shared by the dataset and acceptance tests."""

from collections import Counter

import numpy as np

from ecgpipe.dataset import TEST, TRAIN_VAL, ManifestEntry, SplitSpec, class_counts, exclude_noisy
from ecgpipe.records import CLASSES, ArrhythmiaClass


def make_entries(counts, prefix=""):
    out = []
    for name, n in counts.items():
        cls = ArrhythmiaClass.parse(name)
        out.extend(ManifestEntry(f"{prefix}{name}_{i:05d}", cls) for i in range(n))
    return out


def random_manifest(rng):
    """Random class profile, exclusions and split settings drawn from ``rng``."""
    counts = {c.value: int(rng.integers(22, 61)) for c in CLASSES}
    entries = make_entries(counts, prefix=str(rng.choice(["", "x-", "rec/"])))
    n_ex = int(rng.integers(0, 6))
    ids = [entries[i].record_id for i in rng.permutation(len(entries))[:n_ex]]
    entries = exclude_noisy(entries, ids)
    spec = SplitSpec(float(rng.choice([0.1, 0.2, 0.25, 0.3])), int(rng.integers(2, 11)),
                     int(rng.integers(0, 2**63)))
    return entries, spec


def check_partition(entries, out, spec):
    active = [e for e in out if not e.excluded]
    # balancing may drop records but never invents or duplicates one
    ids = [e.record_id for e in out]
    assert len(set(ids)) == len(ids) and set(ids) <= {e.record_id for e in entries}
    test = {e.record_id for e in active if e.split == TEST}
    tv = {e.record_id for e in active if e.split == TRAIN_VAL}
    assert not test & tv
    assert test | tv == {e.record_id for e in active}
    folds = {}
    for e in active:
        if e.split == TRAIN_VAL:
            assert 0 <= e.fold < spec.n_folds
            folds.setdefault(e.fold, set()).add(e.record_id)
        else:
            assert e.fold is None
    assert set().union(*folds.values()) == tv
    assert sum(len(f) for f in folds.values()) == len(tv)
    counts = class_counts(out)
    assert max(counts.values()) == min(counts.values())
    per_class_test = [sum(1 for e in active if e.label is c and e.split == TEST)
                      for c in CLASSES]
    assert max(per_class_test) - min(per_class_test) <= 1
    for c in CLASSES:
        sizes = Counter(e.fold for e in active if e.label is c and e.split == TRAIN_VAL)
        per_fold = [sizes.get(k, 0) for k in range(spec.n_folds)]
        assert max(per_fold) - min(per_fold) <= 1
    assert np.all([e.fold is None for e in out if e.excluded])
