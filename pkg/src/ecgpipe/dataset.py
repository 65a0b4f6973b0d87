"""
Balanced dataset manifests with a stratified test split and k folds.

Randomness comes from numpy's PCG64 generator seeded with
``(seed, class index, stage)``, so a manifest is a pure function of its
entries, seed and split settings. Within a class, entries are first sorted
by ``record_id`` so the input order never matters.
"""

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, FormatError
from .records import CLASSES, ArrhythmiaClass

log = logging.getLogger(__name__)

TRAIN_VAL, TEST = "train_val", "test"
_BALANCE_STAGE, _SPLIT_STAGE = 0, 1


@dataclass(frozen=True)
class ManifestEntry:
    record_id: str
    label: ArrhythmiaClass
    source_corpus: str = "default"
    excluded: bool = False
    split: Optional[str] = None
    fold: Optional[int] = None

    def to_dict(self):
        d = asdict(self)
        d["label"] = self.label.value
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            record_id=str(d["record_id"]),
            label=ArrhythmiaClass.parse(d["label"]),
            source_corpus=str(d.get("source_corpus", "default")),
            excluded=bool(d.get("excluded", False)),
            split=d.get("split"),
            fold=d.get("fold"),
        )


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.20
    n_folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DomainError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if self.n_folds < 2:
            raise DomainError(f"n_folds must be >= 2, got {self.n_folds}")


def _rng(seed, cls, stage):
    return np.random.Generator(np.random.PCG64([int(seed) & (2**64 - 1), cls.index, stage]))


def _by_class(entries):
    groups = {c: [] for c in CLASSES}
    for e in entries:
        if not e.excluded:
            groups[e.label].append(e)
    for c in groups:
        groups[c].sort(key=lambda e: e.record_id)
    return groups


def class_counts(entries, include_excluded=False):
    counts = Counter(e.label for e in entries if include_excluded or not e.excluded)
    return {c.value: counts.get(c, 0) for c in CLASSES}


def _check_unique(entries):
    dup = [rid for rid, n in Counter(e.record_id for e in entries).items() if n > 1]
    if dup:
        raise DomainError(f"duplicate record ids: {sorted(dup)[:10]}")


def balance(entries, seed):
    """Keep the same number of active records per class, discarding the surplus.

    Surplus records are chosen by a seeded shuffle within each class.
    Excluded entries pass through untouched.
    """
    entries = list(entries)
    _check_unique(entries)
    groups = _by_class(entries)
    empty = [c.value for c, g in groups.items() if not g]
    if empty:
        raise DomainError(f"no usable records for class(es): {', '.join(empty)}")
    m = min(len(g) for g in groups.values())
    keep = set()
    for c, group in groups.items():
        order = _rng(seed, c, _BALANCE_STAGE).permutation(len(group))
        keep.update(group[i].record_id for i in order[:m])
    return [e for e in entries if e.excluded or e.record_id in keep]


def split(entries, spec):
    """Stratified test split followed by per-class round-robin fold dealing.

    The test set holds ``round(test_fraction * N)`` records (half to even),
    spread so per-class test counts differ by at most one; the extra ones
    go to the classes earliest in class order. Train/validation records of
    each class, in shuffled order, are dealt to folds with a single counter
    that carries over between classes, so every fold size differs by at
    most one both per class and overall.
    """
    entries = list(entries)
    _check_unique(entries)
    groups = _by_class(entries)
    sizes = {len(g) for g in groups.values()}
    if len(sizes) != 1:
        raise DomainError(f"entries are not balanced: {class_counts(entries)}")
    m = sizes.pop()
    n_total = m * len(CLASSES)
    n_test = round(spec.test_fraction * n_total)
    base, extra = divmod(n_test, len(CLASSES))

    assigned = {}
    counter = 0
    for c, group in groups.items():
        n_test_c = base + (1 if c.index < extra else 0)
        if m - n_test_c < spec.n_folds:
            raise DomainError(
                f"class {c.value}: {m - n_test_c} train/val records cannot fill "
                f"{spec.n_folds} folds")
        order = _rng(spec.seed, c, _SPLIT_STAGE).permutation(m)
        for rank, i in enumerate(order):
            rid = group[i].record_id
            if rank < n_test_c:
                assigned[rid] = (TEST, None)
            else:
                assigned[rid] = (TRAIN_VAL, counter % spec.n_folds)
                counter += 1

    out = []
    for e in entries:
        if e.excluded:
            out.append(replace(e, split=None, fold=None))
        else:
            s, f = assigned[e.record_id]
            out.append(replace(e, split=s, fold=f))
    return out


def exclude_noisy(entries, record_ids):
    """Mark the listed records as excluded (idempotent)."""
    entries = list(entries)
    ids = set(record_ids)
    unknown = ids - {e.record_id for e in entries}
    if unknown:
        raise DomainError(f"unknown record ids: {', '.join(sorted(unknown))}")
    return [replace(e, excluded=True, split=None, fold=None) if e.record_id in ids else e
            for e in entries]


def read_id_list(path):
    """Record ids from a text file, one per line; blank lines and ``#`` comments skipped."""
    ids = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            ids.append(line)
    return ids


@dataclass
class DatasetManifest:
    entries: list
    seed: int = 0
    counts_before: dict = field(default_factory=dict)
    counts_after: dict = field(default_factory=dict)
    split_spec: Optional[SplitSpec] = None

    @property
    def active(self):
        return [e for e in self.entries if not e.excluded]

    def ids(self, split=None, folds=None, exclude_folds=None):
        out = []
        for e in self.active:
            if split is not None and e.split != split:
                continue
            if folds is not None and e.fold not in folds:
                continue
            if exclude_folds is not None and e.fold in exclude_folds:
                continue
            out.append(e.record_id)
        return out

    def labels(self):
        return {e.record_id: e.label for e in self.entries}

    @property
    def n_folds(self):
        folds = {e.fold for e in self.active if e.fold is not None}
        return max(folds) + 1 if folds else 0

    def balanced(self, seed=None):
        seed = self.seed if seed is None else seed
        before = class_counts(self.entries)
        kept = balance(self.entries, seed)
        return DatasetManifest(kept, seed, before, class_counts(kept), None)

    def split(self, spec):
        return DatasetManifest(split(self.entries, spec), self.seed, dict(self.counts_before),
                               dict(self.counts_after), spec)

    def exclude(self, record_ids):
        return DatasetManifest(exclude_noisy(self.entries, record_ids), self.seed,
                               dict(self.counts_before), dict(self.counts_after),
                               self.split_spec)

    def to_dict(self):
        return {
            "seed": self.seed,
            "counts": {"before": self.counts_before, "after": self.counts_after},
            "split_spec": None if self.split_spec is None else asdict(self.split_spec),
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            spec = d.get("split_spec")
            return cls(
                entries=[ManifestEntry.from_dict(e) for e in d["entries"]],
                seed=int(d.get("seed", 0)),
                counts_before=dict(d.get("counts", {}).get("before", {})),
                counts_after=dict(d.get("counts", {}).get("after", {})),
                split_spec=None if spec is None else SplitSpec(**spec),
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed manifest: {exc}") from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed manifest JSON ({exc})") from exc


def build_manifest(data_dir, seed=0):
    """Inventory every labelled native record below ``data_dir``.

    The first directory component under ``data_dir`` names the source
    corpus; records directly inside it get ``"default"``.
    """
    data_dir = Path(data_dir)
    entries = []
    for header in sorted(data_dir.rglob("*.json")):
        try:
            meta = json.loads(header.read_text())
        except json.JSONDecodeError:
            log.warning("skipping %s: not JSON", header)
            continue
        if not isinstance(meta, dict) or "record_id" not in meta or "lead_names" not in meta:
            continue
        if meta.get("label") is None:
            log.warning("skipping unlabelled record %s", meta["record_id"])
            continue
        rel = header.relative_to(data_dir)
        corpus = rel.parts[0] if len(rel.parts) > 1 else "default"
        entries.append(ManifestEntry(str(meta["record_id"]),
                                     ArrhythmiaClass.parse(meta["label"]), corpus))
    _check_unique(entries)
    counts = class_counts(entries)
    return DatasetManifest(entries, seed, counts, counts, None)


def check_manifest(manifest):
    """Raise DomainError if partition/stratification invariants are broken."""
    active = manifest.active
    for e in active:
        if e.split not in (TRAIN_VAL, TEST):
            raise DomainError(f"{e.record_id}: no split assigned")
        if (e.split == TRAIN_VAL) != (e.fold is not None):
            raise DomainError(f"{e.record_id}: fold inconsistent with split")
    counts = class_counts(active)
    if len(set(counts.values())) != 1:
        raise DomainError(f"unbalanced classes: {counts}")
    k = manifest.n_folds
    for c in CLASSES:
        sizes = Counter(e.fold for e in active if e.label is c and e.split == TRAIN_VAL)
        per_fold = [sizes.get(f, 0) for f in range(k)]
        if per_fold and max(per_fold) - min(per_fold) > 1:
            raise DomainError(f"class {c.value}: fold sizes {per_fold} differ by more than 1")
    tests = [sum(1 for e in active if e.label is c and e.split == TEST) for c in CLASSES]
    if max(tests) - min(tests) > 1:
        raise DomainError(f"per-class test counts {tests} differ by more than 1")
