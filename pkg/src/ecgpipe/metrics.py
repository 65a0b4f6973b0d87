"""
Confusion matrices and classification metrics.

Ratios are computed exactly with :class:`fractions.Fraction` and converted
to float once, so every reported value is the correctly rounded rational.
Any 0/0 is reported as 0 and flagged in ``MetricsReport.degenerate``.
"""

import json
import statistics
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError
from .records import CLASSES, N_CLASSES, ArrhythmiaClass

CLASS_NAMES = tuple(c.value for c in CLASSES)


def _index(label, n_classes):
    if isinstance(label, ArrhythmiaClass):
        return label.index
    if isinstance(label, (int, np.integer)):
        if 0 <= int(label) < n_classes:
            return int(label)
        raise DomainError(f"class index {label} outside 0..{n_classes - 1}")
    return ArrhythmiaClass.parse(label).index


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    class_names: tuple = CLASS_NAMES

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def n_classes(self):
        return self.counts.shape[0]

    def to_dict(self):
        return {"class_names": list(self.class_names), "counts": self.counts.tolist()}


def confusion(true_labels, predicted_labels, n_classes=N_CLASSES, class_names=None):
    true_labels, predicted_labels = list(true_labels), list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise DomainError(
            f"label lists differ in length ({len(true_labels)} vs {len(predicted_labels)})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        counts[_index(t, n_classes), _index(p, n_classes)] += 1
    if class_names is None:
        class_names = CLASS_NAMES if n_classes == N_CLASSES else tuple(
            str(i) for i in range(n_classes))
    return ConfusionMatrix(counts, tuple(class_names))


def _ratio(num, den):
    return (Fraction(0), True) if den == 0 else (Fraction(int(num), int(den)), False)


@dataclass
class MetricsReport:
    accuracy: float
    precision: tuple
    recall: tuple
    f1: tuple
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_f1: float
    support: tuple
    confusion: ConfusionMatrix
    degenerate: dict = field(default_factory=dict)

    @property
    def class_names(self):
        return self.confusion.class_names

    def to_dict(self):
        per_class = {
            name: {"precision": p, "recall": r, "f1": f, "support": s}
            for name, p, r, f, s in zip(self.class_names, self.precision, self.recall,
                                        self.f1, self.support)
        }
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "per_class": per_class,
            "confusion": self.confusion.to_dict(),
            "degenerate": self.degenerate,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def metrics(cm):
    """Accuracy and per-class/macro/micro precision, recall and F1 of ``cm``.

    An empty matrix yields all zeros with ``degenerate["empty"]`` set.
    """
    counts = np.asarray(cm.counts, dtype=np.int64)
    k = counts.shape[0]
    total = int(counts.sum())
    trace = int(np.trace(counts))
    degenerate = {}
    if total == 0:
        degenerate["empty"] = True
    accuracy, _ = _ratio(trace, total)

    precision, recall, f1 = [], [], []
    for c in range(k):
        tp = int(counts[c, c])
        col, row = int(counts[:, c].sum()), int(counts[c, :].sum())
        p, p_deg = _ratio(tp, col)
        r, r_deg = _ratio(tp, row)
        # equals 2PR/(P+R) whenever that is defined
        f, f_deg = _ratio(2 * tp, col + row)
        flags = [name for name, bad in (("precision", p_deg), ("recall", r_deg), ("f1", f_deg))
                 if bad]
        if flags:
            degenerate[cm.class_names[c]] = flags
        precision.append(p)
        recall.append(r)
        f1.append(f)

    micro_f1 = accuracy  # single-label multiclass: micro P = micro R = accuracy
    return MetricsReport(
        accuracy=float(accuracy),
        precision=tuple(float(v) for v in precision),
        recall=tuple(float(v) for v in recall),
        f1=tuple(float(v) for v in f1),
        macro_precision=float(sum(precision) / k),
        macro_recall=float(sum(recall) / k),
        macro_f1=float(sum(f1) / k),
        micro_f1=float(micro_f1),
        support=tuple(int(v) for v in counts.sum(axis=1)),
        confusion=cm,
        degenerate=degenerate,
    )


def evaluate(true_labels, predicted_labels, n_classes=N_CLASSES):
    return metrics(confusion(true_labels, predicted_labels, n_classes))


_AGG_KEYS = ("accuracy", "macro_precision", "macro_recall", "macro_f1", "micro_f1")


def aggregate(reports):
    """Mean and sample standard deviation of the headline metrics across folds."""
    out = {}
    for key in _AGG_KEYS:
        values = [getattr(r, key) for r in reports]
        out[key] = {
            "mean": statistics.fmean(values),
            "std": statistics.stdev(values) if len(values) > 1 else 0.0,
        }
    return out


def evaluate_folds(manifest, fit_predict, jobs=1):
    """Run ``fit_predict(train_ids, val_ids) -> predicted labels`` per fold.

    Fold k validates on fold k and trains on every other train/val fold;
    the test split is never touched. Results come back in fold order
    whatever ``jobs`` is.
    """
    labels = manifest.labels()
    n_folds = manifest.n_folds
    if n_folds < 2:
        raise DomainError("manifest has no fold assignment; run split first")

    def run(k):
        train_ids = manifest.ids(split="train_val", exclude_folds={k})
        val_ids = manifest.ids(split="train_val", folds={k})
        predicted = fit_predict(train_ids, val_ids)
        return evaluate([labels[i] for i in val_ids], predicted)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run, range(n_folds)))
    else:
        reports = [run(k) for k in range(n_folds)]
    return reports, aggregate(reports)


def format_table(rows):
    """Aligned text table of (system, accuracy, f1) rows, accuracy in percent."""
    header = ("System", "Accuracy", "F1 score")
    body = [(name, f"{100 * acc:.2f}%", f"{f1:.4f}") for name, acc, f1 in rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(3)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines)


def format_confusion(cm):
    names = list(cm.class_names)
    w = max(max(len(n) for n in names), len(str(int(cm.counts.max(initial=0)))), 4)
    lines = [" " * (w + 2) + " ".join(n.rjust(w) for n in names)]
    for name, row in zip(names, cm.counts):
        lines.append(name.rjust(w) + "  " + " ".join(str(int(v)).rjust(w) for v in row))
    return "\n".join(lines)


def cross_validate(manifest, arch, cfg=None, data_dir=".", **kwargs):
    """Train and score one model per fold; see :func:`ecgpipe.pipeline.cross_validate`."""
    from .pipeline import cross_validate as _cross_validate
    return _cross_validate(manifest, arch, cfg, data_dir, **kwargs)
