"""
Glue between manifests, record files and the classifiers.

Signal models see each record truncated or zero-padded to a fixed length
(default 5000 samples, 10 s at 500 Hz) after per-lead z-scoring. Image
models see the rasterised record with ink = 1 and background = 0. When QRS
features are requested, the lead II rhythm summary is standardised with
statistics from the training records and stored in the checkpoint.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, EcgError
from .metrics import evaluate, evaluate_folds
from .nn import ArchSpec, Dataset, TrainConfig, build, one_hot, predict, train
from .qrs import QrsFeatures, detect_qrs, qrs_features
from .raster import RasterConfig, rasterize
from .records import LeadId, read_record

log = logging.getLogger(__name__)

DEFAULT_LENGTH = 5000


class MissingRecordError(EcgError, LookupError):
    """A manifest names a record that is not present in the data directory."""


class RecordStore:
    """Lazy, cached access to native records below a directory."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self._index = None
        self._cache = {}

    def _build_index(self):
        index = {}
        for header in sorted(self.data_dir.rglob("*.json")):
            if header.with_suffix(".raw").exists():
                index.setdefault(header.stem, header)
        return index

    def path(self, record_id):
        if self._index is None:
            self._index = self._build_index()
        try:
            return self._index[record_id]
        except KeyError:
            raise MissingRecordError(
                f"record {record_id!r} not found under {self.data_dir}") from None

    def get(self, record_id):
        rec = self._cache.get(record_id)
        if rec is None:
            rec = self._cache[record_id] = read_record(self.path(record_id))
        return rec

    def many(self, ids):
        return [self.get(i) for i in ids]


def fit_length(leads, length):
    """Per-lead z-score, then truncate or zero-pad on the right to ``length``."""
    leads = np.asarray(leads, dtype=np.float64)
    mean = leads.mean(axis=1, keepdims=True)
    std = leads.std(axis=1, keepdims=True)
    z = (leads - mean) / np.where(std > 0, std, 1.0)
    out = np.zeros((leads.shape[0], length))
    n = min(length, leads.shape[1])
    out[:, :n] = z[:, :n]
    return out


def signal_inputs(records, length=DEFAULT_LENGTH):
    return np.stack([fit_length(r.leads, length) for r in records])


def image_inputs(records, cfg=None):
    cfg = cfg or RasterConfig()
    return np.stack([
        1.0 - rasterize(r, cfg).pixels[None, :, :].astype(np.float64) / 255.0
        for r in records
    ])


def raw_qrs_features(records, lead=LeadId.II):
    return np.stack([
        qrs_features(detect_qrs(r, lead), r.sampling_hz).as_array() for r in records
    ])


@dataclass
class Preprocessing:
    """Everything needed to turn records into network inputs again."""

    kind: str = "signal"
    length: int = DEFAULT_LENGTH
    raster: dict = field(default_factory=dict)
    aux_mean: Optional[list] = None
    aux_std: Optional[list] = None

    @property
    def with_qrs(self):
        return self.aux_mean is not None

    def fit_aux(self, raw):
        mean = raw.mean(axis=0)
        std = raw.std(axis=0)
        self.aux_mean = mean.tolist()
        self.aux_std = np.where(std > 0, std, 1.0).tolist()

    def inputs(self, records):
        if self.kind == "image":
            x = image_inputs(records, RasterConfig(**self.raster))
        else:
            x = signal_inputs(records, self.length)
        aux = None
        if self.with_qrs:
            aux = (raw_qrs_features(records) - np.asarray(self.aux_mean)) / np.asarray(
                self.aux_std)
        return x, aux

    def to_dict(self):
        return {"kind": self.kind, "length": self.length, "raster": self.raster,
                "aux_mean": self.aux_mean, "aux_std": self.aux_std}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def make_dataset(records, prep):
    if any(r.label is None for r in records):
        missing = [r.record_id for r in records if r.label is None]
        raise DomainError(f"unlabelled records: {missing[:5]}")
    x, aux = prep.inputs(records)
    y = one_hot([r.label.index for r in records])
    return Dataset(x, y, aux)


def fit(arch_kind, train_records, val_records, cfg, with_qrs=False, length=DEFAULT_LENGTH,
        arch_overrides=None):
    """Build and train one model; returns (state, history, preprocessing)."""
    overrides = dict(arch_overrides or {})
    prep = Preprocessing(kind="image" if arch_kind == "cnn2d" else "signal", length=length)
    if with_qrs:
        prep.fit_aux(raw_qrs_features(train_records))
        overrides["n_aux"] = len(QrsFeatures.names)
    arch = ArchSpec(arch_kind, **overrides)
    train_data = make_dataset(train_records, prep)
    val_data = make_dataset(val_records, prep)
    state = build(arch, cfg.seed)
    state, history = train(state, train_data, val_data, cfg)
    state.meta["preprocessing"] = prep.to_dict()
    return state, history, prep


def predict_records(state, records):
    prep = Preprocessing.from_dict(state.meta.get("preprocessing", {}))
    x, aux = prep.inputs(records)
    return predict(state, x, aux)


def evaluate_records(state, records):
    labels, probs = predict_records(state, records)
    return evaluate([r.label for r in records], labels.tolist()), labels, probs


def cross_validate(manifest, arch_kind, cfg=None, data_dir=".", with_qrs=False,
                   length=DEFAULT_LENGTH, arch_overrides=None, jobs=1):
    """k-fold cross-validation over the manifest's train/val folds.

    Returns (per-fold reports, aggregate mean/std).
    """
    cfg = cfg or TrainConfig()
    store = RecordStore(data_dir)

    def fit_predict(train_ids, val_ids):
        tr, va = store.many(train_ids), store.many(val_ids)
        state, _, _ = fit(arch_kind, tr, va, cfg, with_qrs, length, arch_overrides)
        labels, _ = predict_records(state, va)
        return labels.tolist()

    return evaluate_folds(manifest, fit_predict, jobs=jobs)
