"""
12-lead ECG records, labels and QRS annotations.

The canonical on-disk record is a pair of files sharing a stem:

``<id>.json``
    header with ``record_id``, ``sampling_hz``, ``n_samples``, ``gain``
    (integer units per millivolt), ``lead_names`` (12 names) and an
    optional ``label``.
``<id>.raw``
    ``12 * n_samples`` little-endian int16 values, lead-major (all of
    lead I, then all of lead II, ...).

Other sources (WFDB, MATLAB containers) are converted to this layout
outside the package; :func:`import_csv` covers the plain-text case.
"""

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, DomainError, FormatError, TruncationError

N_LEADS = 12
DEFAULT_GAIN = 1000.0
INT16_MIN, INT16_MAX = -32768, 32767


class LeadId(enum.IntEnum):
    I = 0  # noqa: E741
    II = 1
    III = 2
    aVR = 3
    aVL = 4
    aVF = 5
    V1 = 6
    V2 = 7
    V3 = 8
    V4 = 9
    V5 = 10
    V6 = 11

    @classmethod
    def parse(cls, value):
        """Accept a LeadId, an index 0..11 or a lead name (case-insensitive)."""
        if isinstance(value, LeadId):
            return value
        if isinstance(value, (int, np.integer)):
            if 0 <= int(value) < N_LEADS:
                return cls(int(value))
            raise DomainError(f"lead index {value} outside 0..11")
        text = str(value).strip()
        for lead in cls:
            if lead.name.lower() == text.lower():
                return lead
        raise FormatError(f"unknown lead name {value!r}")


LEAD_NAMES = tuple(lead.name for lead in LeadId)


class ArrhythmiaClass(enum.Enum):
    AF = "AF"
    IAVB = "IAVB"
    SB = "SB"
    SNR = "SNR"
    STach = "STach"

    @property
    def index(self):
        return _CLASS_ORDER.index(self)

    @classmethod
    def parse(cls, value):
        """Parse a class code; ``NSR`` is accepted as an alias of ``SNR``."""
        if isinstance(value, ArrhythmiaClass):
            return value
        if isinstance(value, (int, np.integer)):
            if 0 <= int(value) < len(_CLASS_ORDER):
                return _CLASS_ORDER[int(value)]
            raise DomainError(f"class index {value} outside 0..4")
        text = str(value).strip().lower()
        if text == "nsr":
            return cls.SNR
        for member in cls:
            if member.value.lower() == text:
                return member
        raise FormatError(f"unknown arrhythmia class {value!r}")

    def __str__(self):
        return self.value


_CLASS_ORDER = tuple(ArrhythmiaClass)
CLASSES = _CLASS_ORDER
N_CLASSES = len(CLASSES)


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EcgRecord:
    """One labelled 12-lead recording, samples in millivolts.

    ``leads`` has shape ``(12, n_samples)`` in :class:`LeadId` order and is
    read-only. ``gain`` is only used when the record is written to disk.
    """

    record_id: str
    sampling_hz: float
    leads: np.ndarray
    label: Optional[ArrhythmiaClass] = None
    gain: float = DEFAULT_GAIN

    def __post_init__(self):
        leads = np.asarray(self.leads)
        if leads.ndim != 2 or leads.shape[0] != N_LEADS:
            raise FormatError(
                f"record {self.record_id!r}: expected 12 leads, got shape {leads.shape}")
        if leads.shape[1] < 2:
            raise DomainError(f"record {self.record_id!r}: need at least 2 samples per lead")
        if not (self.sampling_hz > 0 and math.isfinite(self.sampling_hz)):
            raise DomainError(f"record {self.record_id!r}: sampling_hz must be positive")
        if not (self.gain > 0 and math.isfinite(self.gain)):
            raise DomainError(f"record {self.record_id!r}: gain must be positive")
        if not np.all(np.isfinite(leads)):
            raise DataError(f"record {self.record_id!r}: non-finite samples")
        object.__setattr__(self, "leads", _frozen(leads))
        object.__setattr__(self, "sampling_hz", float(self.sampling_hz))
        if self.label is not None:
            object.__setattr__(self, "label", ArrhythmiaClass.parse(self.label))

    @property
    def n_samples(self):
        return self.leads.shape[1]

    @property
    def duration_s(self):
        return self.n_samples / self.sampling_hz

    def lead(self, lead):
        return self.leads[LeadId.parse(lead)]


@dataclass(frozen=True, eq=False)
class QrsAnnotation:
    """R, Q and S sample indices detected on one lead."""

    lead: LeadId
    r_peaks: np.ndarray
    q_peaks: np.ndarray
    s_peaks: np.ndarray
    n_samples: int

    def __post_init__(self):
        arrays = []
        for name in ("r_peaks", "q_peaks", "s_peaks"):
            a = np.array(getattr(self, name), dtype=np.int64).reshape(-1)
            a.setflags(write=False)
            arrays.append(a)
            object.__setattr__(self, name, a)
        r, q, s = arrays
        if not (len(r) == len(q) == len(s)):
            raise DomainError("r/q/s peak lists differ in length")
        if len(r):
            if np.any(np.diff(r) <= 0):
                raise DomainError("r_peaks must be strictly increasing")
            if np.any(q >= r) or np.any(s <= r):
                raise DomainError("require q < r < s for every beat")
            if q.min() < 0 or s.max() >= self.n_samples:
                raise DomainError("peak index outside the record")
        object.__setattr__(self, "lead", LeadId.parse(self.lead))

    def __len__(self):
        return len(self.r_peaks)

    def to_dict(self):
        return {
            "lead": self.lead.name,
            "r_peaks": self.r_peaks.tolist(),
            "q_peaks": self.q_peaks.tolist(),
            "s_peaks": self.s_peaks.tolist(),
        }


def _record_paths(path):
    path = Path(path)
    if path.suffix in (".json", ".raw"):
        path = path.with_suffix("")
    return path.with_name(path.name + ".json"), path.with_name(path.name + ".raw")


def read_record(path):
    """Read a native-format record; ``path`` may name the stem, .json or .raw."""
    header_path, raw_path = _record_paths(path)
    try:
        header = json.loads(header_path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{header_path}: malformed header ({exc})") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{header_path}: header must be a JSON object")

    missing = {"record_id", "sampling_hz", "n_samples", "gain", "lead_names"} - header.keys()
    if missing:
        raise FormatError(f"{header_path}: missing header fields {sorted(missing)}")
    names = header["lead_names"]
    if not isinstance(names, list) or len(names) != N_LEADS:
        raise FormatError(f"{header_path}: expected 12 lead names, got {names!r}")
    try:
        order = [LeadId.parse(n) for n in names]
    except FormatError as exc:
        raise FormatError(f"{header_path}: {exc}") from exc
    if len(set(order)) != N_LEADS:
        raise FormatError(f"{header_path}: duplicate lead names {names!r}")
    n_samples = header["n_samples"]
    if not isinstance(n_samples, int) or n_samples < 2:
        raise FormatError(f"{header_path}: n_samples must be an integer >= 2")
    try:
        sampling_hz = float(header["sampling_hz"])
        gain = float(header["gain"])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{header_path}: bad numeric field ({exc})") from exc

    payload = raw_path.read_bytes()
    expected = N_LEADS * n_samples
    if len(payload) != 2 * expected:
        raise TruncationError(
            f"{raw_path}: expected {expected} int16 values, found {len(payload) / 2:g}")
    counts = np.frombuffer(payload, dtype="<i2").reshape(N_LEADS, n_samples)
    leads = np.empty((N_LEADS, n_samples))
    for row, lead in enumerate(order):
        leads[lead] = counts[row] / gain

    label = header.get("label")
    return EcgRecord(
        record_id=str(header["record_id"]),
        sampling_hz=sampling_hz,
        leads=leads,
        label=None if label is None else ArrhythmiaClass.parse(label),
        gain=gain,
    )


def quantize(leads, gain):
    """Millivolts to int16 counts, round-half-even; raises if out of range."""
    leads = np.asarray(leads, dtype=np.float64)
    if not np.all(np.isfinite(leads)):
        raise DataError("cannot quantize non-finite samples")
    counts = np.rint(leads * gain)
    if counts.size and (counts.min() < INT16_MIN or counts.max() > INT16_MAX):
        raise DataError(f"samples exceed the int16 range at gain {gain:g}")
    return counts.astype("<i2")


def write_record(record, path):
    """Write ``record`` as ``<path>.json`` + ``<path>.raw``."""
    if not np.all(np.isfinite(record.leads)):
        raise DataError(f"record {record.record_id!r}: non-finite samples")
    header_path, raw_path = _record_paths(path)
    counts = quantize(record.leads, record.gain)
    header = {
        "record_id": record.record_id,
        "sampling_hz": record.sampling_hz,
        "n_samples": record.n_samples,
        "gain": record.gain,
        "lead_names": list(LEAD_NAMES),
    }
    if record.label is not None:
        header["label"] = record.label.value
    raw_path.write_bytes(counts.tobytes())
    header_path.write_text(json.dumps(header, indent=2) + "\n")
    return header_path


def import_csv(path, sampling_hz, label=None, record_id=None):
    """Import a CSV with one column per lead (header row of lead names), values in mV."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    try:
        leads = [LeadId.parse(h) for h in header]
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if len(set(leads)) != len(leads):
        raise FormatError(f"{path}: duplicate lead columns")
    absent = [l.name for l in LeadId if l not in leads]
    if absent:
        raise FormatError(f"{path}: missing lead columns {absent}")
    body = rows[1:]
    if len(body) < 2:
        raise FormatError(f"{path}: need at least 2 data rows")

    data = np.empty((N_LEADS, len(body)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}:{i}: expected {len(header)} cells, got {len(row)}")
        for lead, cell in zip(leads, row):
            try:
                data[lead, i - 2] = float(cell)
            except ValueError:
                raise DataError(f"{path}:{i}: non-numeric cell {cell!r}") from None
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite samples")
    return EcgRecord(
        record_id=record_id or path.stem,
        sampling_hz=sampling_hz,
        leads=data,
        label=None if label is None else ArrhythmiaClass.parse(label),
    )
