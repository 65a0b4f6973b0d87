"""
QRS complex detection in the Pan-Tompkins style.

Pipeline per lead: Butterworth bandpass (5-15 Hz, order 2, causal) ->
first difference -> square -> moving-window integration -> min-max
normalisation -> candidate peaks -> R refinement on the raw lead ->
Q/S troughs on either side of each R.

The integration window defaults to 5 samples. Classical Pan-Tompkins uses
about 150 ms (75 samples at 500 Hz); pass ``integration_window`` to
switch.
"""

from bisect import bisect_left
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .filters import BandpassSpec, apply_filter, design_bandpass
from .records import LeadId, QrsAnnotation


@dataclass(frozen=True)
class DetectorConfig:
    """Detector parameters. Sample-count windows scale with the sampling rate.

    Use :meth:`for_rate` to get the defaults for a given rate.
    """

    bandpass: BandpassSpec
    peak_min_distance: int
    refine_halfwidth: int
    qs_window: int
    integration_window: int = 5
    peak_min_height: float = 0.5
    peak_min_width: float = 0.5

    def __post_init__(self):
        if self.integration_window < 1:
            raise DomainError("integration_window must be >= 1")
        if not 0.0 <= self.peak_min_height <= 1.0:
            raise DomainError("peak_min_height must lie in [0, 1]")
        for name in ("peak_min_distance", "refine_halfwidth", "qs_window"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")

    @classmethod
    def for_rate(cls, sampling_hz, **overrides):
        fifth = int(sampling_hz // 5)
        defaults = dict(
            bandpass=BandpassSpec(sampling_hz=sampling_hz),
            peak_min_distance=fifth,
            refine_halfwidth=fifth,
            qs_window=int(sampling_hz // 4),
        )
        defaults.update(overrides)
        return cls(**defaults)

    @property
    def sampling_hz(self):
        return self.bandpass.sampling_hz

    def with_window(self, integration_window):
        return replace(self, integration_window=integration_window)


def enhance(signal, cfg):
    """Emphasise QRS energy; returns a sequence of length ``n - 1`` in [0, 1]."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or len(x) < cfg.integration_window + 2:
        raise DomainError(
            f"signal of length {x.size} too short for integration window "
            f"{cfg.integration_window}")
    squared = np.diff(x) ** 2
    integrated = np.convolve(squared, np.ones(cfg.integration_window), mode="same")
    lo, hi = integrated.min(), integrated.max()
    if hi == lo:
        return np.zeros_like(integrated)
    return (integrated - lo) / (hi - lo)


def local_maxima(x):
    """Indices of strict local maxima; a flat top reports its leftmost sample.

    The first and last samples are never maxima.
    """
    x = np.asarray(x)
    if len(x) < 3:
        return np.empty(0, dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, x[1:] != x[:-1]])
    vals = x[starts]
    if len(vals) < 3:
        return np.empty(0, dtype=np.int64)
    k = np.flatnonzero((vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])) + 1
    return starts[k].astype(np.int64)


def prominence(x, peak):
    """Prominence of ``peak`` plus its (left, right) bases."""
    h = x[peak]
    higher_left = np.flatnonzero(x[:peak] > h)
    lo = higher_left[-1] + 1 if len(higher_left) else 0
    higher_right = np.flatnonzero(x[peak + 1:] > h)
    hi = peak + 1 + higher_right[0] if len(higher_right) else len(x)

    left = x[lo:peak + 1]
    # nearest minimum to the peak on each side
    left_base = lo + len(left) - 1 - int(np.argmin(left[::-1]))
    right_base = peak + int(np.argmin(x[peak:hi]))
    prom = h - max(x[left_base], x[right_base])
    return prom, left_base, right_base


def width_at_half_prominence(x, peak, prom, left_base, right_base):
    """Interpolated width of ``peak`` at half its prominence."""
    height = x[peak] - 0.5 * prom
    below = np.flatnonzero(x[left_base:peak + 1] <= height)
    i = left_base + below[-1] if len(below) else left_base
    left_ip = float(i)
    if x[i] < height:
        left_ip += (height - x[i]) / (x[i + 1] - x[i])
    below = np.flatnonzero(x[peak:right_base + 1] <= height)
    i = peak + below[0] if len(below) else right_base
    right_ip = float(i)
    if x[i] < height:
        right_ip -= (height - x[i]) / (x[i - 1] - x[i])
    return right_ip - left_ip


def select_by_distance(peaks, heights, min_distance):
    """Greedy tallest-first selection with a minimum spacing.

    A candidate survives iff no already-accepted peak lies closer than
    ``min_distance``; equal heights are visited lowest index first.
    """
    order = np.lexsort((peaks, -heights))
    accepted = []
    for k in order:
        p = int(peaks[k])
        pos = bisect_left(accepted, p)
        if pos > 0 and p - accepted[pos - 1] < min_distance:
            continue
        if pos < len(accepted) and accepted[pos] - p < min_distance:
            continue
        accepted.insert(pos, p)
    return np.asarray(accepted, dtype=np.int64)


def find_peaks(x, cfg=None, *, min_height=None, min_width=None, min_distance=None):
    """Candidate QRS peaks on a normalised sequence, ascending.

    Thresholds come from ``cfg`` unless given explicitly.
    """
    x = np.asarray(x, dtype=np.float64)
    if cfg is not None:
        min_height = cfg.peak_min_height if min_height is None else min_height
        min_width = cfg.peak_min_width if min_width is None else min_width
        min_distance = cfg.peak_min_distance if min_distance is None else min_distance
    min_height = 0.0 if min_height is None else min_height
    min_width = 0.0 if min_width is None else min_width
    min_distance = 1 if min_distance is None else min_distance

    peaks = local_maxima(x)
    peaks = peaks[x[peaks] >= min_height]
    if min_width > 0:
        keep = []
        for p in peaks:
            prom, lb, rb = prominence(x, p)
            if width_at_half_prominence(x, p, prom, lb, rb) >= min_width:
                keep.append(p)
        peaks = np.asarray(keep, dtype=np.int64)
    if len(peaks) == 0:
        return np.empty(0, dtype=np.int64)
    return select_by_distance(peaks, x[peaks], min_distance)


def detect_qrs(record, lead, cfg=None):
    """Detect R, Q and S sample indices on one lead of ``record``."""
    lead = LeadId.parse(lead)
    if cfg is None:
        cfg = DetectorConfig.for_rate(record.sampling_hz)
    elif cfg.sampling_hz != record.sampling_hz:
        raise DomainError(
            f"detector configured for {cfg.sampling_hz} Hz, record is {record.sampling_hz} Hz")
    return detect_signal(record.lead(lead), cfg, lead=lead)


def detect_signal(raw, cfg, lead=LeadId.II):
    raw = np.asarray(raw, dtype=np.float64)
    n = len(raw)
    filtered = apply_filter(design_bandpass(cfg.bandpass), raw)
    candidates = find_peaks(enhance(filtered, cfg), cfg)

    h = cfg.refine_halfwidth
    refined = set()
    for c in candidates:
        lo, hi = max(0, c - h), min(n, c + h + 1)
        refined.add(lo + int(np.argmax(raw[lo:hi])))

    r_peaks, q_peaks, s_peaks = [], [], []
    w = cfg.qs_window
    for r in sorted(refined):
        # beats at the very edge have no room for a trough on one side
        if r == 0 or r == n - 1:
            continue
        lo = max(0, r - w)
        q = lo + int(np.argmin(raw[lo:r]))
        s = r + 1 + int(np.argmin(raw[r + 1:min(n, r + w + 1)]))
        r_peaks.append(r)
        q_peaks.append(q)
        s_peaks.append(s)
    return QrsAnnotation(lead=lead, r_peaks=r_peaks, q_peaks=q_peaks,
                         s_peaks=s_peaks, n_samples=n)


@dataclass(frozen=True)
class QrsFeatures:
    beat_count: int = 0
    mean_rr_s: float = 0.0
    std_rr_s: float = 0.0
    mean_qrs_width_s: float = 0.0
    std_qrs_width_s: float = 0.0
    heart_rate_bpm: float = 0.0

    names = ("beat_count", "mean_rr_s", "std_rr_s",
             "mean_qrs_width_s", "std_qrs_width_s", "heart_rate_bpm")

    def as_array(self):
        return np.array([getattr(self, k) for k in self.names], dtype=np.float64)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.names}


def qrs_features(ann, sampling_hz):
    """Rhythm summary of an annotation; all zeros with fewer than two beats.

    Standard deviations are population (ddof=0) values.
    """
    r = np.asarray(ann.r_peaks)
    if len(r) < 2:
        return QrsFeatures()
    rr = np.diff(r) / sampling_hz
    widths = (np.asarray(ann.s_peaks) - np.asarray(ann.q_peaks)) / sampling_hz
    mean_rr = float(rr.mean())
    return QrsFeatures(
        beat_count=len(r),
        mean_rr_s=mean_rr,
        std_rr_s=float(rr.std()),
        mean_qrs_width_s=float(widths.mean()),
        std_qrs_width_s=float(widths.std()),
        heart_rate_bpm=60.0 / mean_rr,
    )
