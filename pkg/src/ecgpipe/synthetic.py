"""
Synthetic 12-lead records with known ground truth.

Used by the tests, the demo scripts and as a stand-in corpus when the real
data is not available.
"""

import numpy as np

from .records import CLASSES, N_LEADS, ArrhythmiaClass, EcgRecord


def pulse_centers(duration_s, bpm, sampling_hz, first_s=0.5):
    """Sample indices of beats at a fixed rate, starting at ``first_s``."""
    period = 60.0 / bpm
    times = np.arange(first_s, duration_s - 0.25, period)
    return np.rint(times * sampling_hz).astype(np.int64)


def gaussian_pulse_train(n_samples, centers, sampling_hz, sigma_s=0.010, amplitude=1.0):
    """Zero baseline with one Gaussian bump per center."""
    t = np.arange(n_samples)
    out = np.zeros(n_samples)
    sigma = sigma_s * sampling_hz
    half = int(np.ceil(8 * sigma))
    for c in centers:
        lo, hi = max(0, c - half), min(n_samples, c + half + 1)
        out[lo:hi] += amplitude * np.exp(-0.5 * ((t[lo:hi] - c) / sigma) ** 2)
    return out


def pulse_record(bpm=75.0, duration_s=10.0, sampling_hz=500.0, noise_std=0.0,
                 seed=0, record_id="pulses", label=None, lead_scales=None):
    """Record whose 12 leads carry the same Gaussian QRS-like pulse train.

    Each lead is scaled by ``lead_scales`` (default: all ones) and gets its
    own white noise of standard deviation ``noise_std`` mV.

    Returns the record and the true pulse centers.
    """
    n = int(round(duration_s * sampling_hz))
    centers = pulse_centers(duration_s, bpm, sampling_hz)
    base = gaussian_pulse_train(n, centers, sampling_hz)
    scales = np.ones(N_LEADS) if lead_scales is None else np.asarray(lead_scales, float)
    leads = scales[:, None] * base[None, :]
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        leads = leads + rng.normal(0.0, noise_std, size=leads.shape)
    return EcgRecord(record_id, sampling_hz, leads, label=label), centers


def sinusoid_record(frequency_hz, n_samples=256, sampling_hz=100.0, phase=0.0,
                    record_id="sine", label=None, noise_std=0.0, seed=0):
    """Each lead is a sinusoid at ``frequency_hz`` with a lead-dependent phase."""
    t = np.arange(n_samples) / sampling_hz
    offsets = phase + np.arange(N_LEADS) * np.pi / 6
    leads = np.sin(2 * np.pi * frequency_hz * t[None, :] + offsets[:, None])
    if noise_std > 0:
        leads = leads + np.random.default_rng(seed).normal(0, noise_std, leads.shape)
    return EcgRecord(record_id, sampling_hz, leads, label=label)


CLASS_FREQUENCIES_HZ = (1.0, 2.5, 4.0, 6.0, 8.5)


def sinusoid_dataset(per_class=4, n_samples=256, sampling_hz=100.0, seed=0):
    """Five-class toy set; class k is a sinusoid at ``CLASS_FREQUENCIES_HZ[k]``."""
    rng = np.random.default_rng(seed)
    records = []
    for cls, freq in zip(CLASSES, CLASS_FREQUENCIES_HZ):
        for j in range(per_class):
            records.append(sinusoid_record(
                freq, n_samples, sampling_hz, phase=rng.uniform(0, 2 * np.pi),
                record_id=f"{cls.value}_{j:03d}", label=cls))
    return records


RHYTHM_BPM = {
    ArrhythmiaClass.SB: 50.0,
    ArrhythmiaClass.SNR: 75.0,
    ArrhythmiaClass.STach: 120.0,
    ArrhythmiaClass.IAVB: 70.0,
    ArrhythmiaClass.AF: 95.0,
}


def rhythm_record(label, duration_s=10.0, sampling_hz=500.0, seed=0, record_id=None):
    """Crude class-flavoured record: rate per class, irregular RR for AF,
    and a delayed small P-like bump for IAVB. For demos only.
    """
    label = ArrhythmiaClass.parse(label)
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sampling_hz))
    bpm = RHYTHM_BPM[label] * rng.uniform(0.92, 1.08)
    period = 60.0 / bpm
    beats, t = [], 0.4 + rng.uniform(0, 0.2)
    while t < duration_s - 0.3:
        beats.append(t)
        jitter = rng.uniform(-0.35, 0.35) if label is ArrhythmiaClass.AF else rng.normal(0, 0.01)
        t += period * (1 + jitter)
    centers = np.rint(np.asarray(beats) * sampling_hz).astype(np.int64)
    qrs = gaussian_pulse_train(n, centers, sampling_hz)
    pr = 0.26 if label is ArrhythmiaClass.IAVB else 0.16
    p_wave = np.zeros(n) if label is ArrhythmiaClass.AF else gaussian_pulse_train(
        n, centers - int(pr * sampling_hz), sampling_hz, sigma_s=0.03, amplitude=0.15)
    base = qrs + p_wave
    scales = rng.uniform(0.4, 1.2, N_LEADS) * np.where(np.arange(N_LEADS) == 3, -1, 1)
    leads = scales[:, None] * base[None, :] + rng.normal(0, 0.02, (N_LEADS, n))
    return EcgRecord(record_id or f"{label.value}_{seed}", sampling_hz, leads, label=label)
