"""QRS detection on synthetic pulse trains, clean and noisy.

    python demos/detect_beats.py
"""

import numpy as np

from ecgpipe.qrs import detect_qrs, qrs_features
from ecgpipe.synthetic import pulse_record

for bpm, noise in [(50, 0.0), (75, 0.0), (150, 0.0), (75, 0.1), (110, 0.2)]:
    rec, truth = pulse_record(bpm=float(bpm), duration_s=20.0, noise_std=noise, seed=bpm)
    ann = detect_qrs(rec, "II")
    feats = qrs_features(ann, rec.sampling_hz)
    err = np.abs(ann.r_peaks[:, None] - truth[None, :]).min(axis=1) if len(ann) else []
    print(f"{bpm:4d} bpm  noise {noise:.1f}  beats {len(ann):3d}/{len(truth):3d}  "
          f"max err {2 * max(err, default=0):3.0f} ms  "
          f"mean RR {feats.mean_rr_s:.3f} s")

rec, _ = pulse_record(bpm=75.0, duration_s=4.0)
ann = detect_qrs(rec, "II")
print("Q", ann.q_peaks.tolist())
print("R", ann.r_peaks.tolist())
print("S", ann.s_peaks.tolist())
