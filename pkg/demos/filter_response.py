"""Gain of the default QRS bandpass at a few frequencies.

    python demos/filter_response.py
"""

import numpy as np

from ecgpipe.filters import BandpassSpec, apply_filter, design_bandpass

spec = BandpassSpec(500.0)          # order 2, 5-15 Hz
coeffs = design_bandpass(spec)
print("b =", np.array2string(coeffs.b, precision=6))
print("a =", np.array2string(coeffs.a, precision=6))

freqs = np.array([0.5, 2.0, 5.0, 8.66, 15.0, 30.0, 60.0])
gain_db = 20 * np.log10(np.abs(coeffs.frequency_response(freqs, spec.sampling_hz)))
for f, g in zip(freqs, gain_db):
    print(f"{f:6.2f} Hz  {g:8.3f} dB")

# a 10 Hz tone passes, 50 Hz mains hum does not
t = np.arange(5000) / spec.sampling_hz
for f in (10.0, 50.0):
    y = apply_filter(coeffs, np.sin(2 * np.pi * f * t))
    print(f"{f:.0f} Hz tone: steady-state amplitude {np.max(np.abs(y[2500:])):.3f}")
