"""
Digital Butterworth bandpass design and causal IIR filtering.

The design follows the classical route: analog low-pass Butterworth
prototype -> low-pass to bandpass transformation -> bilinear transform
with pre-warped band edges. Coefficients are normalised so ``a[0] == 1``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import DataError, DomainError


@dataclass(frozen=True)
class BandpassSpec:
    sampling_hz: float
    lowcut_hz: float = 5.0
    highcut_hz: float = 15.0
    order: int = 2

    def __post_init__(self):
        nyquist = 0.5 * self.sampling_hz
        if not isinstance(self.order, (int, np.integer)) or self.order < 1:
            raise DomainError(f"filter order must be a positive integer, got {self.order!r}")
        if not self.sampling_hz > 0:
            raise DomainError(f"sampling_hz must be positive, got {self.sampling_hz!r}")
        if not 0 < self.lowcut_hz < self.highcut_hz:
            raise DomainError(
                f"need 0 < lowcut < highcut, got {self.lowcut_hz} / {self.highcut_hz} Hz")
        if self.highcut_hz >= nyquist:
            raise DomainError(
                f"highcut {self.highcut_hz} Hz is not below Nyquist ({nyquist} Hz)")

    @property
    def normalized_cutoffs(self):
        """Band edges as fractions of the Nyquist frequency."""
        nyquist = 0.5 * self.sampling_hz
        return self.lowcut_hz / nyquist, self.highcut_hz / nyquist


@dataclass(frozen=True, eq=False)
class IirCoefficients:
    b: np.ndarray
    a: np.ndarray

    @property
    def poles(self):
        return np.roots(self.a)

    def is_stable(self):
        return bool(np.all(np.abs(self.poles) < 1.0))

    def frequency_response(self, freqs_hz, sampling_hz):
        """Complex H(e^{jw}) evaluated directly from the polynomial ratio."""
        w = 2 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / sampling_hz
        z_inv = np.exp(-1j * w)
        num = np.polyval(self.b[::-1], z_inv)
        den = np.polyval(self.a[::-1], z_inv)
        return num / den

    def to_dict(self):
        return {"b": self.b.tolist(), "a": self.a.tolist()}


def _butter_prototype(order):
    k = np.arange(1, order + 1)
    poles = np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    return np.empty(0, dtype=complex), poles, 1.0


def _lowpass_to_bandpass(zeros, poles, gain, center, bandwidth):
    degree = len(poles) - len(zeros)
    scaled = poles * bandwidth / 2
    root = np.sqrt(scaled ** 2 - center ** 2)
    bp_poles = np.concatenate([scaled + root, scaled - root])
    scaled_z = zeros * bandwidth / 2
    root_z = np.sqrt(scaled_z ** 2 - center ** 2)
    bp_zeros = np.concatenate([scaled_z + root_z, scaled_z - root_z, np.zeros(degree)])
    return bp_zeros, bp_poles, gain * bandwidth ** degree


def _bilinear(zeros, poles, gain, fs):
    fs2 = 2.0 * fs
    degree = len(poles) - len(zeros)
    dz = (fs2 + zeros) / (fs2 - zeros)
    dp = (fs2 + poles) / (fs2 - poles)
    dz = np.concatenate([dz, -np.ones(degree)])
    dgain = gain * np.real(np.prod(fs2 - zeros) / np.prod(fs2 - poles))
    return dz, dp, dgain


def design_bandpass(spec):
    """Digital Butterworth bandpass for ``spec``; returns normalised (b, a)."""
    low, high = spec.normalized_cutoffs
    # Work on a normalised axis where Nyquist = 1 (fs = 2).
    fs = 2.0
    warped_low = 2 * fs * np.tan(np.pi * low / fs)
    warped_high = 2 * fs * np.tan(np.pi * high / fs)
    center = np.sqrt(warped_low * warped_high)
    bandwidth = warped_high - warped_low

    z, p, k = _butter_prototype(spec.order)
    z, p, k = _lowpass_to_bandpass(z, p, k, center, bandwidth)
    z, p, k = _bilinear(z, p, k, fs)

    b = np.real(k * np.poly(z))
    a = np.real(np.poly(p))
    b, a = b / a[0], a / a[0]
    return IirCoefficients(b=b, a=a)


def apply_filter(coeffs, x):
    """Single-pass causal filtering with zero initial state."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DataError("filter input contains non-finite samples")
    return sps.lfilter(coeffs.b, coeffs.a, x)
