"""Analytic-signal amplitude and frequency of oscillatory components.

The analytic signal is built in the frequency domain: zero the negative
frequency bins, double the strictly positive ones, and keep DC (and the
Nyquist bin for even lengths) unscaled.  Its modulus is the instantaneous
amplitude; the derivative of its unwrapped phase is the instantaneous
frequency.  No boundary extension is applied, so both estimates carry the
usual edge effects and downstream checks should look at interior windows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emd import _as_1d_float, _frozen_copy


@dataclass(frozen=True, eq=False)
class AnalyticSeries:
    """Real and imaginary parts of an analytic signal."""

    real_part: np.ndarray
    imag_part: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "real_part", _frozen_copy(_as_1d_float(self.real_part, "real_part")))
        object.__setattr__(self, "imag_part", _frozen_copy(_as_1d_float(self.imag_part, "imag_part")))
        if self.real_part.size != self.imag_part.size:
            raise ValueError("real and imaginary parts must have equal length")


def _analytic(x: np.ndarray) -> np.ndarray:
    n = x.size
    spectrum = np.fft.fft(x)
    weights = np.zeros(n)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[1 : n // 2] = 2.0
        weights[n // 2] = 1.0
    else:
        weights[1 : (n + 1) // 2] = 2.0
    return np.fft.ifft(spectrum * weights)


def analytic_signal(imf) -> AnalyticSeries:
    """Analytic signal of a real series via the one-sided spectrum."""
    x = _as_1d_float(imf, "imf")
    if x.size < 4:
        raise ValueError("series too short: analytic signal needs at least 4 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("invalid samples: input contains non-finite values")
    z = _analytic(x)
    return AnalyticSeries(real_part=z.real, imag_part=z.imag)


def instantaneous_amplitude(imf) -> np.ndarray:
    """Elementwise modulus of the analytic signal; always nonnegative."""
    z = analytic_signal(imf)
    return np.hypot(z.real_part, z.imag_part)


def instantaneous_frequency(imf, dt: float = 1.0) -> np.ndarray:
    """Instantaneous frequency from the unwrapped analytic phase.

    Central finite differences in the interior, one-sided at the ends,
    divided by ``2*pi*dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    z = analytic_signal(imf)
    phase = np.unwrap(np.arctan2(z.imag_part, z.real_part))
    return np.gradient(phase, dt) / (2.0 * np.pi)
