"""Power spectra of control signals, peak detection and beat extraction."""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import find_peaks

from handlers.errors import ConfigError
from solvers.numerics import ROUNDING

MIN_SAMPLES = 16


@dataclass(frozen=True)
class Beat:
    omega_1: float
    omega_2: float
    period: float


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Single-sided spectrum normalised to unit maximum.

    Attributes:
        frequencies (numpy.ndarray): Angular frequencies [rad / time unit], spacing 2*pi/tau.
        normalized_power (numpy.ndarray): Power divided by its maximum.
        power (numpy.ndarray): Unnormalised power; sums to sum(x**2) without a window.
        peaks (list): (frequency, normalized power) of detected peaks, strongest first.
        beat (Beat, optional): Beat of the two strongest peaks.
    """

    frequencies: np.ndarray
    normalized_power: np.ndarray
    power: np.ndarray
    peaks: List[Tuple[float, float]] = field(default_factory=list)
    beat: Optional[Beat] = None

    @property
    def resolution(self):
        return float(self.frequencies[1] - self.frequencies[0])


def _sample_spacing(signal):
    grid = getattr(signal, "grid", None)
    if grid is not None:
        return np.asarray(signal.values, dtype=float), grid.dt
    times, values = signal
    times = np.asarray(times, dtype=float)
    steps = np.diff(times)
    if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-6, atol=ROUNDING * abs(steps[0])):
        raise ConfigError("Power spectra need uniformly sampled signals")
    return np.asarray(values, dtype=float), float(steps[0])


def power_spectrum(signal, exclude_dc=False, window=None, threshold=0.05):
    """Single-sided power spectrum of a uniformly sampled signal.

    The first n_steps samples are transformed, so a signal on [0, tau] has
    frequency resolution 2*pi/tau and a periodic signal sampled over whole
    periods lands exactly on its bin.

    Args:
        signal (TimeSeries or tuple): A TimeSeries or (times, values) pair.
        exclude_dc (bool): Ignore the omega = 0 bin when normalising and detecting peaks.
        window (str, optional): None or "hann".
        threshold (float): Minimum normalised height of a detected peak.

    Returns:
        SpectrumResult

    Raises:
        ConfigError: On non-uniform sampling, too few samples or an unknown window.
    """
    values, dt = _sample_spacing(signal)
    n = values.size - 1
    if n < MIN_SAMPLES:
        raise ConfigError(f"A power spectrum needs at least {MIN_SAMPLES} steps, got {n}")
    x = values[:n]
    if window == "hann":
        x = x * np.hanning(n)
    elif window not in (None, "none"):
        raise ConfigError(f"Unknown window '{window}' (expected none or hann)")

    spectrum = np.fft.rfft(x)
    power = np.abs(spectrum) ** 2 / n
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0
    frequencies = 2.0 * np.pi * np.fft.rfftfreq(n, d=dt)

    considered = power.copy()
    if exclude_dc:
        considered[0] = 0.0
    peak_power = considered.max()
    normalized = considered / peak_power if peak_power > 0 else np.zeros_like(considered)

    result = SpectrumResult(frequencies, normalized, power)
    peaks = detect_peaks(result, threshold)
    return SpectrumResult(frequencies, normalized, power, peaks, detect_beat(peaks))


def detect_peaks(spectrum: SpectrumResult, threshold=0.05):
    """Local maxima above `threshold` of the normalised power, strongest first.

    The end bins count as peaks when they exceed their single neighbour.
    """
    padded = np.concatenate(([-np.inf], spectrum.normalized_power, [-np.inf]))
    indices, _ = find_peaks(padded, height=threshold)
    indices = indices - 1
    order = indices[np.argsort(-spectrum.normalized_power[indices], kind="stable")]
    return [(float(spectrum.frequencies[i]), float(spectrum.normalized_power[i])) for i in order]


def detect_beat(peaks):
    """Beat of the two strongest peaks: period 2*pi / |omega_1 - omega_2|.

    Accepts a peak list or a SpectrumResult; returns None with fewer than two peaks.
    """
    if isinstance(peaks, SpectrumResult):
        peaks = peaks.peaks
    if len(peaks) < 2:
        return None
    (w1, _), (w2, _) = peaks[:2]
    if w1 == w2:
        return None
    return Beat(w1, w2, 2.0 * np.pi / abs(w1 - w2))
