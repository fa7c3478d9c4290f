"""Signal families for initial profiles, inlet forcing and sampled data."""

from dataclasses import dataclass

import numpy as np

from handlers.errors import ConfigError, UnsupportedCaseError


@dataclass(frozen=True)
class Sinusoid:
    """mean + amplitude * r(s) * sin(omega * s + phase), s being time or position.

    r(s) ramps linearly from 0 to 1 over `ramp` (no ramp when ramp is 0).
    """

    mean: float
    amplitude: float = 0.0
    omega: float = 0.0
    phase: float = 0.0
    ramp: float = 0.0

    def __post_init__(self):
        if self.ramp < 0:
            raise ConfigError(f"Ramp length must be non-negative, got {self.ramp}")

    @classmethod
    def constant(cls, value):
        return cls(float(value))

    @classmethod
    def from_period(cls, mean, amplitude, period, phase=0.0, ramp=0.0):
        if period <= 0:
            raise ConfigError(f"Sinusoid period must be positive, got {period}")
        return cls(float(mean), float(amplitude), 2.0 * np.pi / period, float(phase), float(ramp))

    @property
    def has_derivative(self):
        return True

    def _ramp(self, s):
        if self.ramp == 0:
            return np.ones_like(s), np.zeros_like(s)
        inside = s < self.ramp
        return np.where(inside, s / self.ramp, 1.0), np.where(inside, 1.0 / self.ramp, 0.0)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        r, _ = self._ramp(s)
        return self.mean + self.amplitude * r * np.sin(self.omega * s + self.phase)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        r, dr = self._ramp(s)
        arg = self.omega * s + self.phase
        return self.amplitude * (dr * np.sin(arg) + r * self.omega * np.cos(arg))


@dataclass(frozen=True, eq=False)
class SampledSeries:
    """Piecewise-linear signal through sampled points, held constant outside them."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or len(times) < 2:
            raise ConfigError("Sampled series needs matching 1-D time and value columns with 2+ rows")
        if np.any(np.diff(times) <= 0):
            raise ConfigError("Sampled series times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ConfigError("Sampled series contains non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def has_derivative(self):
        return False

    def __call__(self, s):
        return np.interp(np.asarray(s, dtype=float), self.times, self.values)

    def derivative(self, s):
        raise UnsupportedCaseError("Sampled series carry no analytic derivative")
