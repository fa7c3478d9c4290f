import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from handlers.errors import ConfigError
from solvers.numerics import SpaceTimeGrid, TimeSeries
from solvers.spectral import detect_beat, power_spectrum

HORIZON = 14400.0
FUNDAMENTAL = 2 * np.pi / HORIZON


@pytest.fixture
def beat_signal():
    grid = SpaceTimeGrid.from_horizon(10, 1.0, 10.0, HORIZON)
    t = grid.t
    values = 5093.0 + 200.0 * np.sin(28 * FUNDAMENTAL * t) + 120.0 * np.sin(24 * FUNDAMENTAL * t)
    return TimeSeries(values, grid)


def test_beat_of_two_heating_modes(beat_signal):
    result = power_spectrum(beat_signal, exclude_dc=True)
    assert result.resolution == pytest.approx(FUNDAMENTAL)
    (w1, p1), (w2, p2) = result.peaks[:2]
    assert w1 == pytest.approx(0.012217, abs=1e-6)
    assert p1 == pytest.approx(1.0)
    assert w2 == pytest.approx(0.010472, abs=1e-6)
    assert p2 == pytest.approx(0.36, rel=1e-6)
    assert len(result.peaks) == 2
    assert result.beat.period == pytest.approx(3600.0)
    assert result.normalized_power[0] == 0.0


def test_mean_dominates_without_dc_exclusion(beat_signal):
    result = power_spectrum(beat_signal)
    assert result.peaks[0][0] == 0.0
    assert result.normalized_power[0] == 1.0


def test_hann_window_keeps_peak_positions(beat_signal):
    fluctuation = TimeSeries(beat_signal.values - 5093.0, beat_signal.grid)
    result = power_spectrum(fluctuation, window="hann")
    assert result.peaks[0][0] == pytest.approx(28 * FUNDAMENTAL)
    assert result.beat.period == pytest.approx(3600.0)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=17, max_size=200))
@settings(max_examples=50, deadline=None)
def test_power_sums_to_signal_energy(values):
    times = 0.5 * np.arange(len(values))
    result = power_spectrum((times, values))
    x = np.asarray(values[:-1])
    assert np.sum(result.power) == pytest.approx(np.sum(x ** 2), rel=1e-9, abs=1e-9)


def test_normalised_spectrum_is_scale_invariant(beat_signal):
    scaled = TimeSeries(7.0 * beat_signal.values, beat_signal.grid)
    np.testing.assert_allclose(power_spectrum(scaled, exclude_dc=True).normalized_power,
                               power_spectrum(beat_signal, exclude_dc=True).normalized_power, atol=1e-12)


def test_single_tone_has_no_beat():
    grid = SpaceTimeGrid.from_horizon(10, 1.0, 10.0, HORIZON)
    result = power_spectrum(TimeSeries(3.0 * np.sin(12 * FUNDAMENTAL * grid.t), grid))
    assert len(result.peaks) == 1
    assert result.beat is None
    assert detect_beat(result) is None
    assert detect_beat([]) is None


def test_rejects_unusable_signals():
    times = np.arange(40, dtype=float)
    with pytest.raises(ConfigError):
        power_spectrum((times ** 1.5, np.ones(40)))
    with pytest.raises(ConfigError):
        power_spectrum((times[:10], np.ones(10)))
    with pytest.raises(ConfigError):
        power_spectrum((times, np.ones(40)), window="kaiser")
