import os

from handlers import utils
from handlers.errors import ConfigError
from handlers.logger_handler import Logger
from scenarios.common import ResultBundle
from solvers.spectral import power_spectrum

TAG = f"[{chr(int('f1fe', 16))} Spectrum]"


class SpectrumHandler:
    """Power spectrum, peaks and beat period of a sampled signal read from CSV."""

    def __init__(self, config, max_iters=None):
        self.banner = f"{chr(int('EAD3', 16))} {chr(int('f1fe', 16))} Control spectrum"
        self.config = config
        self.settings = config.spectrum()
        self.spt = config.seconds_per_time_unit
        source = self.settings.source
        if source == "control":
            raise ConfigError(f"[spectrum] source must name a CSV file in {config.path}")
        self.source = config.resolve(source)
        if not os.path.isfile(self.source):
            raise ConfigError(f"[spectrum] source {self.source} not found")
        self.bundle = ResultBundle(config.kind)

    def run(self):
        Logger.banner(self.banner)
        s = self.settings
        times, values = utils.read_series_csv(self.source, s.column)
        Logger.log(f"{TAG} {len(times)} samples from {self.source}, column {s.column}", "INFO")
        spectrum = power_spectrum((times, values), s.exclude_dc, s.window, s.threshold)

        omega = spectrum.frequencies / self.spt
        self.bundle.add_series("spectrum.csv", ["omega_rad_per_s", "normalized_power"],
                               [omega, spectrum.normalized_power])
        self.bundle.summary["peaks"] = [{"omega_rad_per_s": w / self.spt, "normalized_power": p}
                                        for w, p in spectrum.peaks]
        self.bundle.summary["resolution_rad_per_s"] = spectrum.resolution / self.spt
        self.bundle.summary["beat_period_s"] = spectrum.beat.period * self.spt if spectrum.beat else None

        for w, p in spectrum.peaks:
            Logger.log(f"{TAG} Peak at {w / self.spt:.6f} rad/s, normalised power {p:.3f}", "INFO")
        if spectrum.beat:
            Logger.log(f"{TAG} Beat period {spectrum.beat.period * self.spt:.1f} s", "INFO")
        else:
            Logger.log(f"{TAG} Fewer than two peaks above {s.threshold:g}; no beat", "INFO")
        return self.bundle
