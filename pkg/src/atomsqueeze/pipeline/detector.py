"""Balanced homodyne detector and digitizer model."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

FILTER_KINDS = ("butterworth", "brickwall")


@dataclass(frozen=True)
class DetectorModel:
    """Detection chain: anti-alias filter, efficiency, 14-bit ADC.

    ``shot_noise_rms`` is the shot-noise standard deviation in ADC counts for
    a flat (S = 1) input; ``electronic_noise_db`` is how far the shot noise
    sits above the electronic noise floor.
    """

    sample_rate_mhz: float = 100.0
    adc_bits: int = 14
    bandwidth_mhz: float = 40.0
    filter_order: int = 6
    filter_kind: str = "butterworth"
    eta_d: float = 0.55
    shot_noise_rms: float = 400.0
    electronic_noise_db: float = 9.0
    electronic_noise: bool = False

    def __post_init__(self):
        if self.filter_kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.filter_kind!r}")
        if not 0 < self.eta_d <= 1:
            raise ValueError("eta_d must lie in (0, 1]")

    @property
    def dt_us(self) -> float:
        return 1.0 / self.sample_rate_mhz

    def power_gain(self, f_mhz):
        """|H(f)|^2 of the anti-alias filter, unity at DC."""
        f = np.abs(np.asarray(f_mhz, dtype=float))
        if self.filter_kind == "brickwall":
            return (f <= self.bandwidth_mhz).astype(float)
        return 1.0 / (1.0 + (f / self.bandwidth_mhz) ** (2 * self.filter_order))

    def circular_gain(self, n: int):
        """Power gain on the rfft grid of an ``n``-sample record."""
        return self.power_gain(np.fft.rfftfreq(n, d=self.dt_us))

    def impulse_response(self, max_lag: int, n_fft: int = 1 << 16):
        """D(tau) on lags -max_lag..max_lag (unit sum): autocorrelation of the filter response.

        Returns ``(lags_us, weights)``; ``weights / dt`` is the density with
        unit integral.
        """
        gain = self.circular_gain(n_fft)
        acf = np.fft.irfft(gain, n_fft)
        one_sided = acf[:max_lag + 1]
        kernel = np.concatenate([one_sided[:0:-1], one_sided])
        kernel = kernel / kernel.sum()
        lags = np.arange(-max_lag, max_lag + 1) * self.dt_us
        return lags, kernel

    def as_dict(self):
        return asdict(self)
