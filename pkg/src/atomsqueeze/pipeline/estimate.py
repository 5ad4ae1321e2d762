"""Estimators: interval gating, autocorrelations, spectra, drift and differential curves."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from ..analytic import AutocorrelationSeries, to_mdb
from ..errors import GridMismatchError, InsufficientDataError
from .kernels import block_variance, lagged_autocorr, power_moments
from .synth import (ACQUISITION_US, COUPLED_US, INTERVAL_US, REFERENCE_START_US, DriftModel)

COUPLED_MAX_T = 0.04
REFERENCE_MIN_T = 0.7
WINDOW_US = 100.0
MAX_LAG_US = 2.0
BASELINE_AFTER_US = 1.0
KERNEL_SUPPORT_US = 1.0
LORENTZ_FWHM_MHZ = 1.0
MIN_REFERENCE_US = 1e6     # 1 s
MIN_UNTRAPPED = 10


def classify_intervals(transmission) -> np.ndarray:
    """'coupled' (T <= 0.04), 'reference' (T >= 0.7) or 'discarded' per interval."""
    t = np.asarray(transmission, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("relative transmission must lie in [0, 1]")
    labels = np.full(t.shape, "discarded", dtype=object)
    labels[t <= COUPLED_MAX_T] = "coupled"
    labels[t >= REFERENCE_MIN_T] = "reference"
    return labels


def gather_intervals(acq, label: str, labels=None) -> np.ndarray:
    """Samples of the intervals carrying ``label`` as a (n, samples_per_interval) float array."""
    if labels is None:
        labels = classify_intervals(acq.transmission)
    n = acq.samples_per_interval
    blocks = np.asarray(acq.samples[:labels.size * n], dtype=np.float64).reshape(labels.size, n)
    return blocks[labels == label]


# --- autocorrelation ------------------------------------------------------------------

@dataclass(frozen=True)
class AutocorrEstimate:
    lags_us: np.ndarray
    values: np.ndarray
    std_err: np.ndarray
    n_intervals: int
    baseline: float = 0.0

    def scaled(self, factor):
        return AutocorrEstimate(self.lags_us, self.values * factor, self.std_err * abs(factor),
                                self.n_intervals, self.baseline * factor)


class AutocorrAccumulator:
    """Streaming mean and scatter of per-interval autocorrelations."""

    def __init__(self, dt_us: float, max_lag_us: float = MAX_LAG_US,
                 baseline_after_us: float = BASELINE_AFTER_US):
        self.dt_us = dt_us
        self.max_lag = int(round(max_lag_us / dt_us))
        self.baseline_start = int(round(baseline_after_us / dt_us)) + 1
        self.s1 = np.zeros(self.max_lag + 1)
        self.s2 = np.zeros(self.max_lag + 1)
        self.n = 0

    def add(self, blocks):
        blocks = np.atleast_2d(blocks)
        if blocks.shape[0] == 0:
            return
        if blocks.shape[1] <= self.max_lag:
            raise ValueError("intervals shorter than the lag range")
        r = lagged_autocorr(blocks, self.max_lag)
        # per-interval baseline: the estimate is linear, so this equals subtracting it from the mean
        r = r - r[:, self.baseline_start:].mean(axis=1, keepdims=True)
        self.s1 += r.sum(axis=0)
        self.s2 += (r * r).sum(axis=0)
        self.n += blocks.shape[0]

    def result(self) -> AutocorrEstimate:
        if self.n == 0:
            raise InsufficientDataError("no intervals in the selection")
        mean = self.s1 / self.n
        if self.n > 1:
            var = np.maximum(self.s2 / self.n - mean ** 2, 0.0) * self.n / (self.n - 1)
            err = np.sqrt(var / self.n)
        else:
            err = np.full_like(mean, np.inf)
        lags = np.arange(self.max_lag + 1) * self.dt_us
        return AutocorrEstimate(lags, mean, err, self.n)


def autocorrelation_estimate(intervals, dt_us: float, max_lag_us: float = MAX_LAG_US,
                             baseline_after_us: float = BASELINE_AFTER_US) -> AutocorrEstimate:
    """Averaged 10 ns-lag autocorrelation with the long-delay mean removed.

    ``intervals`` is a 2-D array or an iterable of 2-D arrays (one row per interval).
    """
    acc = AutocorrAccumulator(dt_us, max_lag_us, baseline_after_us)
    for blocks in _as_block_stream(intervals):
        acc.add(blocks)
    return acc.result()


def _as_block_stream(intervals):
    if isinstance(intervals, np.ndarray):
        return [intervals]
    return intervals


# --- spectra ------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumEstimate:
    """Spectrum on the 10 kHz grid. Raw estimates are in counts^2 per sample
    (mean over the full DFT circle equals the variance); differential ones in mdB."""

    freq_mhz: np.ndarray
    values: np.ndarray
    std_err: np.ndarray
    n_windows: int
    units: str = "counts2"


class SpectrumAccumulator:
    def __init__(self, dt_us: float, window_us: float = WINDOW_US):
        self.dt_us = dt_us
        self.n_win = int(round(window_us / dt_us))
        self.s1 = np.zeros(self.n_win // 2 + 1)
        self.s2 = np.zeros_like(self.s1)
        self.n = 0

    def add(self, blocks):
        blocks = np.atleast_2d(blocks)
        if blocks.shape[0] == 0:
            return
        if blocks.shape[1] < self.n_win:
            raise ValueError("intervals shorter than the FFT window")
        per = blocks.shape[1] // self.n_win
        windows = blocks[:, :per * self.n_win].reshape(-1, self.n_win)
        spec = np.fft.rfft(windows, axis=1)
        s1, s2 = power_moments(spec, 1.0 / self.n_win)
        self.s1 += s1
        self.s2 += s2
        self.n += windows.shape[0]

    def result(self) -> SpectrumEstimate:
        if self.n == 0:
            raise InsufficientDataError("no intervals in the selection")
        mean = self.s1 / self.n
        if self.n > 1:
            var = np.maximum(self.s2 / self.n - mean ** 2, 0.0) * self.n / (self.n - 1)
            err = np.sqrt(var / self.n)
        else:
            err = np.full_like(mean, np.inf)
        freq = np.fft.rfftfreq(self.n_win, d=self.dt_us)
        return SpectrumEstimate(freq, mean, err, self.n)


def spectrum_estimate(intervals, dt_us: float, window_us: float = WINDOW_US) -> SpectrumEstimate:
    """Window-averaged |FFT|^2 over 100 us windows (10 kHz resolution)."""
    acc = SpectrumAccumulator(dt_us, window_us)
    for blocks in _as_block_stream(intervals):
        acc.add(blocks)
    return acc.result()


def spectrum_power(est: SpectrumEstimate) -> float:
    """Full-circle mean of a raw spectrum, i.e. the sample mean square (Parseval)."""
    n = 2 * (est.values.size - 1)
    w = np.full(est.values.size, 2.0)
    w[0] = w[-1] = 1.0
    return float(np.sum(w * est.values) / n)


# --- detector response and drift ------------------------------------------------------

@dataclass(frozen=True)
class DetectorResponse:
    lags_us: np.ndarray     # symmetric, -support..support
    kernel: np.ndarray      # unit sum
    std_err: np.ndarray

    @property
    def half_length(self) -> int:
        return (self.kernel.size - 1) // 2


def detector_response_estimate(reference: AutocorrEstimate, dt_us: float | None = None,
                               support_us: float = KERNEL_SUPPORT_US,
                               min_reference_us: float = MIN_REFERENCE_US) -> DetectorResponse:
    """D(tau): reference (shot-noise) autocorrelation renormalised to unit integral."""
    covered = reference.n_intervals * INTERVAL_US
    if covered < min_reference_us:
        raise InsufficientDataError(
            f"detector response needs >= 1 s of reference data, got {covered / 1e6:.3f} s")
    dt = dt_us if dt_us is not None else float(reference.lags_us[1] - reference.lags_us[0])
    m = int(round(support_us / dt))
    one = reference.values[:m + 1]
    err = reference.std_err[:m + 1]
    kernel = np.concatenate([one[:0:-1], one])
    errs = np.concatenate([err[:0:-1], err])
    total = kernel.sum()
    lags = np.arange(-m, m + 1) * dt
    return DetectorResponse(lags, kernel / total, errs / abs(total))


def drift_factor(untrapped, coupled_us: float = COUPLED_US,
                 reference_start_us: float = REFERENCE_START_US) -> DriftModel:
    """Shot-noise variance profile over 20 ms from untrapped acquisitions, and zeta."""
    profiles = []
    for acq in untrapped:
        n = acq.samples_per_interval
        profiles.append(block_variance(acq.samples, n))
    if len(profiles) < MIN_UNTRAPPED:
        raise InsufficientDataError(
            f"drift estimate needs >= {MIN_UNTRAPPED} untrapped acquisitions, got {len(profiles)}")
    prof = np.array(profiles)
    n_c = int(round(coupled_us / INTERVAL_US))
    n_r = int(round(reference_start_us / INTERVAL_US))
    per_acq = prof[:, :n_c].mean(axis=1) / prof[:, n_r:].mean(axis=1)
    mean_prof = prof.mean(axis=0)
    zeta = float(mean_prof[:n_c].mean() / mean_prof[n_r:].mean())
    zeta_err = float(per_acq.std(ddof=1) / math.sqrt(per_acq.size))
    times = (np.arange(mean_prof.size) + 0.5) * INTERVAL_US
    return DriftModel(zeta, times, mean_prof / mean_prof[n_r:].mean(), zeta_err)


# --- absolute normalisation -------------------------------------------------------------

def normalization_factor(calibration_samples, alpha2: float = 2.0, eta_d: float = 1.0) -> float:
    """Counts^2 -> <:DX DX:> units from the unlocked-cavity coherent offset.

    The offset m corresponds to a coherent amplitude sqrt(alpha2); the factor
    eta_d * alpha2 / m^2 keeps the detection efficiency in the result.
    """
    m = float(np.mean(np.asarray(calibration_samples, dtype=float)))
    if m == 0:
        raise ValueError("calibration record has no coherent offset")
    return eta_d * alpha2 / m ** 2


def differential_autocorrelation(coupled: AutocorrEstimate, reference: AutocorrEstimate,
                                 drift: DriftModel, normalization: float) -> AutocorrEstimate:
    """(coupled - zeta * reference) * normalization."""
    if coupled.lags_us.shape != reference.lags_us.shape or not np.allclose(coupled.lags_us,
                                                                          reference.lags_us):
        raise GridMismatchError("coupled and reference lag grids differ")
    z = drift.zeta
    values = (coupled.values - z * reference.values) * normalization
    err = np.sqrt(coupled.std_err ** 2 + (z * reference.std_err) ** 2
                  + (drift.zeta_std_err * reference.values) ** 2) * abs(normalization)
    return AutocorrEstimate(coupled.lags_us, values, err, coupled.n_intervals)


def convolve_theory(theory: AutocorrelationSeries, response) -> AutocorrelationSeries:
    """Even extension of a one-sided theory curve convolved with a unit-sum kernel.

    ``response`` is a :class:`DetectorResponse` or a symmetric weight array.
    The theory grid must start at 0 with the kernel's lag step.
    """
    kernel = response.kernel if isinstance(response, DetectorResponse) else np.asarray(response)
    if kernel.size % 2 != 1:
        raise ValueError("kernel must have odd length (centred)")
    half = (kernel.size - 1) // 2
    vals = np.asarray(theory.values, dtype=float)
    if half > vals.size - 1:
        raise ValueError("kernel longer than the theory series")
    if theory.tau_grid[0] != 0:
        raise GridMismatchError("theory grid must start at tau = 0")
    full = np.concatenate([vals[:0:-1], vals])
    out = np.convolve(full, kernel, mode="same")[vals.size - 1:]
    return AutocorrelationSeries(theory.theta, theory.tau_grid.copy(), out)


# --- differential spectrum ----------------------------------------------------------------

def _log_mean_bias(n):
    # E[ln(mean of n exponential variates)] - ln(true mean)
    return digamma(n) - math.log(n)


def lorentzian_smooth(values, fwhm_mhz: float, df_mhz: float, variance=None):
    """Convolve a one-sided spectrum (rfft grid) with a unit-area Lorentzian.

    The input is mirrored onto the full circle and multiplied in the lag
    domain by exp(-pi * fwhm * |tau|). With ``variance`` given, independent
    per-bin variances are propagated through the squared weights.
    """
    v = np.asarray(values, dtype=float)
    n = 2 * (v.size - 1)
    j = np.arange(v.size)
    tau = j / (n * df_mhz)
    taper = np.exp(-math.pi * fwhm_mhz * tau)
    smooth = np.fft.irfft(_even_rfft(v) * taper, n)[:v.size]
    if variance is None:
        return smooth
    # kernel weights from the response of a unit impulse at bin 0
    delta = np.zeros(v.size)
    delta[0] = 1.0
    w = np.fft.irfft(_even_rfft(delta) * taper, n)
    w2_hat = np.fft.rfft(w * w)
    var_full = np.concatenate([variance, np.asarray(variance)[-2:0:-1]])
    out_var = np.fft.irfft(np.fft.rfft(var_full) * w2_hat, n)[:v.size]
    return smooth, np.maximum(out_var, 0.0)


def _even_rfft(v):
    full = np.concatenate([v, v[-2:0:-1]])
    return np.fft.rfft(full)


def lin_to_rel_mdb(log_ratio, eta_d):
    """ln(measured ratio) -> mdB of the efficiency-corrected ratio 1 + (r - 1)/eta_d."""
    r = np.exp(log_ratio)
    return to_mdb(1.0 + (r - 1.0) / eta_d)


def differential_spectrum(signal: SpectrumEstimate, reference: SpectrumEstimate, drift: DriftModel,
                          fwhm_mhz: float = LORENTZ_FWHM_MHZ, eta_d: float = 0.55,
                          smooth: bool = True) -> SpectrumEstimate:
    """Log difference of signal and zeta * reference, Lorentzian-smoothed, efficiency-corrected, in mdB."""
    if signal.freq_mhz.shape != reference.freq_mhz.shape or not np.allclose(signal.freq_mhz,
                                                                           reference.freq_mhz):
        raise GridMismatchError("signal and reference frequency grids differ")
    if not 0 < eta_d <= 1:
        raise ValueError("eta_d must lie in (0, 1]")
    d = (np.log(signal.values) - np.log(drift.zeta * reference.values)
         - _log_mean_bias(signal.n_windows) + _log_mean_bias(reference.n_windows))
    var = (signal.std_err / signal.values) ** 2 + (reference.std_err / reference.values) ** 2
    # DC carries the record mean; take its neighbour
    d = d.copy()
    d[0], var[0] = d[1], var[1]
    df = float(signal.freq_mhz[1] - signal.freq_mhz[0])
    if smooth:
        d, var = lorentzian_smooth(d, fwhm_mhz, df, variance=var)
    # uncertainty of zeta shifts all bins together
    var = var + (drift.zeta_std_err / drift.zeta) ** 2
    r = np.exp(d)
    rel = 1.0 + (r - 1.0) / eta_d
    slope = 1e4 / math.log(10) * (r / eta_d) / rel
    # bins with r <= 1 - eta_d have no efficiency-corrected level; they come out NaN
    rel = np.where(rel > 0, rel, np.nan)
    return SpectrumEstimate(signal.freq_mhz, to_mdb(rel), slope * np.sqrt(var),
                            min(signal.n_windows, reference.n_windows), units="mdB")


def expected_differential_spectrum(freq_mhz, model_linear, eta_d: float = 0.55,
                                   fwhm_mhz: float = LORENTZ_FWHM_MHZ, smooth: bool = True):
    """Model spectrum passed through the same log-domain smoothing (mdB)."""
    d = np.log(1.0 + eta_d * (np.asarray(model_linear) - 1.0))
    if smooth:
        df = float(freq_mhz[1] - freq_mhz[0])
        d = lorentzian_smooth(d, fwhm_mhz, df)
    return lin_to_rel_mdb(d, eta_d)


def expected_differential_autocorrelation(theory: AutocorrelationSeries, response, eta_d: float,
                                          eta_out: float, kappa: float, alpha2: float,
                                          flux_per_us: float) -> AutocorrelationSeries:
    """Normalised differential autocorrelation predicted for a cavity correlation ``theory``.

    The emitted-field covariance is eta_out * kappa * C(tau) per unit rate;
    referencing to a coherent amplitude alpha2 = flux * T gives the factor
    eta_d * eta_out * kappa * alpha2 / flux on top of the detector smoothing.
    """
    conv = convolve_theory(theory, response)
    scale = eta_d * eta_out * kappa * alpha2 / flux_per_us
    return AutocorrelationSeries(theory.theta, conv.tau_grid, conv.values * scale)


# --- goodness of fit ----------------------------------------------------------------------

def chi2_per_bin(values, expected, std_err, mask=None) -> float:
    v, e, s = (np.asarray(x, dtype=float) for x in (values, expected, std_err))
    if mask is None:
        mask = np.isfinite(s) & (s > 0)
    r = (v[mask] - e[mask]) / s[mask]
    if r.size == 0:
        raise InsufficientDataError("no bins for chi^2")
    return float(np.mean(r * r))


def band_level(diff: SpectrumEstimate, raw_log_var, f_min_mhz: float, eta_d: float,
               zeta_rel_err: float = 0.0):
    """Mean level (mdB) above ``f_min_mhz``; error from the independent raw bins plus zeta."""
    sel = diff.freq_mhz > f_min_mhz
    sel[-1] = False  # Nyquist
    level = float(np.mean(diff.values[sel]))
    n = int(sel.sum())
    slope = 1e4 / math.log(10) / eta_d
    err = slope * math.sqrt(float(np.sum(np.asarray(raw_log_var)[sel])) / n ** 2 + zeta_rel_err ** 2)
    return level, err


def raw_log_variance(signal: SpectrumEstimate, reference: SpectrumEstimate):
    return (signal.std_err / signal.values) ** 2 + (reference.std_err / reference.values) ** 2


def interval_time_axis():
    n = int(round(ACQUISITION_US / INTERVAL_US))
    return (np.arange(n) + 0.5) * INTERVAL_US
