"""Hot inner loops of the homodyne pipeline.

Each kernel has a numba implementation and a numpy implementation with the
same signature. The module-level names pick one according to
``ATOMSQUEEZE_DISABLE_NUMBA`` (see :mod:`atomsqueeze._accel`); both variants
stay importable for parity tests and benchmarks.
"""
import math

import numpy as np

from .._accel import USE_NUMBA, njit


# --- lagged autocorrelation per interval --------------------------------------

@njit
def _lagged_autocorr_jit(blocks, max_lag):
    n_blocks, n = blocks.shape
    out = np.zeros((n_blocks, max_lag + 1))
    acc = np.zeros(max_lag + 1)
    for b in range(n_blocks):
        x = blocks[b]
        acc[:] = 0.0
        # lag loop innermost: independent accumulators vectorise without fastmath
        for i in range(n - max_lag):
            xi = x[i]
            for k in range(max_lag + 1):
                acc[k] += xi * x[i + k]
        for i in range(n - max_lag, n):
            xi = x[i]
            for k in range(n - i):
                acc[k] += xi * x[i + k]
        for k in range(max_lag + 1):
            out[b, k] = acc[k] / (n - k)
    return out


def _lagged_autocorr_np(blocks, max_lag):
    blocks = np.ascontiguousarray(blocks, dtype=np.float64)
    n = blocks.shape[1]
    nfft = 1 << int(math.ceil(math.log2(n + max_lag + 1)))
    spec = np.fft.rfft(blocks, nfft, axis=1)
    raw = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, nfft, axis=1)[:, :max_lag + 1]
    return raw / (n - np.arange(max_lag + 1))


def lagged_autocorr_numba(blocks, max_lag):
    return _lagged_autocorr_jit(np.ascontiguousarray(blocks, dtype=np.float64), int(max_lag))


lagged_autocorr_numpy = _lagged_autocorr_np


# --- periodogram accumulation ---------------------------------------------------

@njit
def _power_moments_jit(spectra, scale):
    n_win, n_bins = spectra.shape
    s1 = np.zeros(n_bins)
    s2 = np.zeros(n_bins)
    for w in range(n_win):
        for k in range(n_bins):
            z = spectra[w, k]
            p = (z.real * z.real + z.imag * z.imag) * scale
            s1[k] += p
            s2[k] += p * p
    return s1, s2


def power_moments_numba(spectra, scale):
    """Sum and sum of squares over windows of |X|^2 * scale."""
    return _power_moments_jit(np.ascontiguousarray(spectra, dtype=np.complex128), float(scale))


def power_moments_numpy(spectra, scale):
    p = (spectra.real ** 2 + spectra.imag ** 2) * scale
    return p.sum(axis=0), (p * p).sum(axis=0)


# --- ADC quantization -----------------------------------------------------------

@njit
def _quantize_jit(x, lo, hi):
    out = np.empty(x.size, dtype=np.int16)
    for i in range(x.size):
        v = math.floor(x[i] + 0.5)
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        out[i] = np.int16(v)
    return out


def quantize_numba(x, bits):
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    return _quantize_jit(np.ascontiguousarray(x, dtype=np.float64).ravel(), float(lo), float(hi))


def quantize_numpy(x, bits):
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    return np.clip(np.floor(np.asarray(x, dtype=np.float64).ravel() + 0.5), lo, hi).astype(np.int16)


# --- per-block variance -----------------------------------------------------------

@njit
def _block_variance_jit(x, block):
    n_blocks = x.size // block
    out = np.empty(n_blocks)
    for b in range(n_blocks):
        mean = 0.0
        for i in range(block):
            mean += x[b * block + i]
        mean /= block
        acc = 0.0
        for i in range(block):
            d = x[b * block + i] - mean
            acc += d * d
        out[b] = acc / block
    return out


def block_variance_numba(x, block):
    return _block_variance_jit(np.ascontiguousarray(x, dtype=np.float64).ravel(), int(block))


def block_variance_numpy(x, block):
    x = np.asarray(x, dtype=np.float64).ravel()
    n_blocks = x.size // block
    return x[:n_blocks * block].reshape(n_blocks, block).var(axis=1)


if USE_NUMBA:
    lagged_autocorr = lagged_autocorr_numba
    power_moments = power_moments_numba
    quantize = quantize_numba
    block_variance = block_variance_numba
else:
    lagged_autocorr = lagged_autocorr_numpy
    power_moments = power_moments_numpy
    quantize = quantize_numpy
    block_variance = block_variance_numpy

KERNELS = {
    "lagged_autocorr": (lagged_autocorr_numba, lagged_autocorr_numpy),
    "power_moments": (power_moments_numba, power_moments_numpy),
    "quantize": (quantize_numba, quantize_numpy),
    "block_variance": (block_variance_numba, block_variance_numpy),
}
