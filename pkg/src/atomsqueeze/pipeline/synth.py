"""Synthetic homodyne records with the structure of the experiment.

Every acquisition lasts 20 ms and is cut into 200 us intervals. Trapped
acquisitions start with a strongly coupled span (the embedded squeezing
spectrum), go through a few discarded intervals while the atom leaves, and end
with 16 ms of empty-cavity reference. Untrapped acquisitions carry shot noise
only and map the slow drift of the shot-noise level; a calibration record
with the cavity unlocked carries the coherent offset that fixes the absolute
normalisation.

Records are stationary Gaussian processes shaped in the Fourier domain
(spectral factorisation of white noise), scaled by the drift profile and
quantised to the ADC resolution. Acquisitions are regenerated on demand from
per-acquisition seeds, so a trace set never has to sit in memory as a whole.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from ..analytic import SpectrumSeries
from .detector import DetectorModel
from .kernels import quantize

ACQUISITION_US = 20000.0
INTERVAL_US = 200.0
COUPLED_US = 1600.0
REFERENCE_START_US = 4000.0   # reference = last 16 ms
CALIBRATION_US = 10000.0

FULL_COUPLED_S = 3.0          # per quadrature, full data volume
FULL_REFERENCE_S = 30.0

PHASE_LABELS = {"X": 0.0, "P": math.pi / 2}

MAGIC = b"SQZTRACE"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DriftModel:
    """Shot-noise variance profile over an acquisition and the reference rescale factor.

    ``zeta`` is the mean variance over the coupled span (first 1.6 ms) divided
    by the mean over the reference span (last 16 ms).
    """

    zeta: float
    times_us: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)
    zeta_std_err: float = 0.0

    def __post_init__(self):
        if not 0.99 <= self.zeta <= 1.01:
            raise ValueError(f"drift factor zeta={self.zeta:.5f} outside [0.99, 1.01]")

    def factor(self, t_us):
        return np.interp(t_us, self.times_us, self.profile)

    @classmethod
    def flat(cls):
        t = np.array([0.0, ACQUISITION_US])
        return cls(1.0, t, np.ones(2))

    @classmethod
    def linear(cls, zeta: float = 0.998):
        """Linear ramp of the shot-noise variance giving window ratio ``zeta``."""
        c_mid = COUPLED_US / 2
        r_mid = (REFERENCE_START_US + ACQUISITION_US) / 2
        slope = (zeta - 1.0) / (c_mid - zeta * r_mid)
        t = np.array([0.0, ACQUISITION_US])
        return cls(zeta, t, 1.0 + slope * t)


@dataclass(frozen=True)
class Acquisition:
    kind: str                 # trapped | untrapped | calibration
    quadrature: str           # X | P
    index: int
    samples: np.ndarray       # int16 counts (float64 when quantisation is off)
    transmission: np.ndarray  # T/T_max per interval
    sample_rate_mhz: float
    interval_us: float = INTERVAL_US

    @property
    def phase_label(self) -> float:
        return PHASE_LABELS[self.quadrature]

    @property
    def samples_per_interval(self) -> int:
        return int(round(self.interval_us * self.sample_rate_mhz))


@dataclass(frozen=True)
class SynthesisPlan:
    preset: str
    models: dict                    # quadrature -> SpectrumSeries (shot noise = 1)
    detector: DetectorModel
    drift: DriftModel
    flux_per_us: float              # incident photon flux, for the calibration offset
    n_trapped: int
    n_untrapped: int
    seed: int
    quantize: bool = True
    tone_mhz: float | None = None
    tone_mdb: float = 200.0

    @property
    def quadratures(self):
        return tuple(self.models)


def model_spectrum_on(model: SpectrumSeries, f_mhz) -> np.ndarray:
    """Model spectrum interpolated in |f|; S = 1 outside the model grid."""
    grid = model.freq_mhz
    return np.interp(np.abs(f_mhz), grid, model.values, left=model.values[0], right=1.0)


def desk_scale_counts(scale: float = 0.05):
    """(trapped, untrapped) acquisitions per quadrature for a fraction of the full data volume."""
    n_trapped = max(1, int(round(FULL_COUPLED_S * scale / (COUPLED_US * 1e-6))))
    n_untrapped = max(10, int(round(4000 * scale)))
    return n_trapped, n_untrapped


class TraceSet:
    """Ordered collection of acquisitions, produced lazily by ``loader``."""

    def __init__(self, meta: dict, keys: list, loader: Callable[[tuple], Acquisition]):
        self.meta = meta
        self.keys = list(keys)
        self._loader = loader

    def __len__(self):
        return len(self.keys)

    def __iter__(self) -> Iterator[Acquisition]:
        for key in self.keys:
            yield self._loader(key)

    def get(self, key) -> Acquisition:
        return self._loader(tuple(key))

    def select(self, kind=None, quadrature=None) -> Iterator[Acquisition]:
        for key in self.keys:
            if (kind is None or key[0] == kind) and (quadrature is None or key[1] == quadrature):
                yield self._loader(key)

    def count(self, kind=None, quadrature=None) -> int:
        return sum(1 for k in self.keys
                   if (kind is None or k[0] == kind) and (quadrature is None or k[1] == quadrature))

    @property
    def quadratures(self):
        return tuple(self.meta["quadratures"])

    @property
    def detector(self) -> DetectorModel:
        return DetectorModel(**self.meta["detector"])

    def truth(self) -> dict:
        """Embedded model spectra as {quadrature: (freq_mhz, s_linear)}."""
        return {q: (np.asarray(v["freq_mhz"]), np.asarray(v["s_linear"]))
                for q, v in self.meta["truth"].items()}


class _Synthesizer:
    def __init__(self, plan: SynthesisPlan):
        self.plan = plan
        self.det = plan.detector
        self.n_total = int(round(ACQUISITION_US * self.det.sample_rate_mhz))
        self.n_interval = int(round(INTERVAL_US * self.det.sample_rate_mhz))
        self.n_coupled = int(round(COUPLED_US * self.det.sample_rate_mhz))
        self._amp_cache = {}
        gain = self.det.circular_gain(self.n_total)
        # full-circle mean of |H|^2 = variance gain of the filter on white noise
        self.mean_gain = _circle_mean(gain, self.n_total)
        self.white_std = self.det.shot_noise_rms / math.sqrt(self.mean_gain)
        self._t_us = np.arange(self.n_total) * self.det.dt_us
        self._sqrt_drift = np.sqrt(plan.drift.factor(self._t_us))

    def _amplitude(self, n, quadrature):
        key = (n, quadrature)
        if key not in self._amp_cache:
            f = np.fft.rfftfreq(n, d=self.det.dt_us)
            shape = self.det.power_gain(f)
            if quadrature is not None:
                s = model_spectrum_on(self.plan.models[quadrature], f)
                s_det = 1.0 + self.det.eta_d * (s - 1.0)
                if np.any(s_det < 0):
                    raise ValueError("model spectrum requires a negative noise variance")
                shape = shape * s_det
            if self.det.electronic_noise:
                shape = shape + self.det.power_gain(f) * 10 ** (-self.det.electronic_noise_db / 10)
            self._amp_cache[key] = self.white_std * np.sqrt(shape)
        return self._amp_cache[key]

    def _shaped(self, rng, n, quadrature):
        white = rng.standard_normal(n)
        spec = np.fft.rfft(white)
        spec *= self._amplitude(n, quadrature)
        return np.fft.irfft(spec, n)

    def _tone(self, rng, n):
        plan = self.plan
        n_win = int(round(100.0 * self.det.sample_rate_mhz))
        ratio = 10 ** (plan.tone_mdb / 1e4) - 1.0
        local_psd = self.white_std ** 2 * float(self.det.power_gain(plan.tone_mhz))
        amp = math.sqrt(4.0 * ratio * local_psd / n_win)
        phase = rng.uniform(0, 2 * math.pi)
        t = np.arange(n) * self.det.dt_us
        return amp * np.cos(2 * math.pi * plan.tone_mhz * t + phase)

    def _finish(self, x):
        if self.plan.quantize:
            return quantize(x, self.det.adc_bits)
        return x

    def _rng(self, key):
        kind_id = {"trapped": 0, "untrapped": 1, "calibration": 2}[key[0]]
        quad_id = {"X": 0, "P": 1}.get(key[1], 2)
        return np.random.default_rng(np.random.SeedSequence([self.plan.seed, kind_id, quad_id, key[2]]))

    def acquisition(self, key) -> Acquisition:
        kind, quadrature, index = key
        rng = self._rng(key)
        det = self.det
        n_int = self.n_total // self.n_interval
        if kind == "calibration":
            n = int(round(CALIBRATION_US * det.sample_rate_mhz))
            x = self._shaped(rng, n, None)
            x += calibration_offset(self.plan.flux_per_us, det, self.mean_gain)
            trans = np.full(n // self.n_interval, 1.0)
            return Acquisition(kind, quadrature, index, self._finish(x), trans, det.sample_rate_mhz)
        if kind == "trapped":
            head = self._shaped(rng, self.n_coupled, quadrature)
            tail = self._shaped(rng, self.n_total - self.n_coupled, None)
            x = np.concatenate([head, tail])
            trans = transmission_profile(rng, n_int)
        elif kind == "untrapped":
            x = self._shaped(rng, self.n_total, None)
            trans = np.clip(1.0 - np.abs(rng.normal(0.0, 0.05, n_int)), 0.75, 1.0)
        else:
            raise ValueError(f"unknown acquisition kind {kind!r}")
        if self.plan.tone_mhz is not None:
            x += self._tone(rng, self.n_total)
        x *= self._sqrt_drift
        return Acquisition(kind, quadrature, index, self._finish(x), trans, det.sample_rate_mhz)


def _circle_mean(half_spectrum, n):
    """Mean over the full DFT circle of a real-even quantity given on the rfft grid."""
    w = np.full(half_spectrum.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return float(np.sum(w * half_spectrum) / n)


def calibration_offset(flux_per_us: float, det: DetectorModel, mean_gain: float) -> float:
    """Mean homodyne output (counts) for the fully reflected coherent probe.

    Shot-noise variance per sample is (1/4) mean_gain / dt in quadrature units
    while the coherent offset is sqrt(eta_d * flux).
    """
    return 2.0 * det.shot_noise_rms * math.sqrt(det.eta_d * flux_per_us * det.dt_us / mean_gain)


def transmission_profile(rng, n_intervals: int) -> np.ndarray:
    """Relative transmission per interval of a trapped acquisition."""
    n_c = int(round(COUPLED_US / INTERVAL_US))
    n_ref0 = int(round(REFERENCE_START_US / INTERVAL_US))
    t = np.empty(n_intervals)
    t[:n_c] = np.clip(0.02 + rng.normal(0.0, 0.005, n_c), 0.0, 0.035)
    t[n_c:n_ref0] = np.linspace(0.1, 0.6, n_ref0 - n_c) + rng.uniform(-0.05, 0.05, n_ref0 - n_c)
    t[n_ref0:] = np.clip(1.0 - np.abs(rng.normal(0.0, 0.05, n_intervals - n_ref0)), 0.75, 1.0)
    return t


def _trace_keys(quadratures, n_trapped, n_untrapped):
    keys = [("calibration", "X", 0)]
    for q in quadratures:
        keys += [("trapped", q, i) for i in range(n_trapped)]
        keys += [("untrapped", q, i) for i in range(n_untrapped)]
    return keys


def synthesize_trace_set(plan: SynthesisPlan) -> TraceSet:
    """Lazy, deterministic trace set for ``plan``; identical seeds give identical samples."""
    synth = _Synthesizer(plan)
    for q in plan.quadratures:
        if q not in PHASE_LABELS:
            raise ValueError(f"quadrature label must be X or P, got {q!r}")
        s = plan.models[q].values
        if np.any(1.0 + plan.detector.eta_d * (s - 1.0) < 0):
            raise ValueError("model spectrum requires a negative noise variance")
    meta = {
        "format_version": FORMAT_VERSION,
        "preset": plan.preset,
        "seed": int(plan.seed),
        "quadratures": list(plan.quadratures),
        "detector": plan.detector.as_dict(),
        "drift": {"zeta": plan.drift.zeta, "times_us": plan.drift.times_us.tolist(),
                  "profile": plan.drift.profile.tolist()},
        "flux_per_us": plan.flux_per_us,
        "n_trapped": plan.n_trapped,
        "n_untrapped": plan.n_untrapped,
        "quantized": plan.quantize,
        "tone_mhz": plan.tone_mhz,
        "tone_mdb": plan.tone_mdb,
        "truth": {q: {"theta": m.theta, "eta": m.eta, "freq_mhz": m.freq_mhz.tolist(),
                      "s_linear": m.values.tolist()} for q, m in plan.models.items()},
    }
    keys = _trace_keys(plan.quadratures, plan.n_trapped, plan.n_untrapped)
    return TraceSet(meta, keys, synth.acquisition)


# --- trace file format ---------------------------------------------------------------
#
#   8 bytes  magic "SQZTRACE"
#   4 bytes  little-endian uint32 header length H
#   H bytes  UTF-8 JSON header
#   8*n_intervals bytes  float64 LE transmission records
#   2*n_samples bytes    int16 LE samples

def write_acquisition(path, acq: Acquisition, meta: dict):
    samples = np.asarray(acq.samples)
    if samples.dtype != np.int16:
        raise ValueError("only quantised (int16) records can be written")
    header = {
        "format_version": FORMAT_VERSION,
        "sample_rate_mhz": acq.sample_rate_mhz,
        "adc_bits": meta["detector"]["adc_bits"],
        "seed": meta["seed"],
        "preset": meta["preset"],
        "phase_label": acq.phase_label,
        "quadrature": acq.quadrature,
        "kind": acq.kind,
        "index": acq.index,
        "interval_us": acq.interval_us,
        "n_intervals": int(acq.transmission.size),
        "n_samples": int(samples.size),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.asarray(acq.transmission, dtype="<f8").tobytes())
        fh.write(samples.astype("<i2").tobytes())


def read_acquisition(path) -> Acquisition:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a trace file")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n).decode())
        trans = np.frombuffer(fh.read(8 * header["n_intervals"]), dtype="<f8").astype(float)
        samples = np.frombuffer(fh.read(2 * header["n_samples"]), dtype="<i2").astype(np.int16)
    if samples.size != header["n_samples"]:
        raise ValueError(f"{path}: truncated sample block")
    return Acquisition(header["kind"], header["quadrature"], header["index"], samples, trans,
                       header["sample_rate_mhz"], header["interval_us"])


def _file_name(key):
    return f"{key[0]}_{key[1]}_{key[2]:05d}.sqt"


def save_trace_set(ts: TraceSet, directory, limit: int | None = None) -> Path:
    """Write every acquisition (optionally only the first ``limit`` per kind and quadrature)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for key in ts.keys:
        if limit is not None and key[2] >= limit:
            continue
        write_acquisition(directory / _file_name(key), ts.get(key), ts.meta)
        written.append(list(key))
    manifest = dict(ts.meta, files=written)
    (directory / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return directory


def load_trace_set(directory) -> TraceSet:
    directory = Path(directory)
    meta = json.loads((directory / "manifest.json").read_text())
    keys = [tuple(k) for k in meta.pop("files")]

    def loader(key):
        return read_acquisition(directory / _file_name(key))

    return TraceSet(meta, keys, loader)
