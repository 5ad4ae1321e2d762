"""Synthesis -> analysis -> comparison with the embedded model."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..analytic import (optimal_angle, photon_flux, quadrature_autocorrelation,
                        squeezing_spectrum)
from ..params import TWO_PI, ExperimentPreset, preset as get_preset
from .detector import DetectorModel
from .estimate import (AutocorrAccumulator, AutocorrEstimate, SpectrumAccumulator,
                       SpectrumEstimate, band_level, chi2_per_bin, classify_intervals,
                       detector_response_estimate, differential_autocorrelation,
                       differential_spectrum, drift_factor, expected_differential_autocorrelation,
                       expected_differential_spectrum, normalization_factor, raw_log_variance,
                       DetectorResponse, MIN_REFERENCE_US)
from .synth import (DriftModel, SynthesisPlan, TraceSet, desk_scale_counts,
                    synthesize_trace_set)

DEFAULT_SEED = 20110708
MODEL_DF_MHZ = 0.01
MODEL_FMAX_MHZ = 50.0
FLAT_ABOVE_MHZ = 30.0


def model_spectra(ep: ExperimentPreset, df_mhz: float = MODEL_DF_MHZ,
                  fmax_mhz: float = MODEL_FMAX_MHZ, null: bool = False) -> dict:
    """X (most squeezed angle) and P (conjugate) spectra seen through eta_out.

    The phase label 0 is placed on the optimal angle; ``null`` returns flat
    shot-noise models.
    """
    omega = TWO_PI * np.arange(0.0, fmax_mhz + df_mhz / 2, df_mhz)
    theta0, _ = optimal_angle(ep.params)
    out = {}
    for label, theta in (("X", theta0), ("P", theta0 + math.pi / 2)):
        s = squeezing_spectrum(ep.params, theta, ep.eta_out, omega)
        if null:
            s = type(s)(s.theta, s.eta, s.omega_grid, np.ones_like(s.values))
        out[label] = s
    return out


def build_plan(preset_name: str = "configA", scale: float = 0.05, seed: int = DEFAULT_SEED,
               detector: DetectorModel | None = None, drift: DriftModel | None = None,
               n_trapped: int | None = None, n_untrapped: int | None = None,
               quantize: bool = True, tone_mhz: float | None = None, tone_mdb: float = 200.0,
               null: bool = False, convention: str = "input-coupling") -> SynthesisPlan:
    ep = get_preset(preset_name, convention)
    detector = detector or DetectorModel(eta_d=ep.eta_d)
    drift = drift if drift is not None else DriftModel.linear(0.998)
    nt, nu = desk_scale_counts(scale)
    return SynthesisPlan(
        preset=preset_name,
        models=model_spectra(ep, null=null),
        detector=detector,
        drift=drift,
        flux_per_us=photon_flux(ep.p_in, ep.params.wavelength),
        n_trapped=n_trapped if n_trapped is not None else nt,
        n_untrapped=n_untrapped if n_untrapped is not None else nu,
        seed=seed,
        quantize=quantize,
        tone_mhz=tone_mhz,
        tone_mdb=tone_mdb,
    )


@dataclass
class QuadratureResult:
    quadrature: str
    coupled_ac: AutocorrEstimate
    reference_ac: AutocorrEstimate
    coupled_spec: SpectrumEstimate
    reference_spec: SpectrumEstimate
    diff_ac: AutocorrEstimate
    diff_spec: SpectrumEstimate


@dataclass
class PipelineResult:
    quadratures: dict
    drift: DriftModel
    response: DetectorResponse
    normalization: float
    alpha2: float
    eta_d: float
    n_intervals: dict = field(default_factory=dict)
    elapsed_s: float = 0.0


def _merge(accs):
    first = accs[0]
    merged = AutocorrAccumulator.__new__(AutocorrAccumulator)
    merged.__dict__.update(first.__dict__)
    merged.s1 = sum(a.s1 for a in accs)
    merged.s2 = sum(a.s2 for a in accs)
    merged.n = sum(a.n for a in accs)
    return merged


def analyze_trace_set(ts: TraceSet, alpha2: float = 2.0, fwhm_mhz: float = 1.0,
                      eta_d: float | None = None,
                      min_reference_us: float = MIN_REFERENCE_US) -> PipelineResult:
    """Run the full estimator chain over a trace set, one acquisition at a time."""
    t0 = time.perf_counter()
    det = ts.detector
    eta_d = det.eta_d if eta_d is None else eta_d
    dt = det.dt_us
    drift = drift_factor(ts.select(kind="untrapped"))

    cal = list(ts.select(kind="calibration"))
    norm = normalization_factor(cal[0].samples, alpha2=alpha2, eta_d=eta_d) if cal else float("nan")

    acc = {}
    counts = {}
    for q in ts.quadratures:
        ac_c, ac_r = AutocorrAccumulator(dt), AutocorrAccumulator(dt)
        sp_c, sp_r = SpectrumAccumulator(dt), SpectrumAccumulator(dt)
        for a in ts.select(kind="trapped", quadrature=q):
            labels = classify_intervals(a.transmission)
            n = a.samples_per_interval
            blocks = np.asarray(a.samples[:labels.size * n], dtype=np.float64).reshape(labels.size, n)
            coupled, ref = blocks[labels == "coupled"], blocks[labels == "reference"]
            ac_c.add(coupled)
            ac_r.add(ref)
            sp_c.add(coupled)
            sp_r.add(ref)
        acc[q] = (ac_c, ac_r, sp_c, sp_r)
        counts[q] = {"coupled": ac_c.n, "reference": ac_r.n}

    response = detector_response_estimate(_merge([v[1] for v in acc.values()]).result(), dt,
                                          min_reference_us=min_reference_us)
    out = {}
    for q, (ac_c, ac_r, sp_c, sp_r) in acc.items():
        c_ac, r_ac = ac_c.result(), ac_r.result()
        c_sp, r_sp = sp_c.result(), sp_r.result()
        out[q] = QuadratureResult(
            quadrature=q,
            coupled_ac=c_ac, reference_ac=r_ac, coupled_spec=c_sp, reference_spec=r_sp,
            diff_ac=differential_autocorrelation(c_ac, r_ac, drift, norm),
            diff_spec=differential_spectrum(c_sp, r_sp, drift, fwhm_mhz, eta_d),
        )
    return PipelineResult(out, drift, response, norm, alpha2, eta_d, counts,
                          time.perf_counter() - t0)


@dataclass
class RoundTripReport:
    chi2_per_bin: dict          # per quadrature and "combined"
    zeta: float
    zeta_std_err: float
    zeta_true: float
    flat_level_mdb: dict        # quadrature -> (level, err)
    antisymmetry_chi2: float
    recovered_min: dict         # quadrature -> (freq_mhz, mdB)
    truth_min: dict
    elapsed_s: float = 0.0

    def as_dict(self):
        return {
            "chi2_per_bin": self.chi2_per_bin,
            "zeta": self.zeta,
            "zeta_std_err": self.zeta_std_err,
            "zeta_true": self.zeta_true,
            "flat_level_mdb": {k: {"level": v[0], "std_err": v[1]}
                               for k, v in self.flat_level_mdb.items()},
            "antisymmetry_chi2": self.antisymmetry_chi2,
            "recovered_min": {k: {"freq_mhz": v[0], "mdb": v[1]} for k, v in self.recovered_min.items()},
            "truth_min": {k: {"freq_mhz": v[0], "mdb": v[1]} for k, v in self.truth_min.items()},
            "elapsed_s": self.elapsed_s,
        }


def fit_mask(freq_mhz):
    """Bins used in chi^2: everything but DC and Nyquist."""
    m = np.ones(freq_mhz.size, dtype=bool)
    m[0] = m[-1] = False
    return m


def truth_on_grid(ts: TraceSet, result: PipelineResult, fwhm_mhz: float = 1.0) -> dict:
    """Embedded model spectra passed through the analysis smoothing, in mdB."""
    out = {}
    for q, (f_model, s_model) in ts.truth().items():
        f = result.quadratures[q].diff_spec.freq_mhz
        s = np.interp(f, f_model, s_model, right=1.0)
        out[q] = expected_differential_spectrum(f, s, result.eta_d, fwhm_mhz)
    return out


def evaluate_round_trip(ts: TraceSet, result: PipelineResult, fwhm_mhz: float = 1.0) -> RoundTripReport:
    truth = truth_on_grid(ts, result, fwhm_mhz)
    chi2, flat, rec_min, tru_min = {}, {}, {}, {}
    resid, errs = [], []
    for q, qr in result.quadratures.items():
        d = qr.diff_spec
        mask = fit_mask(d.freq_mhz)
        chi2[q] = chi2_per_bin(d.values, truth[q], d.std_err, mask)
        resid.append((d.values - truth[q])[mask])
        errs.append(d.std_err[mask])
        flat[q] = band_level(d, raw_log_variance(qr.coupled_spec, qr.reference_spec),
                             FLAT_ABOVE_MHZ, result.eta_d,
                             result.drift.zeta_std_err / result.drift.zeta)
        i = int(np.argmin(d.values[1:-1])) + 1
        rec_min[q] = (float(d.freq_mhz[i]), float(d.values[i]))
        j = int(np.argmin(truth[q][1:-1])) + 1
        tru_min[q] = (float(d.freq_mhz[j]), float(truth[q][j]))
    r = np.concatenate(resid)
    e = np.concatenate(errs)
    chi2["combined"] = float(np.mean((r / e) ** 2))
    anti = float("nan")
    if {"X", "P"} <= set(result.quadratures):
        x, p = result.quadratures["X"].diff_spec, result.quadratures["P"].diff_spec
        mask = fit_mask(x.freq_mhz)
        anti = chi2_per_bin(x.values + p.values, np.zeros_like(x.values),
                            np.hypot(x.std_err, p.std_err), mask)
    return RoundTripReport(chi2, result.drift.zeta, result.drift.zeta_std_err,
                           float(ts.meta["drift"]["zeta"]), flat, anti, rec_min, tru_min)


def expected_autocorrelations(ts: TraceSet, result: PipelineResult, preset_name: str | None = None):
    """D-convolved, normalised theory curves matching ``diff_ac`` of each quadrature."""
    ep = get_preset(preset_name or ts.meta["preset"])
    out = {}
    for q, qr in result.quadratures.items():
        theta = ts.meta["truth"][q]["theta"]
        theory = quadrature_autocorrelation(ep.params, theta, qr.diff_ac.lags_us)
        out[q] = expected_differential_autocorrelation(
            theory, result.response, result.eta_d, ep.eta_out, ep.params.kappa,
            result.alpha2, ts.meta["flux_per_us"])
    return out


def run_round_trip(preset_name: str = "configA", scale: float = 0.05, seed: int = DEFAULT_SEED,
                   **plan_kwargs):
    """Synthesize, analyze and score; returns (trace_set, result, report)."""
    t0 = time.perf_counter()
    ts = synthesize_trace_set(build_plan(preset_name, scale, seed, **plan_kwargs))
    result = analyze_trace_set(ts)
    report = evaluate_round_trip(ts, result)
    report.elapsed_s = time.perf_counter() - t0
    return ts, result, report
