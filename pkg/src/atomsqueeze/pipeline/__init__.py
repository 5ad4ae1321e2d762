"""Synthetic homodyne records and the interval-gated analysis chain."""
from .detector import DetectorModel
from .estimate import (AutocorrEstimate, DetectorResponse, SpectrumEstimate,
                       autocorrelation_estimate, classify_intervals, convolve_theory,
                       detector_response_estimate, differential_autocorrelation,
                       differential_spectrum, drift_factor, normalization_factor,
                       spectrum_estimate)
from .roundtrip import (analyze_trace_set, build_plan, evaluate_round_trip, run_round_trip)
from .synth import (Acquisition, DriftModel, SynthesisPlan, TraceSet, load_trace_set,
                    read_acquisition, save_trace_set, synthesize_trace_set, write_acquisition)
