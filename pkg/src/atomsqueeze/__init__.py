"""Quadrature squeezing of a driven atom-cavity system: closed forms, a
master-equation oracle and a synthetic homodyne analysis chain."""
from .params import SystemParams, ExperimentPreset, preset, mhz, to_mhz
from .analytic import (steady_state_moments, squeezing_kernel, quadrature_autocorrelation,
                       squeezing_spectrum, optimal_angle, to_mdb, from_mdb)

__version__ = "0.1.0"
