"""Closed forms against the master-equation oracle."""
from __future__ import annotations

import math
import time

import numpy as np

from .analytic import (optimal_angle, quadrature_autocorrelation, squeezing_spectrum,
                       steady_state_moments, to_mdb)
from .oracle import (HilbertSpace, build_liouvillian, build_operators, expectation_values,
                     full_quadrature_autocorrelation, numeric_spectrum, steady_state)
from .params import TWO_PI, ExperimentPreset, mhz

MOMENT_KEYS = ("a", "sigma", "a2", "a_sigma", "delta_a2")


def _rel(x, ref):
    return abs(x - ref) / abs(ref)


def oracle_comparison(ep: ExperimentPreset, epsilon_mhz: float | None = 0.1, n_max: int = 8,
                      motion: str = "decay", tau_max_us: float = 1.0, tau_step_us: float = 0.005,
                      f_max_mhz: float = 30.0, f_step_mhz: float = 0.05) -> dict:
    """Deviation report at a weak drive ``epsilon_mhz`` (None keeps the preset drive).

    Spectrum depths are compared at the weak drive and also after scaling
    (S - 1) by (eps_preset / eps)^2 to the preset drive, which is how the
    weak-drive agreement transfers to the operating point.
    """
    t0 = time.perf_counter()
    p_full = ep.params
    p = p_full if epsilon_mhz is None else p_full.replace(epsilon=mhz(epsilon_mhz))
    space = HilbertSpace(n_max)
    include_motion = motion != "none"

    L = build_liouvillian(p, space, motion)
    rho = steady_state(L)
    num = expectation_values(rho, build_operators(space))
    ana = steady_state_moments(p, include_motion).as_dict()
    moments = {k: {"analytic": ana[k], "oracle": num[k], "rel_dev": _rel(num[k], ana[k])}
               for k in MOMENT_KEYS}

    theta, _ = optimal_angle(p, include_motion)
    tau = np.arange(0.0, tau_max_us + tau_step_us / 2, tau_step_us)
    ac_a = quadrature_autocorrelation(p, theta, tau, include_motion).values
    ac_o = full_quadrature_autocorrelation(p, theta, space, tau, motion).values
    ac_dev = float(np.max(np.abs(ac_o - ac_a)) / np.max(np.abs(ac_a)))

    omega = TWO_PI * np.arange(f_step_mhz, f_max_mhz + f_step_mhz / 2, f_step_mhz)
    s_a = squeezing_spectrum(p, theta, ep.eta_out, omega, include_motion).values
    s_o = numeric_spectrum(p, theta, ep.eta_out, space, omega, motion).values
    scale = (p_full.epsilon / p.epsilon) ** 2
    i_a, i_o = int(np.argmin(s_a)), int(np.argmin(s_o))
    spec = {
        "eta": ep.eta_out,
        "theta": theta,
        "weak": {"analytic_min_mdb": float(to_mdb(s_a[i_a])), "oracle_min_mdb": float(to_mdb(s_o[i_o])),
                 "analytic_min_freq_mhz": float(omega[i_a] / TWO_PI),
                 "oracle_min_freq_mhz": float(omega[i_o] / TWO_PI)},
        "scaled_to_preset": {"analytic_min_mdb": float(to_mdb(1 + scale * (s_a[i_a] - 1))),
                             "oracle_min_mdb": float(to_mdb(1 + scale * (s_o[i_o] - 1)))},
        "max_rel_dev_s_minus_1": float(np.max(np.abs(s_o - s_a)) / np.max(np.abs(s_a - 1))),
    }
    for block in ("weak", "scaled_to_preset"):
        b = spec[block]
        b["min_diff_mdb"] = abs(b["analytic_min_mdb"] - b["oracle_min_mdb"])
    return {
        "preset": ep.name,
        "epsilon_mhz": p.epsilon / TWO_PI,
        "preset_epsilon_mhz": p_full.epsilon / TWO_PI,
        "n_max": n_max,
        "motion": motion,
        "moments": moments,
        "max_moment_rel_dev": max(m["rel_dev"] for m in moments.values()),
        "autocorrelation_max_rel_dev": ac_dev,
        "spectrum": spec,
        "incoherent_photon_number": num["incoherent"],
        "elapsed_s": time.perf_counter() - t0,
    }


def log_slope(x, y) -> float:
    """Least-squares slope of log|y| against log x."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)),
                            np.log(np.abs(np.asarray(y, dtype=float))), 1)[0])


def scaling_slopes(ep: ExperimentPreset, eps_mhz=(0.01, 0.02, 0.05, 0.1), n_max: int = 6,
                   motion: str = "decay") -> dict:
    """log-log slopes of |<Da^2>| (closed form) and <Da+ Da> (oracle) against epsilon."""
    eps = np.asarray(eps_mhz, dtype=float)
    include_motion = motion != "none"
    da2, inc = [], []
    space = HilbertSpace(n_max)
    for e in eps:
        p = ep.params.replace(epsilon=mhz(e))
        da2.append(abs(steady_state_moments(p, include_motion).delta_a2))
        rho = steady_state(build_liouvillian(p, space, motion))
        inc.append(expectation_values(rho, build_operators(space))["incoherent"])
    return {"epsilon_mhz": eps.tolist(), "delta_a2": da2, "incoherent": inc,
            "delta_a2_slope": log_slope(eps, da2), "incoherent_slope": log_slope(eps, inc),
            "decades": math.log10(eps[-1] / eps[0])}
