"""Weak-excitation closed forms for single-atom quadrature squeezing.

With the atom almost always in its ground state the Heisenberg equations for
<a>, <sigma>, <a^2> and <a sigma> close, and every squeezing observable follows
from the complex detunings of the first two dressed doublets:

* the squeezed cavity field  <Da^2> = -K <sigma>^2,
* its regression  f(tau) = a+ exp(i w1+ tau) + a- exp(i w1- tau),
* the normally ordered quadrature autocorrelation and its spectrum.

Spectra use the shot-noise = 1 convention and are reported in mdB as
``1e4 * log10(S)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (ConfluentManifoldError, DomainError, SingularityError,
                     UndefinedAngleError, WeakDriveWarning)
from .params import (DressedManifold, SystemParams, complex_detunings,
                     dressed_detunings, require_valid)

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299792458.0

WEAK_DRIVE_LIMIT = 0.1  # |<sigma>|^2 above which a warning is issued


def to_mdb(s_linear):
    """Linear noise ratio -> millidecibel."""
    return 1e4 * np.log10(s_linear)


def from_mdb(s_mdb):
    return 10.0 ** (np.asarray(s_mdb) / 1e4)


@dataclass(frozen=True)
class SteadyStateMoments:
    a_mean: complex
    sigma_mean: complex
    a2_mean: complex
    a_sigma_mean: complex
    delta_a2: complex
    delta_a_delta_sigma: complex

    def as_dict(self):
        return {
            "a": self.a_mean,
            "sigma": self.sigma_mean,
            "a2": self.a2_mean,
            "a_sigma": self.a_sigma_mean,
            "delta_a2": self.delta_a2,
            "delta_a_delta_sigma": self.delta_a_delta_sigma,
        }


def _check_weak(sigma):
    if abs(sigma) ** 2 > WEAK_DRIVE_LIMIT:
        warnings.warn(f"|<sigma>|^2 = {abs(sigma) ** 2:.3g} exceeds {WEAK_DRIVE_LIMIT}; "
                      "weak-excitation closed forms are inaccurate", WeakDriveWarning,
                      stacklevel=3)


def steady_state_moments(p: SystemParams, include_motion: bool = True) -> SteadyStateMoments:
    """Steady-state field and atomic moments to lowest order in the drive."""
    require_valid(p)
    w_c, w_a = complex_detunings(p, include_motion)
    g, eps = p.g, p.epsilon
    one = w_a * w_c - g * g
    two = w_c * (w_a + w_c) - g * g
    if one == 0 or two == 0:
        raise SingularityError("vanishing denominator in the steady-state solution")
    a = eps * w_a / one
    sigma = eps * g / one
    a2 = eps ** 2 * (w_a * (w_a + w_c) + g * g) / (two * one)
    a_sigma = eps ** 2 * g * (w_a + w_c) / (two * one)
    delta_a2 = -eps ** 2 * g ** 4 / (two * one ** 2)
    delta_a_delta_sigma = -eps ** 2 * g ** 3 * w_c / (two * one ** 2)
    _check_weak(sigma)
    return SteadyStateMoments(complex(a), complex(sigma), complex(a2), complex(a_sigma),
                              complex(delta_a2), complex(delta_a_delta_sigma))


@dataclass(frozen=True)
class SqueezingKernel:
    k_factor: complex
    sigma_mean: complex
    alpha_plus: complex
    alpha_minus: complex
    manifold1: DressedManifold
    manifold2: DressedManifold

    @property
    def delta_a2(self) -> complex:
        return -self.k_factor * self.sigma_mean ** 2


def squeezing_kernel(p: SystemParams, include_motion: bool = True) -> SqueezingKernel:
    """K factor, <sigma> and the regression weights of f(tau)."""
    require_valid(p)
    m1 = dressed_detunings(p, 1, include_motion)
    m2 = dressed_detunings(p, 2, include_motion)
    wp, wm = m1.omega_plus, m1.omega_minus
    split = wp - wm
    if abs(split) <= 1e-12 * max(abs(wp), abs(wm), 1e-300):
        raise ConfluentManifoldError("w1+ == w1-: f(tau) has no two-exponential form")
    k_factor = 2.0 * p.g ** 2 / (m2.omega_plus * m2.omega_minus)
    sigma = p.epsilon * p.g / (wp * wm)
    _check_weak(sigma)
    return SqueezingKernel(
        k_factor=complex(k_factor),
        sigma_mean=complex(sigma),
        alpha_plus=complex(-wm / split),
        alpha_minus=complex(wp / split),
        manifold1=m1,
        manifold2=m2,
    )


def regression_envelope(kernel: SqueezingKernel, tau):
    """f(tau) for tau >= 0; scalar in, scalar out."""
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise DomainError("f(tau) is defined for tau >= 0 only")
    m1 = kernel.manifold1
    f = (kernel.alpha_plus * np.exp(1j * m1.omega_plus * t)
         + kernel.alpha_minus * np.exp(1j * m1.omega_minus * t))
    return complex(f) if f.ndim == 0 else f


@dataclass(frozen=True)
class AutocorrelationSeries:
    """Normally ordered <:DX_theta(tau) DX_theta(0):> (shot noise = 1/4)."""

    theta: float
    tau_grid: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class SpectrumSeries:
    """Quadrature noise spectrum relative to shot noise (linear, shot noise = 1)."""

    theta: float
    eta: float
    omega_grid: np.ndarray
    values: np.ndarray

    @property
    def freq_mhz(self):
        return self.omega_grid / (2 * math.pi)

    @property
    def mdb(self):
        return to_mdb(self.values)

    def minimum(self):
        """(omega, S) at the lowest bin."""
        i = int(np.argmin(self.values))
        return float(self.omega_grid[i]), float(self.values[i])


def quadrature_autocorrelation(p: SystemParams, theta: float, tau_grid,
                               include_motion: bool = True) -> AutocorrelationSeries:
    """-1/2 Re(exp(-2i theta) K <sigma>^2 f(tau)) on ``tau_grid``."""
    kernel = squeezing_kernel(p, include_motion)
    tau = np.asarray(tau_grid, dtype=float)
    f = regression_envelope(kernel, tau)
    amp = np.exp(-2j * theta) * kernel.k_factor * kernel.sigma_mean ** 2
    values = -0.5 * np.real(amp * f)
    return AutocorrelationSeries(float(theta), tau.copy(), np.asarray(values, dtype=float))


def lorentzian_response(kernel: SqueezingKernel, omega):
    """One-sided cosine transform of f(tau): int_0^inf cos(W tau) f(tau) dtau."""
    wp, wm = kernel.manifold1.omega_plus, kernel.manifold1.omega_minus
    om2 = np.asarray(omega, dtype=float) ** 2
    return -1j * wp * wm / (wp - wm) * (1.0 / (om2 - wm ** 2) - 1.0 / (om2 - wp ** 2))


def squeezing_spectrum(p: SystemParams, theta: float, eta: float, omega_grid,
                       include_motion: bool = True) -> SpectrumSeries:
    """Two-Lorentzian squeezing spectrum seen through a detection efficiency ``eta``.

    S(W) = 1 + 8 eta kappa Re{exp(-2i theta) <Da^2> F(W)}, where F is the
    one-sided cosine transform of f; equivalently
    S = 1 + 8 eta kappa int_0^inf cos(W tau) <:DX(tau)DX(0):> dtau.
    """
    if not 0 < eta <= 1:
        raise DomainError("eta must lie in (0, 1]")
    kernel = squeezing_kernel(p, include_motion)
    omega = np.asarray(omega_grid, dtype=float)
    resp = lorentzian_response(kernel, omega)
    corr = np.real(np.exp(-2j * theta) * kernel.delta_a2 * resp)
    values = 1.0 + 8.0 * eta * p.kappa * 0.5 * corr
    return SpectrumSeries(float(theta), float(eta), omega.copy(), values)


def optimal_angle(p: SystemParams, include_motion: bool = True):
    """Quadrature angle of maximal static squeezing and the normally ordered variance there."""
    d = steady_state_moments(p, include_motion).delta_a2
    if p.g == 0 or p.epsilon == 0 or d == 0:
        raise UndefinedAngleError("no squeezing: <Da^2> vanishes (g = 0 or epsilon = 0)")
    theta = (math.atan2(d.imag, d.real) + math.pi) / 2.0
    return theta, -0.5 * abs(d)


DRIVE_CONVENTIONS = ("input-coupling", "total-kappa")


def photon_flux(p_in: float, wavelength: float) -> float:
    """Photon flux of a beam of power ``p_in`` (W), in photons per microsecond."""
    return p_in * wavelength / (PLANCK * LIGHT_SPEED) * 1e-6


def drive_calibration(p_in: float, wavelength: float, kappa: float,
                      eta_in_fraction: float = 1.0, convention: str = "input-coupling") -> float:
    """Drive amplitude epsilon (rad/us) for an input power ``p_in`` (W).

    ``input-coupling`` feeds the flux through the input-mirror share
    ``eta_in_fraction * kappa`` of the decay; ``total-kappa`` uses all of kappa.
    """
    if convention not in DRIVE_CONVENTIONS:
        raise DomainError(f"unknown drive convention {convention!r}")
    if p_in < 0:
        raise DomainError("input power must be non-negative")
    flux = photon_flux(p_in, wavelength)
    kappa_in = eta_in_fraction * kappa if convention == "input-coupling" else kappa
    return math.sqrt(2.0 * kappa_in * flux)


def photons_per_decay_time(p_in: float, wavelength: float, kappa: float) -> float:
    """Input photons per cavity intensity decay time 1/(2 kappa)."""
    return photon_flux(p_in, wavelength) / (2.0 * kappa)


def mean_photon_number(p: SystemParams, include_motion: bool = False) -> float:
    """Coherent estimate |<a>|^2 of the intracavity photon number."""
    return abs(steady_state_moments(p, include_motion).a_mean) ** 2


def kerr_equivalent(s_min_linear: float, p_in: float) -> float:
    """Effective Kerr response r*eta (1/W) implied by a squeezing depth at power ``p_in``.

    Frequency-domain squeezing <DX~^2> = (S - 1)/4 relative to shot noise 1/4
    equals -r eta p_in / 2 for a weakly squeezing chi(3) medium.
    """
    if p_in == 0:
        raise DomainError("input power must be non-zero")
    dx2 = (s_min_linear - 1.0) / 4.0
    return -2.0 * dx2 / p_in


@dataclass(frozen=True)
class PowerBudget:
    flux: float               # incident photons / us
    scattered_flux: float     # spontaneous emission, photons / us
    mirror_flux: float        # leakage not returning through the input port
    reflected_fraction: float


def power_budget(p: SystemParams, flux: float, eta_out: float) -> PowerBudget:
    """Photon bookkeeping of the incident beam.

    Spontaneous emission 2 gamma |<sigma>|^2 (bare gamma; motion is not
    radiative) and cavity leakage 2 kappa (1 - eta_out) |<a>|^2 through the
    transmission/absorption channels are lost; the rest is counted as
    reflected. This is a flux estimate, not an interference calculation.
    """
    if flux <= 0:
        raise DomainError("incident photon flux must be positive")
    m = steady_state_moments(p, include_motion=False)
    scattered = 2.0 * p.gamma * abs(m.sigma_mean) ** 2
    mirror = 2.0 * p.kappa * (1.0 - eta_out) * abs(m.a_mean) ** 2
    reflected = 1.0 - (scattered + mirror) / flux
    return PowerBudget(flux, scattered, mirror, reflected)
