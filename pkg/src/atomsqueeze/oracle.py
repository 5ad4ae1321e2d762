"""Brute-force Lindblad model on a truncated atom x Fock space.

Independent numerical ground truth for the closed forms in
:mod:`atomsqueeze.analytic`: no weak-drive approximation, the incoherent part
<Da+ Da> included. Density matrices are vectorised row-major, so
``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .analytic import AutocorrelationSeries, SpectrumSeries
from .errors import (CutoffWarning, DegenerateSteadyStateError, DimensionError,
                     DomainError, IntegratorError, SteadyStateError)
from .params import SystemParams, require_valid

MAX_SUPEROPERATOR_ROWS = 4096  # dim**2; N <= 31
MOTION_MODELS = ("decay", "dephasing", "none")


@dataclass(frozen=True)
class HilbertSpace:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise DomainError("Fock truncation must be an integer >= 2")

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)


@dataclass(frozen=True)
class Operators:
    """Dense operators on atom (slow index: g, e) x Fock (fast index)."""

    space: HilbertSpace
    a: np.ndarray
    a_dag: np.ndarray
    sigma: np.ndarray
    sigma_dag: np.ndarray
    sigma_z: np.ndarray
    identity: np.ndarray

    def x_theta(self, theta: float) -> np.ndarray:
        return 0.5 * (np.exp(-1j * theta) * self.a + np.exp(1j * theta) * self.a_dag)


def build_operators(space: HilbertSpace) -> Operators:
    n = space.n_max + 1
    ladder = np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)
    lower = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e| with g=0, e=1
    a = np.kron(np.eye(2), ladder)
    sigma = np.kron(lower, np.eye(n))
    sigma_dag = sigma.conj().T
    sigma_z = sigma_dag @ sigma - sigma @ sigma_dag
    return Operators(space, a, a.conj().T.copy(), sigma, sigma_dag, sigma_z,
                     np.eye(space.dim, dtype=complex))


def hamiltonian(p: SystemParams, ops: Operators) -> np.ndarray:
    """Jaynes-Cummings plus probe Hamiltonian (hbar = 1) in the probe frame."""
    a, ad, s, sd = ops.a, ops.a_dag, ops.sigma, ops.sigma_dag
    return (-p.delta_c * ad @ a - p.delta_a * sd @ s
            + p.g * (ad @ s + a @ sd) + p.epsilon * (ad + a))


@dataclass(frozen=True)
class Superoperator:
    matrix: np.ndarray
    space: HilbertSpace
    params: SystemParams
    motion: str

    @property
    def dim(self):
        return self.space.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.matrix @ rho.reshape(-1)).reshape(d, d)


def _spre(x):
    return np.kron(x, np.eye(x.shape[0]))


def _spost(x):
    return np.kron(np.eye(x.shape[0]), x.T)


def _dissipator(c, rate):
    """rate * (2 c rho c+ - rho c+c - c+c rho)."""
    cdc = c.conj().T @ c
    return rate * (2.0 * np.kron(c, c.conj()) - _spre(cdc) - _spost(cdc))


def build_liouvillian(p: SystemParams, space: HilbertSpace,
                      motion: str = "decay") -> Superoperator:
    """Master-equation generator with cavity decay, spontaneous emission and motion.

    ``motion`` selects how ``gamma_motion`` enters: ``decay`` adds it to the
    dipole decay rate (an extra, unobserved emission channel), ``dephasing``
    adds a pure dephasing term (gamma_motion/4) * L[sigma_z] which broadens the
    dipole by the same amount, ``none`` ignores it.
    """
    require_valid(p)
    if motion not in MOTION_MODELS:
        raise DomainError(f"unknown motion model {motion!r}")
    if space.dim ** 2 > MAX_SUPEROPERATOR_ROWS:
        raise DimensionError(f"superoperator with {space.dim ** 2} rows exceeds the "
                             f"{MAX_SUPEROPERATOR_ROWS}-row limit")
    ops = build_operators(space)
    h = hamiltonian(p, ops)
    gamma = p.gamma + (p.gamma_motion if motion == "decay" else 0.0)
    mat = -1j * (_spre(h) - _spost(h))
    mat += _dissipator(ops.a, p.kappa)
    mat += _dissipator(ops.sigma, gamma)
    if motion == "dephasing" and p.gamma_motion > 0:
        mat += _dissipator(ops.sigma_z, p.gamma_motion / 4.0)
    return Superoperator(mat, space, p, motion)


def trace_functional(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex).reshape(-1)


def steady_state(L: Superoperator, check_kernel: bool = True, tol: float = 1e-9) -> np.ndarray:
    """Solve L rho = 0, Tr rho = 1 by replacing one row of L with the trace functional."""
    d = L.dim
    mat = L.matrix
    if check_kernel and d * d <= 1600:
        sv = scipy.linalg.svdvals(mat)
        scale = sv[0]
        if sv[-2] <= 1e-10 * scale:
            raise DegenerateSteadyStateError(
                f"Liouvillian kernel is not one-dimensional (singular values {sv[-2]:.3g}, "
                f"{sv[-1]:.3g})")
    bordered = mat.copy()
    tr = trace_functional(d)
    # replace the row of the first diagonal element: its information is redundant with Tr
    bordered[0, :] = tr
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    try:
        vec = np.linalg.solve(bordered, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSteadyStateError(f"bordered steady-state system is singular: {exc}") from exc
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    residual = float(np.linalg.norm(mat @ rho.reshape(-1)) / max(np.linalg.norm(mat), 1.0))
    if not np.isfinite(residual) or residual > tol:
        raise SteadyStateError(f"steady-state residual {residual:.3g} above {tol:g}", residual)
    return rho


def density_matrix_checks(rho: np.ndarray) -> dict:
    """Hermiticity defect, trace and smallest eigenvalue of ``rho``."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return {"hermiticity": herm, "trace": complex(np.trace(rho)), "min_eigenvalue": float(evals[0])}


def expectation_values(rho: np.ndarray, ops: Operators) -> dict:
    """Static moments Tr(O rho), including the incoherent occupation <Da+ Da>."""
    def ev(op):
        return complex(np.trace(op @ rho))

    a, s = ops.a, ops.sigma
    m = {
        "identity": ev(ops.identity),
        "a": ev(a),
        "sigma": ev(s),
        "a2": ev(a @ a),
        "a_sigma": ev(a @ s),
        "n": ev(ops.a_dag @ a).real,
        "excited": ev(ops.sigma_dag @ s).real,
        "sigma_z": ev(ops.sigma_z).real,
    }
    m["delta_a2"] = m["a2"] - m["a"] ** 2
    m["delta_a_delta_sigma"] = m["a_sigma"] - m["a"] * m["sigma"]
    m["incoherent"] = m["n"] - abs(m["a"]) ** 2
    return m


@dataclass(frozen=True)
class CorrelationResult:
    """<DA(tau) DB(0)> in the steady state."""

    tau_grid: np.ndarray
    values: np.ndarray
    labels: tuple
    diagnostics: dict = field(default_factory=dict)


def _is_uniform(tau):
    if tau.size < 3:
        return True
    steps = np.diff(tau)
    return np.allclose(steps, steps[0], rtol=1e-9, atol=1e-15)


def spectral_radius_estimate(mat: np.ndarray) -> float:
    """Upper bound on |eigenvalue| of ``mat`` (infinity norm)."""
    return float(np.max(np.sum(np.abs(mat), axis=1)))


def _rk4(mat, v, t_span, h):
    n = max(1, int(math.ceil(t_span / h)))
    step = t_span / n
    for _ in range(n):
        k1 = mat @ v
        k2 = mat @ (v + 0.5 * step * k1)
        k3 = mat @ (v + 0.5 * step * k2)
        k4 = mat @ (v + step * k3)
        v = v + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return v, n


def propagate(mat: np.ndarray, v0: np.ndarray, tau_grid, method: str = "auto",
              rtol: float = 1e-8):
    """Vectors exp(mat * tau) v0 for every tau in the increasing grid ``tau_grid``.

    ``expm``: cached one-step propagator, uniform grids only.
    ``rk4``: fixed-step fourth order with h <= 1/(20 rho(mat)); the last
    point is repeated at half the step and the Richardson estimate must stay
    below ``rtol`` relative to the largest propagated norm.
    """
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size == 0:
        raise DomainError("tau grid must be a non-empty 1-D array")
    if tau[0] < 0 or np.any(np.diff(tau) < 0):
        raise DomainError("tau grid must be non-negative and increasing")
    if method == "auto":
        method = "expm" if _is_uniform(tau) else "rk4"
    out = np.empty((tau.size, v0.size), dtype=complex)
    diag = {"method": method}
    if method == "expm":
        if not _is_uniform(tau):
            raise DomainError("expm propagation needs a uniform grid")
        v = scipy.linalg.expm(mat * tau[0]) @ v0 if tau[0] > 0 else v0.copy()
        out[0] = v
        if tau.size > 1:
            step = scipy.linalg.expm(mat * (tau[1] - tau[0]))
            for i in range(1, tau.size):
                v = step @ v
                out[i] = v
        return out, diag
    if method != "rk4":
        raise DomainError(f"unknown propagation method {method!r}")
    h = 1.0 / (20.0 * max(spectral_radius_estimate(mat), 1e-12))
    v = v0.copy()
    t_prev = 0.0
    steps = 0
    for i, t in enumerate(tau):
        if t > t_prev:
            v, n = _rk4(mat, v, t - t_prev, h)
            steps += n
        out[i] = v
        t_prev = t
    # Richardson check on the whole span with half the step
    t_end = tau[-1]
    if t_end > 0:
        fine, _ = _rk4(mat, v0.copy(), t_end, h / 2.0)
        err = float(np.linalg.norm(out[-1] - fine)) * 16.0 / 15.0
        scale = max(float(np.max(np.linalg.norm(out, axis=1))), 1e-300)
        diag.update(step=h, steps=steps, richardson_error=err / scale)
        if not np.isfinite(err) or err / scale > rtol:
            raise IntegratorError(
                f"RK4 Richardson error {err / scale:.3g} exceeds {rtol:g}", diag)
    return out, diag


def two_time_correlation(L: Superoperator, A: np.ndarray, B: np.ndarray, rho_ss: np.ndarray,
                         tau_grid, method: str = "auto", labels=("A", "B")) -> CorrelationResult:
    """Quantum regression: Tr(A exp(L tau)[(B - <B>) rho_ss])."""
    d = L.dim
    b_mean = np.trace(B @ rho_ss)
    deformed = ((B - b_mean * np.eye(d)) @ rho_ss).reshape(-1)
    states, diag = propagate(L.matrix, deformed, tau_grid, method)
    # Tr(A X) = sum_ij A_ji X_ij
    values = states @ A.T.reshape(-1)
    return CorrelationResult(np.asarray(tau_grid, dtype=float).copy(), values, tuple(labels), diag)


def _solve_case(p, space, motion):
    L = build_liouvillian(p, space, motion)
    rho = steady_state(L)
    return L, rho, build_operators(space)


def full_quadrature_autocorrelation(p: SystemParams, theta: float, space: HilbertSpace,
                                    tau_grid, motion: str = "decay",
                                    method: str = "auto") -> AutocorrelationSeries:
    """<:DX_theta(tau) DX_theta(0):> = 1/2 Re[e^{-2i theta} <Da(tau)Da(0)>] + 1/2 Re<Da+(tau)Da(0)>."""
    L, rho, ops = _solve_case(p, space, motion)
    g2 = two_time_correlation(L, ops.a, ops.a, rho, tau_grid, method).values
    g1 = two_time_correlation(L, ops.a_dag, ops.a, rho, tau_grid, method).values
    vals = 0.5 * np.real(np.exp(-2j * theta) * g2) + 0.5 * np.real(g1)
    return AutocorrelationSeries(float(theta), np.asarray(tau_grid, dtype=float).copy(), vals)


def slowest_decay_rate(L: Superoperator) -> float:
    """Smallest non-zero |Re(lambda)| of the Liouvillian."""
    ev = np.linalg.eigvals(L.matrix)
    rates = np.sort(np.abs(ev.real))
    nonzero = rates[rates > 1e-9 * max(rates[-1], 1.0)]
    return float(nonzero[0])


def _resolvent_cosine(L, A, deformed, rho_ss, omega):
    """int_0^inf cos(W tau) Tr(A exp(L tau) deformed) dtau for a traceless ``deformed``."""
    d = L.dim
    # shift the stationary eigenvalue away from zero: exact on traceless vectors
    proj = np.outer(rho_ss.reshape(-1), trace_functional(d))
    base = L.matrix - proj
    eye = np.eye(d * d)
    a_vec = A.T.reshape(-1)
    out = np.empty(len(omega), dtype=complex)
    for i, w in enumerate(omega):
        plus = np.linalg.solve(base + 1j * w * eye, -deformed)
        minus = np.linalg.solve(base - 1j * w * eye, -deformed) if w != 0 else plus
        out[i] = 0.5 * (a_vec @ plus + a_vec @ minus)
    return out


def numeric_spectrum(p: SystemParams, theta: float, eta: float, space: HilbertSpace,
                     omega_grid, motion: str = "decay", method: str = "resolvent",
                     tau_max: float | None = None, tau_step: float | None = None) -> SpectrumSeries:
    """S(W) = 1 + 8 eta kappa int_0^inf cos(W tau) <:DX(tau)DX(0):> dtau from the full model.

    ``resolvent`` evaluates the transform exactly through (L +- iW)^-1;
    ``quadrature`` propagates to ``tau_max`` (default 12 lifetimes) and
    integrates with Simpson's rule, warning when the window is shorter than ten
    lifetimes.
    """
    if not 0 < eta <= 1:
        raise DomainError("eta must lie in (0, 1]")
    omega = np.asarray(omega_grid, dtype=float)
    L, rho, ops = _solve_case(p, space, motion)
    d = space.dim

    def deformed(B):
        return ((B - np.trace(B @ rho) * np.eye(d)) @ rho).reshape(-1)

    if method == "resolvent":
        g2 = _resolvent_cosine(L, ops.a, deformed(ops.a), rho, omega)
        g1 = _resolvent_cosine(L, ops.a_dag, deformed(ops.a), rho, omega)
        corr = 0.5 * np.real(np.exp(-2j * theta) * g2) + 0.5 * np.real(g1)
    elif method == "quadrature":
        from scipy.integrate import simpson

        lifetime = 1.0 / slowest_decay_rate(L)
        if tau_max is None:
            tau_max = 12.0 * lifetime
        elif tau_max < 10.0 * lifetime:
            warnings.warn(f"tau cutoff {tau_max:g} us is below 10 lifetimes ({10 * lifetime:.3g} us)",
                          CutoffWarning, stacklevel=2)
        if tau_step is None:
            tau_step = min(lifetime, 2 * math.pi / max(np.max(np.abs(omega)), 1.0)) / 40.0
        n = int(math.ceil(tau_max / tau_step)) + 1
        tau = np.linspace(0.0, tau_max, n)
        series = full_quadrature_autocorrelation(p, theta, space, tau, motion)
        corr = np.array([simpson(np.cos(w * tau) * series.values, x=tau) for w in omega])
    else:
        raise DomainError(f"unknown spectrum method {method!r}")
    values = 1.0 + 8.0 * eta * p.kappa * corr
    return SpectrumSeries(float(theta), float(eta), omega.copy(), values)


@dataclass(frozen=True)
class ConvergenceEntry:
    n_max: int
    moments: dict
    spectrum_min: float      # linear
    spectrum_min_omega: float


@dataclass(frozen=True)
class ConvergenceReport:
    entries: list
    converged_n: int | None
    tolerance: float

    def as_dict(self):
        return {
            "tolerance": self.tolerance,
            "converged_n": self.converged_n,
            "entries": [
                {"n_max": e.n_max,
                 "moments": {k: [v.real, v.imag] if isinstance(v, complex) else v
                             for k, v in e.moments.items()},
                 "spectrum_min": e.spectrum_min,
                 "spectrum_min_omega": e.spectrum_min_omega}
                for e in self.entries
            ],
        }


_SCAN_KEYS = ("a", "sigma", "a2", "a_sigma", "delta_a2", "n")


def convergence_scan(p: SystemParams, theta: float, n_list, omega_grid=None, eta: float = 1.0,
                     motion: str = "decay", tol: float = 1e-6) -> ConvergenceReport:
    """Moments and spectrum minimum for each truncation in the ascending ``n_list``.

    The first N whose moments and spectrum minimum all differ from the
    previous N by less than ``tol`` (relative) is reported as converged.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError("truncation list must be strictly ascending")
    if omega_grid is None:
        omega_grid = 2 * math.pi * np.linspace(0.0, 30.0, 61)
    entries = []
    converged = None
    for n in n_list:
        space = HilbertSpace(n)
        L, rho, ops = _solve_case(p, space, motion)
        m = expectation_values(rho, ops)
        spec = numeric_spectrum(p, theta, eta, space, omega_grid, motion)
        w, s = spec.minimum()
        entry = ConvergenceEntry(n, {k: m[k] for k in _SCAN_KEYS}, s, w)
        if entries and converged is None:
            prev = entries[-1]
            changes = [abs(entry.moments[k] - prev.moments[k]) / max(abs(entry.moments[k]), 1e-300)
                       for k in _SCAN_KEYS if abs(entry.moments[k]) > 0]
            changes.append(abs((s - 1) - (prev.spectrum_min - 1)) / max(abs(s - 1), 1e-300))
            if max(changes) < tol:
                converged = n
        entries.append(entry)
    return ConvergenceReport(entries, converged, tol)
