"""Physical parameters, experiment presets and the dressed-state ladder.

All frequency-like quantities are angular and expressed in rad/us; times are in
microseconds. Linear frequencies quoted in MHz (nu = omega / 2 pi) are converted
at the edges by :func:`mhz` and :meth:`SystemParams.from_mhz`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, InvalidParamsError

TWO_PI = 2.0 * math.pi

# Rb85 D2 probe line used in the experiment.
PROBE_WAVELENGTH = 780.24e-9

# Per-mirror budget of the symmetric cavity (ppm).
MIRROR_TRANSMISSION_PPM = 2.8
MIRROR_LOSS_PPM = 4.0


def mhz(nu):
    """Linear frequency in MHz -> angular frequency in rad/us."""
    return TWO_PI * nu


def to_mhz(omega):
    """Angular frequency in rad/us -> linear frequency in MHz."""
    return omega / TWO_PI


@dataclass(frozen=True)
class SystemParams:
    """Rates and detunings of the driven atom-cavity system (rad/us)."""

    g: float
    kappa: float
    gamma: float
    delta_c: float = 0.0
    delta_a: float = 0.0
    epsilon: float = 0.0
    gamma_motion: float = 0.0
    wavelength: float = PROBE_WAVELENGTH

    @classmethod
    def from_mhz(cls, g, kappa, gamma, delta_c=0.0, delta_a=0.0, epsilon=0.0,
                 gamma_motion=0.0, wavelength=PROBE_WAVELENGTH):
        return cls(g=mhz(g), kappa=mhz(kappa), gamma=mhz(gamma),
                   delta_c=mhz(delta_c), delta_a=mhz(delta_a),
                   epsilon=mhz(epsilon), gamma_motion=mhz(gamma_motion),
                   wavelength=wavelength)

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def as_mhz(self) -> dict:
        """Frequency fields as linear MHz, for reports."""
        d = asdict(self)
        out = {k + "_mhz": to_mhz(v) for k, v in d.items() if k != "wavelength"}
        out["wavelength_m"] = self.wavelength
        return out


def validate_params(p: SystemParams) -> list[str]:
    """Return the list of violated invariants; empty iff ``p`` is physical."""
    problems = []
    for name in ("g", "kappa", "gamma", "delta_c", "delta_a", "epsilon",
                 "gamma_motion", "wavelength"):
        if not math.isfinite(getattr(p, name)):
            problems.append(f"{name} must be finite")
    if not p.kappa > 0:
        problems.append("kappa must be positive")
    if not p.gamma > 0:
        problems.append("gamma must be positive")
    if p.g < 0:
        problems.append("g must be non-negative")
    if p.epsilon < 0:
        problems.append("epsilon must be non-negative")
    if p.gamma_motion < 0:
        problems.append("gamma_motion must be non-negative")
    if not p.wavelength > 0:
        problems.append("wavelength must be positive")
    return problems


def require_valid(p: SystemParams) -> SystemParams:
    problems = validate_params(p)
    if problems:
        raise InvalidParamsError("; ".join(problems))
    return p


def complex_detunings(p: SystemParams, include_motion: bool = True):
    """Cavity and atom complex detunings ``(w_c, w_a)``.

    The real part is the probe detuning, the imaginary part the field
    (cavity) or dipole (atom) decay rate. Motional decoherence only broadens
    the atom.
    """
    w_c = complex(p.delta_c, p.kappa)
    gamma = p.gamma + (p.gamma_motion if include_motion else 0.0)
    w_a = complex(p.delta_a, gamma)
    return w_c, w_a


@dataclass(frozen=True)
class DressedManifold:
    """Complex detunings of the n-excitation doublet |n+>, |n->."""

    n: int
    omega_plus: complex
    omega_minus: complex

    @property
    def detunings(self):
        return self.omega_plus.real, self.omega_minus.real

    @property
    def linewidths(self):
        return self.omega_plus.imag, self.omega_minus.imag


def _dressed_pair(w_c, w_a, g, n):
    root = np.sqrt(4.0 * n * g * g + (w_c - w_a) ** 2 + 0j)
    centre = (n - 1) * w_c + 0.5 * (w_c + w_a)
    return centre - 0.5 * root, centre + 0.5 * root


def dressed_detunings(p: SystemParams, n: int, include_motion: bool = True) -> DressedManifold:
    """Doublet ``n`` of the Jaynes-Cummings ladder seen from the probe frame.

    Uses the principal branch of the complex square root; the '+' state carries
    the minus sign in front of the root.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"excitation number must be an integer >= 1, got {n!r}")
    w_c, w_a = complex_detunings(p, include_motion)
    plus, minus = _dressed_pair(w_c, w_a, p.g, int(n))
    return DressedManifold(int(n), complex(plus), complex(minus))


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    params: SystemParams
    eta_out: float
    eta_d: float
    p_in: float  # W
    drive_convention: str = "input-coupling"

    def __post_init__(self):
        if not 0 < self.eta_out <= 1:
            raise InvalidParamsError("eta_out must lie in (0, 1]")
        if not 0 < self.eta_d <= 1:
            raise InvalidParamsError("eta_d must lie in (0, 1]")


def output_port_fraction(transmission_ppm=MIRROR_TRANSMISSION_PPM,
                         loss_ppm=MIRROR_LOSS_PPM) -> float:
    """Fraction of the cavity decay leaving through the input mirror (two identical mirrors)."""
    return transmission_ppm / (2.0 * (transmission_ppm + loss_ppm))


_PRESETS = {
    "configA": dict(delta_c=0.0, delta_a=8.0),
    "configB": dict(delta_c=-12.0, delta_a=3.0),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str, convention: str = "input-coupling") -> ExperimentPreset:
    """Experimental configuration ``configA`` (probe on the empty cavity) or ``configB``.

    The drive amplitude is derived from the 8.5 pW input power with the chosen
    drive convention (see :func:`atomsqueeze.analytic.drive_calibration`).
    """
    from .analytic import drive_calibration

    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {', '.join(PRESET_NAMES)}",
                          key="preset")
    det = _PRESETS[name]
    eta_out = output_port_fraction()
    p_in = 8.5e-12
    base = SystemParams.from_mhz(g=12.0, kappa=1.3, gamma=3.0, gamma_motion=1.0, **det)
    eps = drive_calibration(p_in, base.wavelength, base.kappa, eta_out, convention)
    return ExperimentPreset(name=name, params=base.replace(epsilon=eps), eta_out=eta_out,
                            eta_d=0.55, p_in=p_in, drive_convention=convention)


# Flat key-value preset files: key -> (SystemParams/preset field, converter)
PRESET_KEYS = {
    "g_mhz": "g",
    "kappa_mhz": "kappa",
    "gamma_mhz": "gamma",
    "gamma_motion_mhz": "gamma_motion",
    "delta_c_mhz": "delta_c",
    "delta_a_mhz": "delta_a",
    "epsilon_mhz": "epsilon",
    "p_in_pw": "p_in",
    "eta_d": "eta_d",
    "eta_out": "eta_out",
}


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = line.split("=", 1)
        elif ":" in line:
            key, value = line.split(":", 1)
        else:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}", key=key)
        out[key] = value.strip()
    return out


def parse_float(key: str, value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}", key=key) from None


def apply_preset_overrides(base: ExperimentPreset, overrides: dict) -> ExperimentPreset:
    """Return ``base`` with preset-file keys (linear MHz, pW) applied.

    Changing ``p_in_pw``, ``kappa_mhz`` or ``eta_out`` re-derives the drive
    amplitude unless ``epsilon_mhz`` is given explicitly.
    """
    from .analytic import drive_calibration

    unknown = set(overrides) - set(PRESET_KEYS)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown preset key {key!r}", key=key)
    values = {k: parse_float(k, v) for k, v in overrides.items()}
    p = base.params
    sys_changes = {}
    for key, fieldname in PRESET_KEYS.items():
        if key in values and fieldname in SystemParams.__dataclass_fields__:
            sys_changes[fieldname] = mhz(values[key])
    p = p.replace(**sys_changes)
    p_in = values["p_in_pw"] * 1e-12 if "p_in_pw" in values else base.p_in
    eta_out = values.get("eta_out", base.eta_out)
    eta_d = values.get("eta_d", base.eta_d)
    if "epsilon_mhz" not in values:
        p = p.replace(epsilon=drive_calibration(p_in, p.wavelength, p.kappa, eta_out,
                                                base.drive_convention))
    return ExperimentPreset(name=base.name, params=p, eta_out=eta_out, eta_d=eta_d,
                            p_in=p_in, drive_convention=base.drive_convention)


def load_preset_file(path, name: str = "configA") -> ExperimentPreset:
    """Read a flat key-value preset file on top of the named built-in preset."""
    path = Path(path)
    values = parse_key_values(path.read_text(), str(path))
    base = preset(values.pop("preset", name)) if "preset" in values else preset(name)
    return apply_preset_overrides(base, values)
