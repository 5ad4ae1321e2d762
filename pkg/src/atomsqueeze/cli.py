"""Command-line front end.

    atomsqueeze dressed --preset configB
    atomsqueeze spectrum --preset configA -o spec.csv
    atomsqueeze oracle-compare --epsilon-mhz 0.1
    atomsqueeze pipeline-analyze --in-memory --scale 0.05

Exit status 0 on success, 2 for invalid configuration, 3 for numerical
failures; errors are reported as JSON on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import analytic, io
from .errors import (AtomSqueezeError, ConfigError, DimensionError, DomainError,
                     InvalidParamsError, UndefinedAngleError)
from .params import (PRESET_KEYS, PRESET_NAMES, TWO_PI, apply_preset_overrides,
                     dressed_detunings, parse_float, parse_key_values, preset, to_mhz)

COMMANDS = ("dressed", "autocorr", "spectrum", "oracle-compare", "pipeline-synth",
            "pipeline-analyze", "metrics")
OUTPUT_ENV = "ATOMSQUEEZE_OUTPUT_DIR"
MAX_GRID_POINTS = 2_000_000
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


@dataclass
class RunConfig:
    command: str = "spectrum"
    preset: str = "configA"
    overrides: dict = field(default_factory=dict)
    convention: str = "input-coupling"
    theta: float | None = None          # None: optimal angle for X, +pi/2 for P
    tau_max_us: float = 1.0
    tau_step_us: float = 0.005
    f_max_mhz: float = 50.0
    f_step_mhz: float = 0.01
    eta: float | None = None            # None: preset eta_out
    perfect_cavity: bool = False
    n_manifolds: int = 3
    n_max: int = 8
    epsilon_mhz: float | None = 0.1
    motion: str = "decay"
    scale: float = 0.05
    n_trapped: int | None = None
    n_untrapped: int | None = None
    tone_mhz: float | None = None
    electronic_noise: bool = False
    quantize: bool = True
    seed: int = 20110708
    input: str | None = None
    in_memory: bool = False
    min_reference_s: float = 1.0
    s_min_mdb: float = -12.0
    format: str | None = None
    output: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}", key="command")
        if self.preset not in PRESET_NAMES:
            raise ConfigError(f"unknown preset {self.preset!r}; expected one of "
                              f"{', '.join(PRESET_NAMES)}", key="preset")
        if self.convention not in analytic.DRIVE_CONVENTIONS:
            raise ConfigError(f"unknown drive convention {self.convention!r}", key="convention")
        for key in ("tau_max_us", "tau_step_us", "f_max_mhz", "f_step_mhz", "scale"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{key} must be positive", key=key)
        if self.tau_max_us / self.tau_step_us > MAX_GRID_POINTS:
            raise ConfigError("tau grid too large", key="tau_step_us")
        if self.f_max_mhz / self.f_step_mhz > MAX_GRID_POINTS:
            raise ConfigError("frequency grid too large", key="f_step_mhz")
        if self.eta is not None and not 0 < self.eta <= 1:
            raise ConfigError("eta must lie in (0, 1]", key="eta")
        if self.format not in (None, "csv", "json"):
            raise ConfigError("format must be csv or json", key="format")
        if self.n_manifolds < 1:
            raise ConfigError("n_manifolds must be >= 1", key="n_manifolds")
        return self


_RUN_FIELDS = {f.name: f for f in fields(RunConfig) if f.name not in ("overrides", "command")}


def _convert(key, value, default):
    text = str(value).strip()
    if isinstance(default, bool) or key in ("perfect_cavity", "electronic_noise", "quantize",
                                            "in_memory"):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}", key=key)
    if key in ("n_manifolds", "n_max", "seed", "n_trapped", "n_untrapped"):
        if text.lower() == "none" and key in ("n_trapped", "n_untrapped"):
            return None
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}", key=key) from None
    if key in ("preset", "convention", "motion", "input", "format", "output"):
        return text
    if text.lower() == "none" and key in ("theta", "eta", "epsilon_mhz", "tone_mhz"):
        return None
    return parse_float(key, text)


def config_from_mapping(values: dict, base: RunConfig | None = None) -> RunConfig:
    """Apply flat string key-values to ``base``; unknown keys are rejected."""
    cfg = replace(base) if base is not None else RunConfig()
    cfg.overrides = dict(cfg.overrides)
    for key, value in values.items():
        if key in PRESET_KEYS:
            parse_float(key, value)
            cfg.overrides[key] = str(value).strip()
        elif key in _RUN_FIELDS:
            setattr(cfg, key, _convert(key, value, _RUN_FIELDS[key].default))
        elif key == "command":
            cfg.command = str(value).strip()
        else:
            raise ConfigError(f"unknown configuration key {key!r}", key=key)
    return cfg


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Flat ``key = value`` file on top of ``base`` (defaults when omitted)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}", key="config") from None
    return config_from_mapping(parse_key_values(text, str(path)), base)


# --- helpers ------------------------------------------------------------------------------

def experiment(cfg: RunConfig):
    ep = preset(cfg.preset, cfg.convention)
    if cfg.overrides:
        ep = apply_preset_overrides(ep, cfg.overrides)
    return ep


def param_meta(cfg: RunConfig, ep) -> dict:
    p = ep.params
    meta = {
        "command": cfg.command,
        "preset": cfg.preset,
        "convention": cfg.convention,
        "g_mhz": to_mhz(p.g), "kappa_mhz": to_mhz(p.kappa), "gamma_mhz": to_mhz(p.gamma),
        "gamma_motion_mhz": to_mhz(p.gamma_motion), "delta_c_mhz": to_mhz(p.delta_c),
        "delta_a_mhz": to_mhz(p.delta_a), "epsilon_mhz": to_mhz(p.epsilon),
        "eta_out": ep.eta_out, "eta_d": ep.eta_d, "p_in_pw": ep.p_in * 1e12,
    }
    if cfg.overrides:
        meta["overrides"] = ";".join(f"{k}={cfg.overrides[k]}" for k in sorted(cfg.overrides))
    return meta


def _angles(cfg, p):
    theta0 = cfg.theta if cfg.theta is not None else analytic.optimal_angle(p)[0]
    return theta0, theta0 + math.pi / 2


def _eta(cfg, ep):
    if cfg.perfect_cavity:
        return 1.0
    return cfg.eta if cfg.eta is not None else ep.eta_out


# --- commands -----------------------------------------------------------------------------

def cmd_dressed(cfg):
    ep = experiment(cfg)
    rows = []
    for n in range(1, cfg.n_manifolds + 1):
        m = dressed_detunings(ep.params, n)
        rows.append({"n": n,
                     "delta_plus_mhz": to_mhz(m.omega_plus.real),
                     "halfwidth_plus_mhz": to_mhz(m.omega_plus.imag),
                     "delta_minus_mhz": to_mhz(m.omega_minus.real),
                     "halfwidth_minus_mhz": to_mhz(m.omega_minus.imag)})
    cols = ("n", "delta_plus_mhz", "halfwidth_plus_mhz", "delta_minus_mhz", "halfwidth_minus_mhz")
    if cfg.format == "json":
        k = analytic.squeezing_kernel(ep.params).k_factor
        return {"preset": cfg.preset, "manifolds": rows, "k_factor": k}, None
    block = {c: np.array([r[c] for r in rows]) for c in cols}
    return [("manifolds", block)], cols


def cmd_autocorr(cfg):
    ep = experiment(cfg)
    tau = np.arange(0.0, cfg.tau_max_us + cfg.tau_step_us / 2, cfg.tau_step_us)
    tx, tp = _angles(cfg, ep.params)
    blocks = []
    for name, th in (("X", tx), ("P", tp)):
        s = analytic.quadrature_autocorrelation(ep.params, th, tau)
        blocks.append((name, {"tau_us": tau, "value": s.values, "std_err": np.zeros_like(tau)}))
    blocks.append(("empty", {"tau_us": tau, "value": np.zeros_like(tau),
                             "std_err": np.zeros_like(tau)}))
    return blocks, io.AUTOCORR_COLUMNS, {"theta_x": tx, "theta_p": tp}


def cmd_spectrum(cfg):
    ep = experiment(cfg)
    f = np.arange(0.0, cfg.f_max_mhz + cfg.f_step_mhz / 2, cfg.f_step_mhz)
    eta = _eta(cfg, ep)
    tx, tp = _angles(cfg, ep.params)
    blocks = []
    for name, th in (("X", tx), ("P", tp)):
        s = analytic.squeezing_spectrum(ep.params, th, eta, TWO_PI * f)
        blocks.append((name, _spectrum_block(f, s.values)))
    blocks.append(("empty", _spectrum_block(f, np.ones_like(f))))
    return blocks, io.SPECTRUM_COLUMNS, {"theta_x": tx, "theta_p": tp, "eta": eta}


def _spectrum_block(f, s_lin, err=None):
    return {"freq_mhz": f, "s_linear": s_lin, "s_mdb": analytic.to_mdb(s_lin),
            "std_err": np.zeros_like(f) if err is None else err}


def cmd_oracle_compare(cfg):
    from .compare import oracle_comparison

    ep = experiment(cfg)
    report = oracle_comparison(ep, cfg.epsilon_mhz, cfg.n_max, cfg.motion)
    report.pop("elapsed_s")
    return report, None


def cmd_metrics(cfg):
    ep = experiment(cfg)
    p = ep.params
    flux = analytic.photon_flux(ep.p_in, p.wavelength)
    n_mean, eps = {}, {}
    for conv in analytic.DRIVE_CONVENTIONS:
        e = analytic.drive_calibration(ep.p_in, p.wavelength, p.kappa, ep.eta_out, conv)
        eps[conv] = to_mhz(e)
        n_mean[conv] = analytic.mean_photon_number(p.replace(epsilon=e))
    budget_eps = analytic.drive_calibration(ep.p_in, p.wavelength, p.kappa, ep.eta_out, "total-kappa")
    budget = analytic.power_budget(p.replace(epsilon=budget_eps), flux, ep.eta_out)
    s_min = analytic.from_mdb(cfg.s_min_mdb)
    return {
        "preset": cfg.preset,
        "p_in_w": ep.p_in,
        "wavelength_m": p.wavelength,
        "photon_flux_per_us": flux,
        "photons_per_decay_time": analytic.photons_per_decay_time(ep.p_in, p.wavelength, p.kappa),
        "mean_photon_number": n_mean,
        "epsilon_mhz": eps,
        "kerr": {"s_min_mdb": cfg.s_min_mdb,
                 "r_eta_per_w": analytic.kerr_equivalent(float(s_min), ep.p_in)},
        "power_budget": {"convention": "total-kappa",
                         "scattered_flux_per_us": budget.scattered_flux,
                         "mirror_flux_per_us": budget.mirror_flux,
                         "reflected_fraction": budget.reflected_fraction},
    }, None


def _plan(cfg):
    from .pipeline.detector import DetectorModel
    from .pipeline.roundtrip import build_plan

    ep = experiment(cfg)
    det = DetectorModel(eta_d=ep.eta_d, electronic_noise=cfg.electronic_noise)
    return build_plan(cfg.preset, cfg.scale, cfg.seed, detector=det, n_trapped=cfg.n_trapped,
                      n_untrapped=cfg.n_untrapped, quantize=cfg.quantize, tone_mhz=cfg.tone_mhz,
                      convention=cfg.convention)


def cmd_pipeline_synth(cfg):
    from .pipeline.synth import save_trace_set, synthesize_trace_set

    out_dir = cfg.output or _default_path(cfg, "traces")
    if out_dir is None:
        raise ConfigError("pipeline-synth needs --output (directory) or $" + OUTPUT_ENV,
                          key="output")
    ts = synthesize_trace_set(_plan(cfg))
    save_trace_set(ts, out_dir)
    summary = {"directory": str(out_dir), "acquisitions": len(ts), "seed": cfg.seed,
               "preset": cfg.preset, "n_trapped": ts.meta["n_trapped"],
               "n_untrapped": ts.meta["n_untrapped"]}
    return summary, "summary"


def cmd_pipeline_analyze(cfg):
    from .pipeline.roundtrip import analyze_trace_set, evaluate_round_trip, truth_on_grid
    from .pipeline.synth import load_trace_set, synthesize_trace_set

    if cfg.in_memory:
        ts = synthesize_trace_set(_plan(cfg))
    elif cfg.input:
        ts = load_trace_set(cfg.input)
    else:
        raise ConfigError("pipeline-analyze needs --input DIR or --in-memory", key="input")
    result = analyze_trace_set(ts, min_reference_us=cfg.min_reference_s * 1e6)
    report = evaluate_round_trip(ts, result)
    if cfg.format == "json":
        d = report.as_dict()
        d.pop("elapsed_s")
        return d, None
    truth = truth_on_grid(ts, result)
    blocks = []
    for q, qr in result.quadratures.items():
        d = qr.diff_spec
        blocks.append((q, {"freq_mhz": d.freq_mhz, "s_linear": analytic.from_mdb(d.values),
                           "s_mdb": d.values, "std_err": d.std_err}))
    for q, t in truth.items():
        f = result.quadratures[q].diff_spec.freq_mhz
        blocks.append((f"truth_{q}", _spectrum_block(f, analytic.from_mdb(t))))
    meta = {"zeta": report.zeta, "zeta_std_err": report.zeta_std_err,
            "chi2_per_bin": report.chi2_per_bin["combined"], "seed": ts.meta["seed"]}
    return blocks, io.SPECTRUM_COLUMNS, meta


HANDLERS = {
    "dressed": cmd_dressed,
    "autocorr": cmd_autocorr,
    "spectrum": cmd_spectrum,
    "oracle-compare": cmd_oracle_compare,
    "pipeline-synth": cmd_pipeline_synth,
    "pipeline-analyze": cmd_pipeline_analyze,
    "metrics": cmd_metrics,
}
JSON_ONLY = {"oracle-compare", "metrics", "pipeline-synth"}


def _default_path(cfg, stem):
    base = os.environ.get(OUTPUT_ENV)
    if not base:
        return None
    return str(Path(base) / stem)


def render(cfg: RunConfig) -> str:
    """Run the command and return the serialised artefact."""
    cfg.validate()
    if cfg.command in JSON_ONLY:
        cfg.format = "json"
    fmt_name = cfg.format or "csv"
    cfg.format = fmt_name
    out = HANDLERS[cfg.command](cfg)
    meta = param_meta(cfg, experiment(cfg))
    if fmt_name == "json":
        obj, _ = out[0], out[1]
        return io.emit(obj, "json", meta=meta)
    blocks, columns = out[0], out[1]
    if len(out) > 2:
        meta.update(out[2])
    return io.emit(blocks, "csv", columns=columns, meta=meta)


def run(command: str, config: RunConfig) -> int:
    """Execute ``command``; write the artefact; return the exit code."""
    config.command = command
    try:
        text = render(config)
        if command == "pipeline-synth":
            sys.stdout.write(text)
            return 0
        ext = "json" if config.format == "json" else "csv"
        path = config.output or _default_path(config, f"{command}.{ext}")
        if path is None:
            sys.stdout.write(text)
        else:
            io.write_text(path, text)
        return 0
    except AtomSqueezeError as exc:
        return _fail(exc)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error
        sys.stdout = open(os.devnull, "w")
        return 0
    except OSError as exc:
        return _fail(ConfigError(f"I/O failure: {exc}", key="output"))
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(exc)
    except ValueError as exc:
        return _fail(ConfigError(str(exc)))


def exit_code_for(exc: Exception) -> int:
    if isinstance(exc, (ConfigError, InvalidParamsError, DomainError, DimensionError,
                        UndefinedAngleError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def _fail(exc: Exception) -> int:
    code = exit_code_for(exc)
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code,
                     "key": getattr(exc, "key", None)}}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(json.dumps({"error": {"type": "UsageError", "message": message,
                                               "exit_code": EXIT_CONFIG, "key": None}},
                                    sort_keys=True) + "\n")
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="atomsqueeze", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--preset")
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="parameter or run override (repeatable)")
        sp.add_argument("--convention", choices=analytic.DRIVE_CONVENTIONS)
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("-o", "--output")
        sp.add_argument("--seed", type=int)
        if name == "dressed":
            sp.add_argument("--n-manifolds", type=int)
        if name in ("autocorr", "spectrum"):
            sp.add_argument("--theta", type=float)
        if name == "autocorr":
            sp.add_argument("--tau-max-us", type=float)
            sp.add_argument("--tau-step-us", type=float)
        if name == "spectrum":
            sp.add_argument("--f-max-mhz", type=float)
            sp.add_argument("--f-step-mhz", type=float)
            sp.add_argument("--eta", type=float)
            sp.add_argument("--perfect-cavity", action="store_true", default=None)
        if name == "oracle-compare":
            sp.add_argument("--epsilon-mhz", type=float)
            sp.add_argument("--n-max", type=int)
            sp.add_argument("--motion", choices=("decay", "dephasing", "none"))
        if name in ("pipeline-synth", "pipeline-analyze"):
            sp.add_argument("--scale", type=float)
            sp.add_argument("--n-trapped", type=int)
            sp.add_argument("--n-untrapped", type=int)
            sp.add_argument("--tone-mhz", type=float)
            sp.add_argument("--electronic-noise", action="store_true", default=None)
        if name == "pipeline-analyze":
            sp.add_argument("--input")
            sp.add_argument("--in-memory", action="store_true", default=None)
            sp.add_argument("--min-reference-s", type=float)
        if name == "metrics":
            sp.add_argument("--s-min-mdb", type=float)
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    if args.config:
        cfg = load_config(args.config, cfg)
    if args.set:
        kv = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", key=item)
            k, v = item.split("=", 1)
            kv[k.strip()] = v.strip()
        cfg = config_from_mapping(kv, cfg)
    for key, value in vars(args).items():
        if key in ("command", "config", "set") or value is None:
            continue
        setattr(cfg, key, value)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except AtomSqueezeError as exc:
        return _fail(exc)
    return run(args.command, cfg)


if __name__ == "__main__":
    raise SystemExit(main())
