import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomsqueeze.errors import ConfigError, DomainError, InvalidParamsError
from atomsqueeze.params import (SystemParams, apply_preset_overrides, complex_detunings,
                                dressed_detunings, load_preset_file, mhz, output_port_fraction,
                                preset, require_valid, to_mhz, validate_params)

TWO_PI = 2 * math.pi


def bare_a(**kw):
    base = dict(g=12.0, kappa=1.3, gamma=3.0, delta_c=0.0, delta_a=8.0)
    base.update(kw)
    return SystemParams.from_mhz(**base)


def test_units_roundtrip():
    assert mhz(12.0) == pytest.approx(TWO_PI * 12)
    assert to_mhz(mhz(3.7)) == pytest.approx(3.7)


def test_validate_kappa_zero():
    p = bare_a().replace(kappa=0.0)
    assert "kappa must be positive" in validate_params(p)
    with pytest.raises(InvalidParamsError):
        require_valid(p)


def test_validate_negative_g():
    assert "g must be non-negative" in validate_params(bare_a().replace(g=-1.0))


def test_presets_valid():
    for name in ("configA", "configB"):
        assert validate_params(preset(name).params) == []


def test_complex_detunings_examples():
    w_c, w_a = complex_detunings(bare_a(), include_motion=False)
    assert w_c / TWO_PI == pytest.approx(1.3j)
    assert w_a / TWO_PI == pytest.approx(8 + 3j)
    _, w_a = complex_detunings(bare_a(gamma_motion=1.0), include_motion=True)
    assert w_a / TWO_PI == pytest.approx(8 + 4j)


def test_dressed_symmetric_case():
    p = SystemParams.from_mhz(g=1.0, kappa=0.1, gamma=0.1)
    m = dressed_detunings(p, 1)
    assert m.omega_plus / TWO_PI == pytest.approx(-1 + 0.1j)
    assert m.omega_minus / TWO_PI == pytest.approx(1 + 0.1j)


def test_dressed_config_a():
    m = dressed_detunings(bare_a(), 1, include_motion=False)
    assert m.omega_plus / TWO_PI == pytest.approx(-8.62 + 1.88j, abs=0.01)
    assert m.omega_minus / TWO_PI == pytest.approx(16.62 + 2.42j, abs=0.01)
    assert abs(m.omega_plus.real) / TWO_PI == pytest.approx(9, abs=0.5)


def test_dressed_config_b():
    m = dressed_detunings(preset("configB").params, 1)
    assert to_mhz(m.omega_plus.real) == pytest.approx(-18.6, abs=0.05)
    assert to_mhz(m.omega_minus.real) == pytest.approx(9.6, abs=0.05)


def test_dressed_bad_n():
    with pytest.raises(DomainError):
        dressed_detunings(bare_a(), 0)
    with pytest.raises(DomainError):
        dressed_detunings(bare_a(), 1.5)


rate = st.floats(0.05, 20.0)
detuning = st.floats(-40.0, 40.0)
coupling = st.floats(0.0, 40.0)


@settings(max_examples=300, deadline=None)
@given(g=coupling, kappa=rate, gamma=rate, dc=detuning, da=detuning, n=st.integers(1, 6))
def test_product_identities(g, kappa, gamma, dc, da, n):
    p = SystemParams.from_mhz(g=g, kappa=kappa, gamma=gamma, delta_c=dc, delta_a=da)
    w_c, w_a = complex_detunings(p)
    m1 = dressed_detunings(p, 1)
    ref1 = w_c * w_a - p.g ** 2
    scale1 = max(abs(w_c * w_a), p.g ** 2, 1e-300)
    assert abs(m1.omega_plus * m1.omega_minus - ref1) <= 1e-10 * scale1
    m2 = dressed_detunings(p, 2)
    ref2 = 2 * (w_c * (w_c + w_a) - p.g ** 2)
    scale2 = max(abs(w_c * (w_c + w_a)), p.g ** 2, 1e-300)
    assert abs(m2.omega_plus * m2.omega_minus - ref2) <= 1e-10 * scale2
    mn = dressed_detunings(p, n)
    assert mn.omega_plus.imag > 0 and mn.omega_minus.imag > 0


@settings(max_examples=100, deadline=None)
@given(g=coupling, kappa=rate, d=detuning, n=st.integers(1, 5))
def test_symmetric_collapse(g, kappa, d, n):
    p = SystemParams.from_mhz(g=g, kappa=kappa, gamma=kappa, delta_c=d, delta_a=d)
    w_c, _ = complex_detunings(p)
    m = dressed_detunings(p, n)
    tol = 1e-12 * (abs(n * w_c) + math.sqrt(n) * p.g)
    assert abs(m.omega_plus - (n * w_c - math.sqrt(n) * p.g)) <= tol
    assert abs(m.omega_minus - (n * w_c + math.sqrt(n) * p.g)) <= tol


def test_g_zero_limit():
    p = bare_a(g=0.0)
    w_c, w_a = complex_detunings(p)
    m = dressed_detunings(p, 1)
    got = sorted([m.omega_plus, m.omega_minus], key=lambda z: z.real)
    want = sorted([w_c, w_a], key=lambda z: z.real)
    assert got == pytest.approx(want)


def test_swap_symmetry_of_product():
    p = SystemParams.from_mhz(g=5, kappa=1.3, gamma=3, delta_c=-2, delta_a=7)
    q = SystemParams.from_mhz(g=5, kappa=3, gamma=1.3, delta_c=7, delta_a=-2)
    m, n = dressed_detunings(p, 1), dressed_detunings(q, 1)
    assert m.omega_plus * m.omega_minus == pytest.approx(n.omega_plus * n.omega_minus)


def test_preset_values():
    a, b = preset("configA"), preset("configB")
    assert a.params.delta_c == 0.0
    assert to_mhz(a.params.delta_a) == pytest.approx(8.0)
    assert to_mhz(b.params.delta_c) == pytest.approx(-12.0)
    assert to_mhz(b.params.delta_a) == pytest.approx(3.0)
    assert a.eta_out == pytest.approx(0.206, abs=5e-4)
    assert output_port_fraction() == pytest.approx(2.8 / 13.6)
    assert 1 / a.eta_out == pytest.approx(4.9, abs=0.1)
    assert a.eta_d == 0.55 and a.p_in == pytest.approx(8.5e-12)
    assert to_mhz(a.params.g) == pytest.approx(12.0)
    assert to_mhz(a.params.gamma_motion) == pytest.approx(1.0)


def test_unknown_preset():
    with pytest.raises(ConfigError) as err:
        preset("configC")
    assert err.value.key == "preset"


def test_preset_file(tmp_path):
    f = tmp_path / "p.cfg"
    f.write_text("# comment\ng_mhz = 10\npreset = configB\n")
    ep = load_preset_file(f)
    assert to_mhz(ep.params.g) == pytest.approx(10.0)
    assert to_mhz(ep.params.delta_c) == pytest.approx(-12.0)


def test_preset_file_errors(tmp_path):
    f = tmp_path / "p.cfg"
    f.write_text("g_mhz = twelve\n")
    with pytest.raises(ConfigError) as err:
        load_preset_file(f)
    assert err.value.key == "g_mhz"
    with pytest.raises(ConfigError) as err:
        apply_preset_overrides(preset("configA"), {"bogus": "1"})
    assert err.value.key == "bogus"


def test_override_rederives_drive():
    a = preset("configA")
    doubled = apply_preset_overrides(a, {"p_in_pw": "34"})
    assert doubled.params.epsilon == pytest.approx(2 * a.params.epsilon)
    fixed = apply_preset_overrides(a, {"p_in_pw": "34", "epsilon_mhz": "1"})
    assert to_mhz(fixed.params.epsilon) == pytest.approx(1.0)
