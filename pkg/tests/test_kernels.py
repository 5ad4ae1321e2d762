import os
import subprocess
import sys

import numpy as np
import pytest

from atomsqueeze.pipeline import kernels
from atomsqueeze.pipeline.kernels import KERNELS


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_lagged_autocorr_parity(rng):
    blocks = rng.normal(0, 3, (5, 777))
    fast, slow = KERNELS["lagged_autocorr"]
    a, b = fast(blocks, 40), slow(blocks, 40)
    assert a.shape == (5, 41)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10)
    x = blocks[2]
    direct = [np.dot(x[:x.size - k], x[k:]) / (x.size - k) for k in (0, 1, 17, 40)]
    assert np.allclose(a[2, [0, 1, 17, 40]], direct)


def test_power_moments_parity(rng):
    spec = rng.normal(size=(9, 65)) + 1j * rng.normal(size=(9, 65))
    fast, slow = KERNELS["power_moments"]
    for u, v in zip(fast(spec, 0.3), slow(spec, 0.3)):
        assert np.allclose(u, v, rtol=1e-12)


def test_quantize_parity_and_clipping(rng):
    x = np.concatenate([rng.normal(0, 500, 1000), [40000.0, -40000.0, 2.5, -2.5, 0.49]])
    fast, slow = KERNELS["quantize"]
    a, b = fast(x, 14), slow(x, 14)
    assert a.dtype == np.int16 and np.array_equal(a, b)
    assert a[-5] == 8191 and a[-4] == -8192
    assert list(a[-3:]) == [3, -2, 0]


def test_block_variance_parity(rng):
    x = rng.normal(2, 5, 10_050)
    fast, slow = KERNELS["block_variance"]
    a, b = fast(x, 1000), slow(x, 1000)
    assert a.size == 10
    assert np.allclose(a, b, rtol=1e-10)


def test_backend_selection_follows_env():
    code = "from atomsqueeze._accel import backend; print(backend())"
    env = dict(os.environ, ATOMSQUEEZE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
    env["ATOMSQUEEZE_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numba"


def test_module_names_match_backend():
    from atomsqueeze._accel import USE_NUMBA
    idx = 0 if USE_NUMBA else 1
    assert kernels.quantize is KERNELS["quantize"][idx]
    assert kernels.lagged_autocorr is KERNELS["lagged_autocorr"][idx]
