"""Compiled extension vs numpy fallback."""
import os
import subprocess
import sys

import numpy as np
import pytest

from semnet import _scan_py, kernels
from semnet.bench import random_scan_inputs

needs_ext = pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled extension not built")


@needs_ext
def test_compiled_backend_selected_by_default():
    assert kernels.BACKEND_NAME == "compiled"
    assert kernels.ssm_forward is kernels.compiled_backend.ssm_forward


@needs_ext
@pytest.mark.parametrize("L,N,E,batch", [(1, 1, 1, 1), (17, 4, 3, 2), (64, 16, 2, 1)])
def test_forward_and_backward_parity(rng, L, N, E, batch):
    ext = kernels.compiled_backend
    args = random_scan_inputs(rng, L, N, channels=E, batch=batch)
    args[2][0, 0] = 0.0  # series branch
    y1, h1 = ext.ssm_forward(*args)
    y2, h2 = _scan_py.ssm_forward(*args)
    np.testing.assert_allclose(y1, y2, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(h1, h2, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(ext.ssm_scan(*args), y1, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(_scan_py.ssm_scan(*args), y2, rtol=1e-13, atol=1e-14)
    dy = rng.standard_normal(y1.shape)
    for g1, g2 in zip(ext.ssm_backward(dy, *args, h1), _scan_py.ssm_backward(dy, *args, h2)):
        np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-12)


@needs_ext
def test_linear_scan_parity(rng):
    a, b = rng.uniform(size=(100, 5)), rng.standard_normal((100, 5))
    np.testing.assert_allclose(kernels.compiled_backend.linear_scan(a, b), _scan_py.linear_scan(a, b),
                               rtol=1e-13, atol=1e-14)


def test_env_var_forces_python_fallback():
    code = "from semnet import kernels; print(kernels.BACKEND_NAME)"
    env = dict(os.environ, SEMNET_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
