import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.special import eval_laguerre

from qclt import _pykernels, kernels

try:
    from qclt import _ckernels
except ImportError:  # extension not built
    _ckernels = None

IMPLS = [pytest.param(_pykernels, id="python"),
         pytest.param(_ckernels, id="cython",
                      marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))]


@pytest.mark.parametrize("impl", IMPLS)
def test_laguerre_eval_matches_scipy(impl):
    rng = np.random.default_rng(0)
    coef = rng.random(30)
    u = np.linspace(0, 40, 101)
    ref = np.exp(-u / 2) * sum(c * eval_laguerre(k, u) for k, c in enumerate(coef))
    assert np.allclose(impl.laguerre_eval(coef, u), ref, atol=1e-10)


@pytest.mark.parametrize("impl", IMPLS)
def test_laguerre_project_matches_scipy(impl):
    u = np.linspace(0.1, 30, 57)
    w = np.linspace(1, 2, 57)
    ref = np.array([np.sum(w * np.exp(-u / 2) * eval_laguerre(j, u)) for j in range(21)])
    assert np.allclose(impl.laguerre_project(u, w, 20), ref, atol=1e-9)


@pytest.mark.parametrize("impl", IMPLS)
@pytest.mark.parametrize("eta", [0.5, 0.3, 1 - 1 / 64])
def test_diag_convolve_matches_amplitude_table(impl, eta):
    rng = np.random.default_rng(1)
    p = rng.dirichlet(np.ones(21))
    q = rng.dirichlet(np.ones(17))
    amp = kernels.bs_table(eta, 20, 16, 36)
    ref = np.einsum("k,l,klj->j", p, q, amp * amp)
    assert np.allclose(kernels.diag_convolve(p, q, eta, 36, impl=impl), ref, atol=1e-13)


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
def test_backends_agree_on_large_input():
    rng = np.random.default_rng(2)
    p = rng.dirichlet(np.ones(129))
    q = rng.dirichlet(np.ones(129))
    a = kernels.diag_convolve(p, q, 0.5, 128, impl=_ckernels)
    b = kernels.diag_convolve(p, q, 0.5, 128, impl=_pykernels)
    assert np.max(np.abs(a - b)) < 1e-13


def test_sector_basis_diagonalizes_generator():
    N = 12
    W = kernels.sector_basis(N)
    j = np.arange(N)
    off = np.sqrt((j + 1.0) * (N - j))
    T = np.diag(off, 1) + np.diag(off, -1)
    assert np.allclose(W.T @ T @ W, np.diag(2.0 * np.arange(N + 1) - N), atol=1e-10)


def test_pure_python_switch():
    env = dict(os.environ, QCLT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import qclt; print(qclt.BACKEND)"],
                         capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"
