"""Backend selection for the hot loops.

The Cython extension is used when it imports; otherwise (or when
``QCLT_PURE_PYTHON=1``) the numpy fallback in ``_pykernels`` is used.
Sector eigenbases are shared by both backends and cached here.
"""
import os
import threading

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _pykernels

_forced = os.environ.get("QCLT_PURE_PYTHON", "") not in ("", "0")

try:
    if _forced:
        raise ImportError("pure python backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

laguerre_project = _impl.laguerre_project
laguerre_eval = _impl.laguerre_eval

_lock = threading.Lock()
_bases = [np.ones((1, 1))]
_packed = {}


def sector_basis(N):
    """Eigenvectors (columns, ascending eigenvalue 2m-N) of the N-photon
    tridiagonal matrix with off-diagonal sqrt((j+1)(N-j))."""
    with _lock:
        while len(_bases) <= N:
            n = len(_bases)
            j = np.arange(n)
            off = np.sqrt((j + 1.0) * (n - j))
            _, vecs = eigh_tridiagonal(np.zeros(n + 1), off)
            _bases.append(np.ascontiguousarray(vecs))
        return _bases[N]


def packed_bases(nmax):
    """All sector bases up to nmax, concatenated, with start offsets."""
    key = nmax
    hit = _packed.get(key)
    if hit is not None:
        return hit
    mats = [sector_basis(N) for N in range(nmax + 1)]
    offsets = np.zeros(nmax + 2, dtype=np.int64)
    offsets[1:] = np.cumsum([m.size for m in mats])
    wcat = np.concatenate([m.ravel() for m in mats])
    with _lock:
        _packed[key] = (wcat, offsets)
    return wcat, offsets


def bs_theta(eta):
    return float(np.arccos(np.sqrt(min(max(eta, 0.0), 1.0))))


def diag_convolve(p, q, eta, J, impl=None):
    """Output photon distribution of mode 1 after mixing p (mode 1) and q."""
    p = np.ascontiguousarray(p, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    nz = np.nonzero(q)[0]
    q = q[: (int(nz[-1]) + 1 if nz.size else 1)]
    nz = np.nonzero(p)[0]
    p = p[: (int(nz[-1]) + 1 if nz.size else 1)]
    wcat, offsets = packed_bases(len(p) + len(q) - 2)
    return (impl or _impl).diag_convolve(p, q, bs_theta(eta), int(J), wcat, offsets)


def sector_unitary(N, eta, rows=None, cols=None):
    rows = np.arange(N + 1) if rows is None else np.asarray(rows)
    cols = np.arange(N + 1) if cols is None else np.asarray(cols)
    return _pykernels.sector_block(sector_basis(N), N, bs_theta(eta), rows, cols)


def bs_table(eta, K, L, J):
    """amp[k, l, j] = <j, k+l-j| U_eta |k, l> for k <= K, l <= L, j <= J."""
    amp = np.zeros((K + 1, L + 1, J + 1))
    for N in range(K + L + 1):
        ks = np.arange(max(0, N - L), min(N, K) + 1)
        rows = np.arange(min(N, J) + 1)
        blk = sector_unitary(N, eta, rows, ks)
        amp[ks, N - ks, : len(rows)] = blk.T
    return amp


python_backend = _pykernels
