"""Beam-splitter convolution of single-mode states and its n-fold symmetric
iterate, with a brute-force tensor-product oracle.

U_eta acts as U a_1 U^dag = sqrt(eta) a_1 - sqrt(1-eta) a_2; the output is
the first port after tracing out the second.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import sqrt

import numpy as np
from scipy.linalg import expm

from . import kernels
from .errors import CutoffTooSmall, IndexOutOfSector, RouteUnavailable, SpecError
from .fock import DensityOperator, DiagonalState, FockCutoff, annihilation, build_density
from .phase_space import (
    char_values,
    diagonal_from_radial_char,
    invert_char,
    polar_grid,
    radial_char,
    radial_grid,
    CharSamples,
)

ROUTES = ("diagonal", "char", "oracle")
ORACLE_MAX_N = 3
ORACLE_MAX_K = 12
LOSS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BeamSplitterKernel:
    """amplitudes[k, l, j] = <j, k+l-j| U_eta |k, l>, zero outside the sector."""

    eta: float
    cutoff: int
    amplitudes: np.ndarray

    def sector_norms(self) -> np.ndarray:
        return np.sum(self.amplitudes ** 2, axis=2)


@lru_cache(maxsize=64)
def beam_splitter_kernel(eta: float, K: int) -> BeamSplitterKernel:
    amp = kernels.bs_table(float(eta), K, K, 2 * K)
    amp.setflags(write=False)
    return BeamSplitterKernel(float(eta), K, amp)


def bs_amplitude(j: int, k: int, l: int, eta: float) -> float:
    if k < 0 or l < 0 or not 0 <= j <= k + l:
        raise IndexOutOfSector(f"output count {j} outside sector {k + l}")
    if not 0.0 <= eta <= 1.0:
        raise SpecError("transmissivity must lie in [0, 1]")
    return float(kernels.sector_unitary(k + l, eta, [j], [k])[0, 0])


def _is_diag(state) -> bool:
    if isinstance(state, DiagonalState):
        return True
    if state.modes != 1:
        return False
    a = state.entries
    return np.count_nonzero(a - np.diag(np.diag(a))) == 0


def _diag_of(state) -> DiagonalState:
    if isinstance(state, DiagonalState):
        return state
    return DiagonalState(np.real(np.diag(state.entries)).copy(), state.trace_deficit)


def _check_single(state):
    if state.modes != 1:
        raise SpecError("convolution is implemented for single-mode states")


def convolve_pair(rho, sigma, eta: float, cutoff: int | None = None):
    """rho box_eta sigma on one mode; outputs keep the larger input cutoff."""
    _check_single(rho)
    _check_single(sigma)
    if not 0.0 <= eta <= 1.0:
        raise SpecError("transmissivity must lie in [0, 1]")
    J = max(rho.K, sigma.K) if cutoff is None else int(cutoff)
    if _is_diag(rho) and _is_diag(sigma):
        a, b = _diag_of(rho), _diag_of(sigma)
        r = kernels.diag_convolve(a.probs, b.probs, eta, J)
        kept_in = (1.0 - a.tail_mass) * (1.0 - b.tail_mass)
        lost = kept_in - float(r.sum())
        if lost > LOSS_TOL:
            raise CutoffTooSmall(f"mass {lost:.2e} pushed above cutoff {J}")
        r = np.clip(r, 0.0, None)
        return DiagonalState(r, max(0.0, 1.0 - float(r.sum())))
    out = _dense_convolve(_dense(rho), _dense(sigma), eta, J)
    kept_in = (1.0 - _deficit(rho)) * (1.0 - _deficit(sigma))
    tr = float(np.real(np.trace(out)))
    if kept_in - tr > LOSS_TOL:
        raise CutoffTooSmall(f"mass {kept_in - tr:.2e} pushed above cutoff {J}")
    out = 0.5 * (out + out.conj().T)
    return DensityOperator(1, FockCutoff(J), out, max(0.0, 1.0 - tr))


def _dense(state) -> np.ndarray:
    if isinstance(state, DiagonalState):
        return np.diag(state.probs).astype(complex)
    return state.entries


def _deficit(state) -> float:
    return state.tail_mass if isinstance(state, DiagonalState) else state.trace_deficit


def _dense_convolve(x, y, eta, J):
    """Sector-by-sector tr_2(U (x (x) y) U^dag), output rows/cols <= J."""
    K, L = x.shape[0] - 1, y.shape[0] - 1
    out = np.zeros((J + 1, J + 1), dtype=complex)
    blocks = {}
    for N in range(K + L + 1):
        ks = np.arange(max(0, N - L), min(N, K) + 1)
        blocks[N] = (ks, kernels.sector_unitary(N, eta, np.arange(N + 1), ks))
    for N, (ks, UN) in blocks.items():
        for M, (ls, UM) in blocks.items():
            # output rows j, cols j' share the second-port count N - j = M - j'
            B = x[np.ix_(ks, ls)] * y[np.ix_(N - ks, M - ls)]
            Z = UN @ B @ UM.T
            shift = N - M
            j = np.arange(max(0, shift), min(N, M + shift) + 1)
            jp = j - shift
            keep = (j <= J) & (jp <= J)
            out[j[keep], jp[keep]] += Z[j[keep], jp[keep]]
    return out


# ------------------------------------------------------------ tensor oracle

def _two_mode_ops(Kc):
    a = annihilation(1, Kc)
    eye = np.eye(Kc + 1)
    return np.kron(a, eye), np.kron(eye, a)


def tensor_oracle_pair(x: np.ndarray, y: np.ndarray, eta: float) -> np.ndarray:
    """Exponentiate the beam-splitter generator on the full product space and
    trace out the second mode; returns the complete output matrix."""
    K, L = x.shape[0] - 1, y.shape[0] - 1
    Kc = K + L
    a1, a2 = _two_mode_ops(Kc)
    theta = np.arccos(sqrt(eta))
    U = expm(theta * (a1.T @ a2 - a1 @ a2.T))
    xp = np.zeros((Kc + 1, Kc + 1), dtype=complex)
    yp = np.zeros((Kc + 1, Kc + 1), dtype=complex)
    xp[: K + 1, : K + 1] = x
    yp[: L + 1, : L + 1] = y
    big = U @ np.kron(xp, yp) @ U.conj().T
    big = big.reshape(Kc + 1, Kc + 1, Kc + 1, Kc + 1)
    return np.einsum("ikjk->ij", big)


def tensor_oracle(rho, n: int):
    """rho^{box n} for n <= 3 by sequential brute-force two-mode mixing."""
    K = rho.K
    if n > ORACLE_MAX_N or K > ORACLE_MAX_K:
        raise RouteUnavailable(f"tensor oracle limited to n <= {ORACLE_MAX_N}, K <= {ORACLE_MAX_K}")
    x = _dense(rho)
    acc = x
    for k in range(2, n + 1):
        acc = tensor_oracle_pair(acc, x, 1.0 - 1.0 / k)
    acc = 0.5 * (acc + acc.conj().T)
    Kout = acc.shape[0] - 1
    return build_density(acc, 1, FockCutoff(Kout), trace_deficit=_deficit(rho) * n)


# ------------------------------------------------------------ n-fold

def default_cutoff(rho, tol: float = 1e-12) -> int:
    """Smallest K >= rho.K whose Gaussian (thermal) tail beyond K is <= tol."""
    from .fock import covariance

    gamma = covariance(rho)
    nu = max(float(np.sqrt(max(np.linalg.det(gamma), 1.0))), 1.0)
    q = (nu - 1.0) / (nu + 1.0)
    if q <= 0.0:
        return rho.K
    need = int(np.ceil(np.log(tol) / np.log(q))) - 1
    return max(rho.K, need)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def nfold_symmetric(rho, n: int, route: str = "diagonal", cutoff: int | None = None,
                    doubling: bool = True, grid=None):
    """rho^{box n} = (rho^{box (n-1)}) box_{1-1/n} rho, via the chosen route."""
    if n < 1:
        raise SpecError("n must be at least 1")
    if route not in ROUTES:
        raise RouteUnavailable(f"unknown route {route!r}")
    _check_single(rho)
    if n == 1:
        return rho
    if route == "oracle":
        return tensor_oracle(rho, n)
    if route == "char":
        return char_power(rho, n, cutoff, grid)
    if not _is_diag(rho):
        raise RouteUnavailable("the diagonal route needs a Fock-diagonal state")
    base = _diag_of(rho)
    if cutoff is None:
        cutoff = default_cutoff(base)
    if cutoff != base.K:
        p = np.zeros(cutoff + 1)
        m = min(cutoff, base.K) + 1
        p[:m] = base.probs[:m]
        base = DiagonalState(p, base.tail_mass + float(base.probs[m:].sum()))
    if doubling and _is_power_of_two(n):
        acc = base
        while n > 1:
            acc = convolve_pair(acc, acc, 0.5)
            n //= 2
        return acc
    acc = base
    for k in range(2, n + 1):
        acc = convolve_pair(acc, base, 1.0 - 1.0 / k)
    return acc


def nfold_sequence(rho, n_grid, route: str = "diagonal", cutoff: int | None = None, grid=None):
    """Yield (n, rho^{box n}) along an increasing grid, reusing doubling steps
    when consecutive grid points differ by a factor of two."""
    prev_n, prev = None, None
    for n in n_grid:
        if route == "diagonal" and prev is not None and n == 2 * prev_n and _is_diag(rho):
            cur = convolve_pair(prev, prev, 0.5)
        else:
            cur = nfold_symmetric(rho, n, route, cutoff, grid=grid)
        prev_n, prev = n, cur
        yield n, cur


def char_power(rho, n: int, cutoff: int | None = None, grid=None):
    """Invert chi_rho(z / sqrt n)^n on a phase-space grid."""
    K = default_cutoff(rho) if cutoff is None else int(cutoff)
    if _is_diag(rho):
        d = _diag_of(rho)
        g = grid if grid is not None and grid.kind == "radial" else radial_grid(K)
        with np.errstate(under="ignore"):
            chi = radial_char(d, g.nodes / sqrt(n)) ** n
        return diagonal_from_radial_char(chi, K, g)
    g = grid if grid is not None else polar_grid(K)
    vals = char_values(rho, g.nodes / sqrt(n))
    with np.errstate(under="ignore"):
        vals = vals ** n
    return invert_char(CharSamples(g, vals), K)


def wigner_positivity_probe(out, zmax: float = 3.0, step: float = 0.25):
    """Minimum of the Wigner function of a convolution output on a lattice."""
    from .phase_space import wigner_fn

    ax = np.arange(-zmax, zmax + step / 2, step)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    pts = (X + 1j * Y).ravel()
    if _is_diag(out):
        rr = np.unique(np.round(np.abs(pts), 12))
        return float(wigner_fn(_diag_of(out), rr).min())
    return float(wigner_fn(out, pts).min())


__all__ = [
    "BeamSplitterKernel", "beam_splitter_kernel", "bs_amplitude", "convolve_pair",
    "nfold_symmetric", "nfold_sequence", "default_cutoff", "char_power", "tensor_oracle", "tensor_oracle_pair",
    "wigner_positivity_probe", "ROUTES",
]
