"""Gaussian states: first moments plus covariance, thermal Fock realizations,
Gaussification and the symplectic uncertainty check."""
from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .errors import (
    CutoffTooSmall,
    EigenFailure,
    NotCentered,
    NotPositiveDefinite,
    SpecError,
    UnsupportedCovariance,
)
from .fock import (
    DensityOperator,
    DiagonalState,
    FockCutoff,
    annihilation,
    covariance,
    first_moments,
    fock_indices,
)


def symplectic_form(m: int) -> np.ndarray:
    return np.kron(np.eye(m), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def lambda_matrix(m: int) -> np.ndarray:
    """Unitary taking (z_1, conj z_1, ...) to the real phase-space vector."""
    blk = np.array([[-1j, 1j], [-1.0, -1.0]]) / sqrt(2)
    return np.kron(np.eye(m), blk)


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    modes: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (2 * self.modes, 2 * self.modes) or len(self.mean) != 2 * self.modes:
            raise SpecError("covariance/mean shape does not match the number of modes")
        if np.max(np.abs(c - c.T)) > 1e-10:
            raise SpecError("covariance must be symmetric")
        if uncertainty_check(c) < -1e-9:
            raise SpecError("covariance violates the uncertainty relation")

    def distance(self, other: "GaussianSpec") -> float:
        return float(max(np.max(np.abs(self.cov - other.cov)),
                         np.max(np.abs(self.mean - other.mean))))


@dataclass(frozen=True, eq=False)
class ThermalSpec:
    nus: np.ndarray
    betas: np.ndarray

    @classmethod
    def from_nu(cls, *nus):
        nus = np.array(nus, dtype=float).ravel()
        # covariances of pure states land a rounding error below 1
        nus = np.where((nus < 1.0) & (nus > 1.0 - 1e-9), 1.0, nus)
        if np.any(nus < 1.0):
            raise SpecError("symplectic eigenvalues must be >= 1")
        with np.errstate(divide="ignore"):
            betas = np.where(nus == 1.0, np.inf, np.log((nus + 1.0) / np.where(nus == 1.0, 2.0, nus - 1.0)))
        return cls(nus, betas)

    @classmethod
    def from_beta(cls, *betas):
        betas = np.array(betas, dtype=float).ravel()
        if np.any(betas <= 0):
            raise SpecError("inverse temperatures must be positive")
        q = np.exp(-betas)
        return cls((1 + q) / (1 - q), betas)

    @property
    def modes(self) -> int:
        return len(self.nus)

    @property
    def ratios(self) -> np.ndarray:
        """q_j = e^{-beta_j} = (nu_j - 1)/(nu_j + 1)."""
        return (self.nus - 1.0) / (self.nus + 1.0)

    def gaussian(self) -> GaussianSpec:
        return GaussianSpec(self.modes, np.zeros(2 * self.modes), np.kron(np.diag(self.nus), np.eye(2)))

    def entropy(self) -> float:
        s = 0.0
        for nu in self.nus:
            a, b = (nu + 1) / 2, (nu - 1) / 2
            s += a * log(a) - (b * log(b) if b > 0 else 0.0)
        return s


@dataclass(frozen=True)
class WilliamsonForm:
    nu: float
    squeeze: float
    angle: float
    symplectic: np.ndarray


def uncertainty_check(gamma) -> float:
    """Smallest eigenvalue of gamma + i Omega (>= 0 for physical covariances)."""
    g = np.asarray(gamma, dtype=float)
    m = g.shape[0] // 2
    try:
        return float(np.linalg.eigvalsh(g + 1j * symplectic_form(m)).min())
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def williamson_1mode(gamma) -> WilliamsonForm:
    """gamma = S diag(nu, nu) S^T with S = R(angle) diag(e^-r, e^r) R(angle)^T."""
    g = np.asarray(gamma, dtype=float)
    if g.shape != (2, 2):
        raise SpecError("single-mode covariance must be 2x2")
    g = 0.5 * (g + g.T)
    evals, vecs = np.linalg.eigh(g)
    if evals.min() <= 0:
        raise NotPositiveDefinite(f"eigenvalues {evals}")
    nu = sqrt(float(np.linalg.det(g)))
    r = 0.25 * log(evals[1] / evals[0])
    # the squeezed (small) direction is the first eigenvector
    angle = float(np.arctan2(vecs[1, 0], vecs[0, 0]))
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    S = rot @ np.diag([np.exp(-r), np.exp(r)]) @ rot.T
    return WilliamsonForm(nu, r, angle, S)


def gaussian_char(spec: GaussianSpec, z) -> complex:
    """exp(-1/4 zh^dag L^dag gamma L zh + i d^T L zh), zh = (z_1, conj z_1, ...)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    zh = np.empty(2 * len(z), dtype=complex)
    zh[0::2] = z
    zh[1::2] = np.conj(z)
    v = lambda_matrix(spec.modes) @ zh
    quad = np.real(np.conj(v) @ spec.cov @ v)
    lin = np.real(spec.mean @ v)
    return complex(np.exp(-0.25 * quad + 1j * lin))


def thermal_fock(spec: ThermalSpec, cutoff: FockCutoff | int, tol: float = 1e-12, dense: bool = False):
    """Geometric weights (1-q) q^k per mode; DiagonalState for one mode."""
    if isinstance(cutoff, int):
        cutoff = FockCutoff(cutoff, spec.modes)
    if cutoff.modes != spec.modes:
        raise SpecError("cutoff and thermal spec disagree on the number of modes")
    q = spec.ratios
    n = cutoff.value
    if spec.modes == 1:
        k = np.arange(n + 1)
        p = (1 - q[0]) * q[0] ** k
        tail = float(q[0] ** (n + 1))
        if tail > tol:
            raise CutoffTooSmall(f"thermal tail {tail:.2e} above {tol:.0e} at cutoff {n}")
        tail_number = tail * (n + 1 + q[0] / (1 - q[0])) if q[0] > 0 else 0.0
        st = DiagonalState(p, tail, tail_number, float(q[0]))
        if dense:
            return DensityOperator(1, cutoff, np.diag(p).astype(complex), tail)
        return st
    idx = np.array(fock_indices(spec.modes, n))
    w = np.prod((1 - q) * q ** idx, axis=1)
    tail = 1.0 - float(w.sum())
    if tail > tol:
        raise CutoffTooSmall(f"thermal tail {tail:.2e} above {tol:.0e} at cutoff {n}")
    return DensityOperator(spec.modes, cutoff, np.diag(w).astype(complex), max(tail, 0.0))


def gaussian_unitary(form: WilliamsonForm, K: int) -> np.ndarray:
    """Fock matrix (cutoff K) of the unitary taking the thermal state of nu
    to the Gaussian state with covariance S diag(nu, nu) S^T."""
    a = annihilation(1, K)
    ad = a.T
    sq = expm(0.5 * form.squeeze * (a @ a - ad @ ad))
    rot = np.diag(np.exp(-1j * form.angle * np.arange(K + 1)))
    return rot.conj().T @ sq @ rot


def _pad_for(form: WilliamsonForm, K: int) -> int:
    return K + 40 + int(40 * abs(form.squeeze))


def _squeezed_thermal(form: WilliamsonForm, K: int) -> DensityOperator:
    big = K + _pad_for(form, K)
    U = gaussian_unitary(form, big)
    q = (form.nu - 1) / (form.nu + 1)
    tau = np.diag((1 - q) * q ** np.arange(big + 1))
    out = (U @ tau @ U.conj().T)[: K + 1, : K + 1]
    out = 0.5 * (out + out.conj().T)
    deficit = max(0.0, 1.0 - float(np.real(np.trace(out))))
    return DensityOperator(1, FockCutoff(K), out, deficit)


def to_williamson_frame(rho, form: WilliamsonForm, K: int) -> DensityOperator:
    """U^dag rho U for the Gaussian unitary of form, cropped to cutoff K.

    Only the columns of the squeeze on rho's support are needed, so they
    are obtained from the sparse generator instead of a dense exponential.
    """
    src = rho.entries if isinstance(rho, DensityOperator) else np.diag(rho.probs).astype(complex)
    L = src.shape[0] - 1
    big = max(K, L) + _pad_for(form, max(K, L))
    phase = np.exp(-1j * form.angle * np.arange(L + 1))
    x = phase[:, None] * src * phase.conj()[None, :]
    amp = np.sqrt(np.arange(1, big + 1))
    a = sparse.diags(amp, 1, format="csr")
    gen = 0.5 * form.squeeze * (a @ a - a.T @ a.T)
    cols = np.zeros((big + 1, L + 1))
    cols[np.arange(L + 1), np.arange(L + 1)] = 1.0
    V = expm_multiply(-gen, cols)[: K + 1]
    out = V @ x @ V.T
    back = np.exp(1j * form.angle * np.arange(K + 1))
    out = back[:, None] * out * back.conj()[None, :]
    out = 0.5 * (out + out.conj().T)
    deficit = max(0.0, 1.0 - float(np.real(np.trace(out))))
    return DensityOperator(1, FockCutoff(K), out, deficit)


def gaussify(rho, cutoff: int | None = None, tol: float = 1e-8):
    """Return (GaussianSpec, Fock realization) of the Gaussian state with the
    same first moments and covariance as rho. rho must be centered."""
    d = first_moments(rho)
    if np.max(np.abs(d)) > 1e-8:
        raise NotCentered(f"first moments {d}")
    gamma = covariance(rho)
    m = rho.modes
    spec = GaussianSpec(m, np.zeros(2 * m), gamma)
    K = rho.K if cutoff is None else cutoff
    if m == 1:
        nu = sqrt(max(float(np.linalg.det(gamma)), 1.0))
        if np.max(np.abs(gamma - nu * np.eye(2))) <= 1e-9 * max(nu, 1.0):
            th = ThermalSpec.from_nu(nu)
            dense = isinstance(rho, DensityOperator)
            return spec, thermal_fock(th, FockCutoff(K), tol=tol, dense=dense)
        form = williamson_1mode(gamma)
        return spec, _squeezed_thermal(form, K)
    nus = []
    for j in range(m):
        blk = gamma[2 * j: 2 * j + 2, 2 * j: 2 * j + 2]
        nus.append(blk[0, 0])
    target = np.kron(np.diag(nus), np.eye(2))
    if np.max(np.abs(gamma - target)) > 1e-9 * max(max(nus), 1.0):
        raise UnsupportedCovariance("multi-mode covariance is not mode-wise thermal")
    th = ThermalSpec.from_nu(*nus)
    return spec, thermal_fock(th, FockCutoff(K, m), tol=tol)


def thermal_of(spec: GaussianSpec) -> ThermalSpec:
    """Thermal spec of a mode-wise thermal covariance."""
    g = spec.cov
    nus = [g[2 * j, 2 * j] for j in range(spec.modes)]
    if np.max(np.abs(g - np.kron(np.diag(nus), np.eye(2)))) > 1e-9 * max(max(nus), 1.0):
        raise UnsupportedCovariance("covariance is not mode-wise thermal")
    return ThermalSpec.from_nu(*nus)
