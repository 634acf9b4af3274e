"""Cumulants of ln chi near the origin and the Edgeworth correction
polynomials of the n-fold symmetric convolution (single mode).

A multi-index (a, b) stands for z^a conj(z)^b, and
ln chi(z) = sum q_ab z^a conj(z)^b / (a! b!).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import factorial, sqrt

import numpy as np

from .errors import FitIllConditioned, GridTooCoarse, InsufficientOrder, SpecError
from .fock import DensityOperator, DiagonalState, FockCutoff, as_dense, annihilation, covariance
from .gaussian import GaussianSpec, gaussian_char
from .phase_space import char_values

STENCIL_RADIUS = 0.1
N_RADII = 5
N_PHASES = 16
MAX_ORDER = 6
MAX_STRATUM = 2


@dataclass(frozen=True, eq=False)
class CumulantSet:
    modes: int
    order: int
    coeffs: dict = field(default_factory=dict)

    def __getitem__(self, alpha):
        return self.coeffs.get(tuple(alpha), 0j)

    def block(self, degree: int) -> dict:
        return {k: v for k, v in self.coeffs.items() if sum(k) == degree}

    def as_json(self) -> dict:
        return {f"{a},{b}": [float(v.real), float(v.imag)] for (a, b), v in sorted(self.coeffs.items())}

    def symmetry_defect(self) -> float:
        """max |q_ba - (-1)^(a+b) conj(q_ab)| (Hermiticity of rho)."""
        worst = 0.0
        for (a, b), v in self.coeffs.items():
            partner = self.coeffs.get((b, a), 0j)
            worst = max(worst, abs(partner - (-1) ** (a + b) * np.conj(v)))
        return worst


@dataclass(frozen=True, eq=False)
class EdgeworthPolynomial:
    r: int
    terms: dict

    @property
    def degree(self) -> int:
        return max((a + b for (a, b), v in self.terms.items() if v != 0), default=0)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        zc = np.conj(z)
        for (a, b), c in self.terms.items():
            out = out + c * z ** a * zc ** b
        return out

    def is_zero(self, tol: float = 1e-8) -> bool:
        return all(abs(v) <= tol for v in self.terms.values())


def _monomials(order: int):
    return [(a, d - a) for d in range(1, order + 1) for a in range(d, -1, -1)]


def _fit_degree(order: int) -> int:
    # two extra degrees absorb the leading truncation terms; harmonics must stay
    # below N_PHASES / 2 to avoid aliasing
    return min(order + 2, N_PHASES // 2)


def _fit_stencil(lnchi_fn, order: int, R: float) -> dict:
    top = _fit_degree(order)
    radii = R * np.arange(1, N_RADII + 1) / N_RADII
    phi = 2 * np.pi * np.arange(N_PHASES) / N_PHASES
    pts = radii[:, None] * np.exp(1j * phi)[None, :]
    vals = lnchi_fn(pts.ravel()).reshape(pts.shape)
    # harmonic M of the angular samples: sum over a - b = M of q_ab r^(a+b) / (a! b!)
    harm = np.fft.fft(vals, axis=1) / N_PHASES
    out = {}
    for M in range(-order, order + 1):
        degs = [d for d in range(max(abs(M), 1), top + 1) if (d - M) % 2 == 0]
        if not any(d <= order for d in degs):
            continue
        A = (radii / R)[:, None] ** np.array(degs)[None, :]
        rhs = harm[:, M % N_PHASES]
        sol, _, rank, sv = np.linalg.lstsq(A, rhs, rcond=None)
        if rank < len(degs) or sv[-1] / sv[0] < 1e-12:
            raise FitIllConditioned(f"harmonic {M} design matrix is singular")
        nxt = degs[-1] + 2
        for d, c in zip(degs, sol):
            if d <= order:
                a, b = (d + M) // 2, (d - M) // 2
                out[(a, b)] = (c / R ** d, nxt - d)
    return out


def fit_cumulants(lnchi_fn, order: int) -> CumulantSet:
    """Fit a log-characteristic function on stencils of radius 0.1 and 0.05
    and Richardson-combine the two fits."""
    coarse = _fit_stencil(lnchi_fn, order, STENCIL_RADIUS)
    fine = _fit_stencil(lnchi_fn, order, STENCIL_RADIUS / 2)
    coeffs = {}
    for key, (c1, k) in coarse.items():
        # the first unmodeled degree with the same harmonic sets the error order k
        c2 = fine[key][0]
        c = (2 ** k * c2 - c1) / (2 ** k - 1)
        a, b = key
        coeffs[key] = complex(c * factorial(a) * factorial(b))
    return CumulantSet(1, order, coeffs)


def _lnchi(rho, n: int = 1):
    def fn(z):
        v = char_values(rho, z / sqrt(n))
        if np.any(np.abs(v) < 0.5):
            raise FitIllConditioned("chi too far from 1 on the stencil")
        return n * np.log(v)
    return fn


def weyl_cumulants(rho, order: int = 4) -> CumulantSet:
    if not 1 <= order <= MAX_ORDER:
        raise SpecError(f"order must be in 1..{MAX_ORDER}")
    if rho.modes != 1:
        raise SpecError("cumulant fitting is implemented for one mode")
    return fit_cumulants(_lnchi(rho), order)


def power_cumulants(rho, n: int, order: int = 3) -> CumulantSet:
    """Cumulants of rho^{box n} through ln chi_n(z) = n ln chi(z / sqrt n)."""
    return fit_cumulants(_lnchi(rho, n), order)


# ------------------------------------------------------------ moment oracle

def _weyl_product(a: int, b: int, K: int) -> np.ndarray:
    """Symmetrized product of a copies of a^dag and b copies of a."""
    lo = annihilation(1, K)
    hi = lo.T
    n = a + b
    acc = np.zeros((K + 1, K + 1))
    count = 0
    for pos in combinations(range(n), a):
        m = np.eye(K + 1)
        sel = set(pos)
        for i in range(n):
            m = m @ (hi if i in sel else lo)
        acc += m
        count += 1
    return acc / count


def weyl_moments(rho, order: int) -> dict:
    """mu_ab = d^a/dz^a d^b/dzbar^b chi(0) = (-1)^b tr(rho W_ab)."""
    K = rho.K + order
    x = as_dense(rho, K).entries if isinstance(rho, DiagonalState) else _pad(rho, K)
    out = {}
    for a, b in _monomials(order):
        out[(a, b)] = complex((-1) ** b * np.trace(x @ _weyl_product(a, b, K)))
    return out


def _pad(rho: DensityOperator, K: int) -> np.ndarray:
    out = np.zeros((K + 1, K + 1), dtype=complex)
    out[: rho.K + 1, : rho.K + 1] = rho.entries
    return out


def _series_mul(x, y, order):
    out = np.zeros_like(x)
    for a in range(order + 1):
        for b in range(order + 1 - a):
            if x[a, b] == 0:
                continue
            out[a:, b:] += x[a, b] * y[: order + 1 - a, : order + 1 - b]
    mask = np.add.outer(np.arange(order + 1), np.arange(order + 1)) > order
    out[mask] = 0
    return out


def cumulants_from_moments(mu: dict, order: int) -> CumulantSet:
    """ln of the moment series, by the power series of ln(1 + X)."""
    X = np.zeros((order + 1, order + 1), dtype=complex)
    for (a, b), v in mu.items():
        if a + b <= order:
            X[a, b] = v / (factorial(a) * factorial(b))
    L = np.zeros_like(X)
    P = X.copy()
    for k in range(1, order + 1):
        L += (-1) ** (k + 1) * P / k
        P = _series_mul(P, X, order)
    coeffs = {(a, b): complex(L[a, b] * factorial(a) * factorial(b)) for a, b in _monomials(order)}
    return CumulantSet(1, order, coeffs)


def weyl_cumulants_exact(rho, order: int) -> CumulantSet:
    return cumulants_from_moments(weyl_moments(rho, order), order)


# ------------------------------------------------------------ Edgeworth strata

def _homogeneous(q: CumulantSet, degree: int, size: int) -> np.ndarray:
    out = np.zeros((size, size), dtype=complex)
    for (a, b), v in q.block(degree).items():
        out[a, b] = v / (factorial(a) * factorial(b))
    return out


def edgeworth_polynomials(q: CumulantSet, r_max: int) -> list:
    """E_1..E_rmax from exp(sum_{d>=3} h_d eps^(d-2)), eps = n^(-1/2)."""
    if r_max > MAX_STRATUM:
        raise SpecError(f"r_max is capped at {MAX_STRATUM}")
    if q.order < r_max + 2:
        raise InsufficientOrder(f"need cumulants to order {r_max + 2}, have {q.order}")
    size = r_max * (r_max + 2) + 1
    deg = size - 1
    h = {j: _homogeneous(q, j + 2, size) for j in range(1, r_max + 1)}
    # E = sum_k (sum_j h_j eps^j)^k / k!, collected by powers of eps
    strata = [np.zeros((size, size), dtype=complex) for _ in range(r_max + 1)]
    strata[0][0, 0] = 1.0
    power = {0: strata[0].copy()}
    for k in range(1, r_max + 1):
        nxt = {}
        for e, poly in power.items():
            for j, hj in h.items():
                if e + j > r_max:
                    continue
                prod = _series_mul(poly, hj, deg)
                nxt[e + j] = nxt.get(e + j, 0) + prod
        for e, poly in nxt.items():
            strata[e] = strata[e] + poly / factorial(k)
        power = nxt
    out = []
    for r in range(1, r_max + 1):
        terms = {(a, b): complex(strata[r][a, b]) for a in range(size) for b in range(size)
                 if strata[r][a, b] != 0}
        out.append(EdgeworthPolynomial(r, terms))
    return out


def _gauss_spec(rho) -> GaussianSpec:
    return GaussianSpec(1, np.zeros(2), covariance(rho))


def window_points(n: int, n_radii: int = 41, n_phases: int = 32) -> np.ndarray:
    rmax = 0.1 * sqrt(n)
    r = np.linspace(0.0, rmax, n_radii)
    phi = 2 * np.pi * np.arange(n_phases) / n_phases
    return (r[:, None] * np.exp(1j * phi)[None, :]).ravel()


def expansion_residual(rho, n: int, r_max: int, points=None, weighted: bool = True,
                       chi_n=None, cumulants: CumulantSet | None = None) -> float:
    """sup |chi_n - chi_G (1 + sum_r n^(-r/2) E_r)| e^((nu_min-1)|z|^2/4) n^(r_max/2).

    The expansion through r_max corresponds to moment order r_max + 2.

    chi_n defaults to chi_rho(z / sqrt n)^n; pass a callable to use another
    route (for instance the characteristic function of an inductive output).
    """
    z = window_points(n) if points is None else np.asarray(points, dtype=complex).ravel()
    if np.max(np.abs(z)) > 0.1 * sqrt(n) + 1e-12:
        raise GridTooCoarse("residual points lie outside the |z| <= 0.1 sqrt(n) window")
    spec = _gauss_spec(rho)
    chiG = np.array([gaussian_char(spec, zz) for zz in z])
    corr = np.ones(z.size, dtype=complex)
    if r_max > 0:
        q = cumulants if cumulants is not None else weyl_cumulants(rho, min(r_max + 2, MAX_ORDER))
        for E in edgeworth_polynomials(q, r_max):
            corr = corr + n ** (-E.r / 2) * E(z)
    if chi_n is None:
        with np.errstate(under="ignore"):
            cn = char_values(rho, z / sqrt(n)) ** n
    else:
        cn = chi_n(z)
    resid = np.abs(cn - chiG * corr)
    if not weighted:
        return float(resid.max())
    nu_min = float(np.linalg.eigvalsh(spec.cov).min())
    w = np.exp((nu_min - 1.0) * np.abs(z) ** 2 / 4)
    return float(np.max(resid * w) * n ** (r_max / 2))


__all__ = [
    "CumulantSet", "EdgeworthPolynomial", "weyl_cumulants", "weyl_moments",
    "cumulants_from_moments", "weyl_cumulants_exact", "edgeworth_polynomials",
    "expansion_residual", "window_points", "fit_cumulants", "power_cumulants",
]
