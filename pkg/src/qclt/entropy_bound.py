"""Explicit relative-entropy upper bound against a thermal state.

Constants follow the proof of the bound step by step: nu_beta, eta_beta,
zeta, C', C'', M_{beta,E}, S(tau) and the final maximum over the three
cases eps = 0, 0 < eps < 1 and eps >= 1. The per-level inequality, the
truncated three-term bound and the thermal tail sums are exposed
separately so that every link of the chain can be checked numerically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import exp, factorial, log, sqrt

import numpy as np
from scipy.special import gammaln, zeta as hurwitz_zeta

from .errors import InfiniteBeta, SpecError, UnsupportedCovariance
from .fock import (
    DensityOperator,
    DiagonalState,
    FockCutoff,
    as_dense,
    center,
    covariance,
    embed,
    first_moments,
    fock_indices,
    relative_entropy,
    total_number,
)
from .gaussian import GaussianSpec, ThermalSpec, thermal_of, to_williamson_frame, williamson_1mode

SYM_TOL = 1e-12
HOLD_TOL = 1e-8
TAIL_EPS = 1e-20
LOG_FLOOR = -700.0


# ------------------------------------------------------------ odd polynomials

@dataclass(frozen=True, eq=False)
class OddPolynomial:
    """E(z) = sum c_pq z^p conj(z)^q with p + q odd and c_qp = -conj(c_pq),
    so that E(-z) = -E(z) = conj(E(z))."""

    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        for (p, q), c in self.terms.items():
            if p < 0 or q < 0:
                raise SpecError("exponents must be nonnegative")
            if (p + q) % 2 == 0 and c != 0:
                raise SpecError(f"even-degree term {(p, q)} in an odd polynomial")
            partner = self.terms.get((q, p), 0)
            if abs(partner + np.conj(c)) > SYM_TOL * max(1.0, abs(c)):
                raise SpecError(f"term {(p, q)} breaks E(-z) = conj(E(z))")

    @property
    def degree(self) -> int:
        return max((p + q for (p, q), c in self.terms.items() if c != 0), default=0)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.terms.values())

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for (p, q), c in self.terms.items():
            out = out + c * z ** p * np.conj(z) ** q
        return out

    @classmethod
    def from_edgeworth(cls, poly, tol: float = 1e-9) -> "OddPolynomial":
        """Clean an Edgeworth polynomial: drop tiny terms and restore exact
        symmetry by averaging each term with its partner."""
        raw = {k: complex(v) for k, v in poly.terms.items() if abs(v) > tol}
        out = {}
        for (p, q), c in raw.items():
            partner = raw.get((q, p), 0j)
            out[(p, q)] = 0.5 * (c - np.conj(partner))
        return cls(out)


# ------------------------------------------------------------ ladder algebra

def _shift(poly: dict, key, val):
    if val != 0:
        poly[key] = poly.get(key, 0) + val


def _times_z(poly: dict, beta: float) -> dict:
    # X tau -> X tau a - a X tau = (e^beta X a - a X) tau, normal ordered
    out = {}
    eb = exp(beta)
    for (p, q), c in poly.items():
        _shift(out, (p, q + 1), c * (eb - 1.0))
        if p:
            _shift(out, (p - 1, q), -c * p)
    return out


def _times_zbar(poly: dict, beta: float) -> dict:
    # X tau -> X tau a^dag - a^dag X tau = (e^-beta X a^dag - a^dag X) tau
    out = {}
    emb = exp(-beta)
    for (p, q), c in poly.items():
        _shift(out, (p + 1, q), c * (emb - 1.0))
        if q:
            _shift(out, (p, q - 1), c * emb * q)
    return out


def ladder_coefficients(E: OddPolynomial, beta: float) -> dict:
    """e_pq with chi_tau(z) E(z) = chi of sum e_pq (a^dag)^p a^q tau."""
    out = {}
    for (a, b), c in E.terms.items():
        if c == 0:
            continue
        poly = {(0, 0): 1.0 + 0j}
        for _ in range(a):
            poly = _times_z(poly, beta)
        for _ in range(b):
            poly = _times_zbar(poly, beta)
        for key, v in poly.items():
            _shift(out, key, c * v)
    return {k: v for k, v in out.items() if v != 0}


def _ladder_matrix(p: int, q: int, K: int) -> np.ndarray:
    """<j| (a^dag)^p a^q |k> on cutoff K (exact entries)."""
    out = np.zeros((K + 1, K + 1))
    k = np.arange(q, K + 1)
    j = k - q + p
    ok = j <= K
    k, j = k[ok], j[ok]
    out[j, k] = np.exp(0.5 * (gammaln(k + 1) - gammaln(k - q + 1))
                       + 0.5 * (gammaln(j + 1) - gammaln(k - q + 1)))
    return out


def tau_alpha(spec: ThermalSpec, E: OddPolynomial, alpha: float, cutoff: int) -> np.ndarray:
    """Fock matrix of tau_alpha = tau + alpha sum e_pq (a^dag)^p a^q tau."""
    if spec.modes != 1:
        raise SpecError("tau_alpha is implemented for one mode")
    beta = float(spec.betas[0])
    if not np.isfinite(beta):
        raise InfiniteBeta("vacuum mode has no finite inverse temperature")
    q = float(spec.ratios[0])
    K = int(cutoff)
    tau = (1 - q) * q ** np.arange(K + 1)
    out = np.diag(tau).astype(complex)
    if alpha == 0 or E.is_zero():
        return out
    for (p, qq), c in ladder_coefficients(E, beta).items():
        out += alpha * c * _ladder_matrix(p, qq, K) * tau[None, :]
    return out


def _thermal_trace(p2, q2, p1, q1, beta: float, kmax: int) -> float:
    """tr((a^dag)^p2 a^q2 (a^dag)^p1 a^q1 tau) by a direct Fock sum."""
    if p1 + p2 != q1 + q2:
        return 0.0
    k = np.arange(kmax + 1, dtype=float)
    m1 = k - q1
    m2 = m1 + p1
    m3 = m2 - q2
    ok = (m1 >= 0) & (m3 >= 0)
    k, m1, m2, m3 = k[ok], m1[ok], m2[ok], m3[ok]
    logamp = 0.5 * (gammaln(k + 1) - gammaln(m1 + 1)) + 0.5 * (gammaln(m2 + 1) - gammaln(m1 + 1)) \
        + 0.5 * (gammaln(m2 + 1) - gammaln(m3 + 1)) + 0.5 * (gammaln(k + 1) - gammaln(m3 + 1))
    logw = log(1 - exp(-beta)) - beta * k
    return float(np.sum(np.exp(logamp + logw)))


def _trace_cutoff(beta: float, degree: int) -> int:
    # e^{-beta k} k^degree below 1e-18 of the leading terms
    k = 16
    while -beta * k + degree * log(k + 1) > -45:
        k *= 2
    return k


def m_beta_e(beta: float, E: OddPolynomial) -> float:
    """sum |e_pq e_p'q' tr((a^dag)^p' a^q' (a^dag)^p a^q tau)|."""
    if E.is_zero():
        return 0.0
    coeffs = ladder_coefficients(E, beta)
    kmax = _trace_cutoff(beta, 2 * E.degree)
    total = 0.0
    items = list(coeffs.items())
    for (p, q), c in items:
        for (p2, q2), c2 in items:
            total += abs(c * c2 * _thermal_trace(p2, q2, p, q, beta, kmax))
    return total


# ------------------------------------------------------------ constants

@dataclass(frozen=True)
class BoundConstants:
    nu_beta: float
    eta_beta: float
    zeta: float
    c_prime: float
    c_double_prime: float
    m_beta_e: float
    s_tau: float
    c_final: float
    branches: tuple = ()

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("nu_beta", "eta_beta", "zeta", "c_prime", "c_double_prime", "m_beta_e", "s_tau", "c_final")}


def _betas(beta) -> np.ndarray:
    b = np.atleast_1d(np.asarray(beta, dtype=float))
    if np.any(~np.isfinite(b)):
        raise InfiniteBeta("strip vacuum modes (beta = inf) before bounding")
    if np.any(b <= 0):
        raise SpecError("inverse temperatures must be positive")
    return b


def bound_constants(beta, E: OddPolynomial | None = None) -> BoundConstants:
    b = _betas(beta)
    m = b.size
    E = E if E is not None else OddPolynomial({})
    if m > 1 and not E.is_zero():
        raise SpecError("nonzero correction polynomials are supported for one mode")
    nu = float(np.prod(1 - np.exp(-b)))
    eta = float(b.max() - np.sum(np.log1p(-np.exp(-b))) + 1.0)
    zeta = float(hurwitz_zeta(1.0 + 1.0 / m, 1.0))
    c1 = 2.0 * (b.max() + 1.0) / nu
    c2 = 2.0 ** m * m * eta * float(np.prod((b + 1.0) ** 2)) / nu
    M = m_beta_e(float(b[0]), E) if m == 1 else 0.0
    S = ThermalSpec.from_beta(*b).entropy()
    z = zeta ** (m / 2)
    branches = (2.0 * M, c1 + eta * z + c2, nu + 1.0 / nu + eta * z + S)
    return BoundConstants(nu, eta, zeta, c1, c2, M, S, max(branches), branches)


# ------------------------------------------------------------ working frame

@dataclass(frozen=True, eq=False)
class _Frame:
    """rho and tau on a common cutoff deep enough that tau's weight beyond
    it is negligible; tau is diagonal with log weights kept separately."""

    modes: int
    K: int
    rho: np.ndarray          # dense matrix, or 1-d diagonal
    tau: np.ndarray          # diagonal weights
    logtau: np.ndarray
    bk: np.ndarray           # beta . k per retained index
    nplus: np.ndarray        # |k| + m
    betas: np.ndarray
    diagonal: bool
    tail_mass: float = 0.0
    tail_number: float | None = None


def _tau_depth(betas: np.ndarray, power: float) -> int:
    bmin = float(betas.min())
    k = 8
    while -bmin * k + power * log(k + 1) > log(TAIL_EPS):
        k += 8
    return k


def _frame(rho, betas: np.ndarray, extra_power: float = 0.0) -> _Frame:
    m = rho.modes
    if betas.size != m:
        raise SpecError("thermal reference and state disagree on the number of modes")
    K = max(rho.K, _tau_depth(betas, 2 * (m + 3) + extra_power))
    if isinstance(rho, DiagonalState):
        p = np.zeros(K + 1)
        p[: rho.K + 1] = rho.probs
        x, diagonal = p, True
        idx = np.arange(K + 1)[:, None]
    else:
        x = embed(rho, K).entries if m > 1 else as_dense(rho, K).entries
        diagonal = False
        idx = np.array(fock_indices(m, K)) if m > 1 else np.arange(K + 1)[:, None]
    bk = idx @ betas
    logtau = float(np.sum(np.log1p(-np.exp(-betas)))) - bk
    tau = np.exp(logtau)
    nplus = idx.sum(axis=1) + m
    tm = float(rho.tail_mass) if isinstance(rho, DiagonalState) else 0.0
    tn = rho.tail_number if isinstance(rho, DiagonalState) else None
    return _Frame(m, K, x, tau, logtau, bk, nplus.astype(float), betas, diagonal, tm, tn)


def _spec_betas(tau) -> np.ndarray:
    if isinstance(tau, ThermalSpec):
        return _betas(tau.betas)
    if isinstance(tau, GaussianSpec):
        return _betas(thermal_of(tau).betas)
    if isinstance(tau, DiagonalState) and tau.ratio is not None:
        return _betas([-log(tau.ratio)])
    raise SpecError("reference must be a thermal spec")


def _diff_diag(fr: _Frame) -> np.ndarray:
    d = fr.rho if fr.diagonal else np.real(np.diag(fr.rho))
    return d - fr.tau


def _sq_diag(fr: _Frame) -> np.ndarray:
    """<k|(rho - tau)^2|k>."""
    if fr.diagonal:
        return (fr.rho - fr.tau) ** 2
    X = fr.rho - np.diag(fr.tau)
    return np.real(np.sum(np.abs(X) ** 2, axis=1))


def _divergence(fr: _Frame) -> float:
    if fr.diagonal:
        rho = DiagonalState(fr.rho, fr.tail_mass, fr.tail_number)
        sig = DiagonalState(fr.tau, ratio=float(exp(-fr.betas[0])))
        return relative_entropy(rho, sig)
    rho = DensityOperator(fr.modes, FockCutoff(fr.K, fr.modes), fr.rho)
    sig = DiagonalState(fr.tau) if fr.modes == 1 else \
        DensityOperator(fr.modes, FockCutoff(fr.K, fr.modes), np.diag(fr.tau).astype(complex))
    return relative_entropy(rho, sig)


# ------------------------------------------------------------ lemmas

def pointwise_bound_check(rho, tau) -> tuple:
    """min_k RHS_k - LHS_k for
    <k|rho(ln rho - ln tau)|k> <= <k|(rho - tau + (rho - tau)^2 tau^-1)|k>,
    over the retained levels of rho. Returns (worst margin, margins)."""
    betas = _spec_betas(tau)
    fr = _frame(rho, betas)
    if fr.diagonal:
        p = fr.rho
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        diag = p
    else:
        lam, V = np.linalg.eigh(fr.rho)
        lam = np.clip(lam, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(lam > 1e-300, lam * np.log(np.where(lam > 1e-300, lam, 1.0)), 0.0)
        w = np.abs(V) ** 2
        plogp = w @ f
        diag = np.real(np.diag(fr.rho))
    lhs = plogp - diag * fr.logtau
    sq = _sq_diag(fr)
    with np.errstate(over="ignore", divide="ignore"):
        ratio = np.where(sq > 0, np.exp(np.log(np.where(sq > 0, sq, 1.0)) - np.maximum(fr.logtau, LOG_FLOOR)), 0.0)
    ratio = np.where(fr.logtau < LOG_FLOOR, np.where(sq > 0, np.inf, 0.0), ratio)
    rhs = diag - fr.tau + ratio
    n = len(fock_indices(rho.modes, rho.K)) if rho.modes > 1 else rho.K + 1
    margins = (rhs - lhs)[:n]
    return float(margins.min()), margins


def _geom_tail(q: float, k0: int, power: int) -> float:
    """sum_{k >= k0} k^power q^k for power in {0, 1}."""
    if power == 0:
        return q ** k0 / (1 - q)
    return q ** k0 * (k0 / (1 - q) + q / (1 - q) ** 2)


@dataclass(frozen=True)
class TruncatedRHS:
    rhs: float
    holds: bool
    divergence: float
    terms: tuple

    def __iter__(self):
        return iter((self.rhs, self.holds))


def truncated_rhs(rho, tau, t: float) -> TruncatedRHS:
    """Three-term bound: sum_{beta.k<=t} <k|(rho-tau)^2 tau^-1|k>
    + eta sum_{beta.k>t} |<k|(rho-tau)(N+m)|k>| - sum_{beta.k>t} <k|tau ln tau|k>."""
    betas = _spec_betas(tau)
    fr = _frame(rho, betas)
    eta = bound_constants(betas).eta_beta
    inside = fr.bk <= t
    sq = _sq_diag(fr)
    with np.errstate(over="ignore"):
        t1_terms = np.where(inside, sq * np.exp(-np.maximum(fr.logtau, LOG_FLOOR)), 0.0)
    t1 = float(np.sum(t1_terms))
    t2 = eta * float(np.sum(np.where(~inside, fr.nplus * np.abs(_diff_diag(fr)), 0.0)))
    t3 = float(np.sum(np.where(~inside, -fr.tau * fr.logtau, 0.0)))
    if fr.modes == 1:
        # levels beyond the frame: rho vanishes there, so the terms are pure tau sums
        b = float(betas[0])
        q = exp(-b)
        nu = 1 - q
        k0 = fr.K + 1
        kt = int(np.floor(t / b)) if np.isfinite(t) else None
        if kt is None or kt >= k0:
            # sum_{k0 <= k <= kt} tau_k
            upper = 0.0 if kt is None else nu * _geom_tail(q, kt + 1, 0)
            t1 += nu * _geom_tail(q, k0, 0) - upper
        start = max(k0, (kt + 1) if kt is not None else k0)
        if kt is not None:
            t2 += eta * nu * (_geom_tail(q, start, 1) + _geom_tail(q, start, 0))
            t3 += nu * (b * _geom_tail(q, start, 1) - log(nu) * _geom_tail(q, start, 0))
    rhs = t1 + t2 + t3
    D = _divergence(fr)
    return TruncatedRHS(rhs, D <= rhs + HOLD_TOL, D, (t1, t2, t3))


def balancing_t(eps: float, m: int, iters: int = 60) -> float:
    """Root of e^t / (t+1)^m = 1/eps; inf for eps = 0 and 0 for eps >= 1."""
    if eps <= 0:
        return float("inf")
    if eps >= 1:
        return 0.0
    target = -log(eps)

    def g(t):
        return t - m * log(t + 1.0) - target

    lo, hi = 0.0, 1.0
    while g(hi) < 0:
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ------------------------------------------------------------ theorem

@dataclass(frozen=True)
class RelentBound:
    bound: float
    holds: bool
    divergence: float
    epsilon: float
    t_star: float
    constants: BoundConstants

    def __iter__(self):
        return iter((self.bound, self.holds))

    @property
    def margin(self) -> float:
        return self.bound - self.divergence


def weighted_hs(fr: _Frame, tau_a: np.ndarray | None = None) -> float:
    """||(rho - tau_alpha)(N + m)^((m+3)/2)||_2 including the thermal tail."""
    w = fr.nplus ** (fr.modes + 3)
    if fr.diagonal and tau_a is None:
        val = float(np.sum(_diff_diag(fr) ** 2 * w))
    else:
        X = (np.diag(fr.rho) if fr.diagonal else fr.rho) - (np.diag(fr.tau) if tau_a is None else tau_a)
        val = float(np.sum(np.abs(X) ** 2 * w[None, :]))
    if fr.modes == 1:
        # tau^2 (k+1)^4 beyond the frame is below TAIL_EPS^2 by construction
        pass
    return sqrt(val)


def relent_upper(rho, tau, E: OddPolynomial | None = None, alpha: float = 0.0) -> RelentBound:
    """D(rho||tau) <= C_{beta,E} (alpha^2 + ||(rho - tau_alpha)(N+m)^((m+3)/2)||_2)."""
    E = E if E is not None else OddPolynomial({})
    if isinstance(tau, GaussianSpec) and rho.modes == 1:
        nu = sqrt(float(np.linalg.det(tau.cov)))
        if np.max(np.abs(tau.cov - nu * np.eye(2))) > 1e-9 * nu:
            if alpha != 0 and not E.is_zero():
                raise SpecError("squeezed references are supported with alpha = 0")
            form = williamson_1mode(tau.cov)
            th = ThermalSpec.from_nu(form.nu)
            K = max(rho.K, _tau_depth(_betas(th.betas), 8))
            return relent_upper(to_williamson_frame(rho, form, K), th, E, alpha)
    betas = _spec_betas(tau)
    consts = bound_constants(betas, E)
    fr = _frame(rho, betas, extra_power=2 * E.degree)
    tau_a = None
    if alpha != 0 and not E.is_zero():
        tau_a = tau_alpha(ThermalSpec.from_beta(*betas), E, alpha, fr.K)
    eps = weighted_hs(fr, tau_a)
    D = _divergence(fr)
    bound = consts.c_final * (alpha ** 2 + eps)
    return RelentBound(bound, D <= bound + HOLD_TOL, D, eps, balancing_t(eps, fr.modes), consts)


@dataclass(frozen=True)
class NonGaussianity:
    d_g: float
    bound: float
    holds: bool
    detail: RelentBound

    def __iter__(self):
        return iter((self.d_g, self.bound, self.holds))


def non_gaussianity_upper(rho) -> NonGaussianity:
    """d_G(rho) = D(rho||rho_G) against the corollary bound (E = 0)."""
    if not isinstance(rho, DiagonalState) and np.max(np.abs(first_moments(rho))) > 1e-8:
        rho, _ = center(rho)
    gamma = covariance(rho)
    m = rho.modes
    spec = GaussianSpec(m, np.zeros(2 * m), gamma)
    if m > 1:
        try:
            thermal_of(spec)
        except UnsupportedCovariance:
            raise
    if m == 1 and np.isinf(ThermalSpec.from_nu(sqrt(max(float(np.linalg.det(gamma)), 0.0))).betas[0]):
        # covariance I forces the vacuum, which is its own Gaussification
        p0 = float(np.real(rho.probs[0] if isinstance(rho, DiagonalState) else rho.entries[0, 0]))
        if p0 < 1.0 - 1e-9:
            raise InfiniteBeta("vacuum covariance on a state that is not the vacuum")
        return NonGaussianity(0.0, 0.0, True, None)
    res = relent_upper(rho, spec)
    return NonGaussianity(res.divergence, res.bound, res.holds, res)


# ------------------------------------------------------------ tail sums

@dataclass(frozen=True)
class TailSums:
    f_exact: float
    f_bound: float
    g_exact: float
    g_bound: float

    def __iter__(self):
        return iter((self.f_exact, self.f_bound, self.g_exact, self.g_bound))


def appendix_tail_sums(beta, t: float) -> TailSums:
    """f = sum_{beta.k>t} e^{-beta.k} and g = sum_{beta.k>t} (k_1+1) e^{-beta.k}
    by enumeration, next to their closed-form upper bounds."""
    b = _betas(beta)
    m = b.size
    if m > 3:
        raise SpecError("tail sums are enumerated for at most three modes")
    # per-mode depth where e^{-beta k} (k+1) drops below 1e-14 of the total
    depth = [int(np.ceil((32.0 * log(10) + 2 * log(40.0 / bj + 1)) / bj)) + 1 for bj in b]
    axes = [np.arange(d + 1, dtype=float) for d in depth]
    grids = np.meshgrid(*axes, indexing="ij")
    bk = sum(bj * g for bj, g in zip(b, grids))
    w = np.exp(-bk)
    out = bk > t
    f = float(np.sum(w[out]))
    g = float(np.sum(((grids[0] + 1) * w)[out]))
    nu = float(np.prod(1 - np.exp(-b)))
    fb = 2 ** m * float(np.prod(b + 1)) / nu * (t + 1) ** (m - 1) * exp(-t)
    gb = 2 ** m * float(np.prod((b + 1) ** 2)) / nu ** 2 * (t + 1) ** m * exp(-t)
    return TailSums(f, fb, g, gb)


__all__ = [
    "OddPolynomial", "BoundConstants", "bound_constants", "ladder_coefficients", "tau_alpha",
    "m_beta_e", "pointwise_bound_check", "truncated_rhs", "TruncatedRHS", "balancing_t",
    "relent_upper", "RelentBound", "non_gaussianity_upper", "NonGaussianity",
    "appendix_tail_sums", "TailSums", "weighted_hs",
]
