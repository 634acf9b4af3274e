"""Thermal mixtures with heavy-tailed temperature densities.

rho = int w(s) tau_s ds with tau_s thermal of nu = 4 s^2 and w a plateau on
[1/2, 1) glued to a power-law tail a (p-1) s^-p on [1, inf). Both integral
constraints int w = int s^2 w = 1 hold, so every such rho has the
covariance of tau_1. The characteristic function is

    chi_rho(z) = e^{-2|z|^2} (1 + G(|z|)),
    G(e) = int w(s) phi(2 (s^2 - 1) e^2) ds,  phi(x) = e^-x - 1 + x,

which lets chi_rho(z / sqrt n)^n be evaluated at any n without touching
Fock space. Also here: the reference operator for rho^{box n} built from
the rescaled temperatures s_n, and the function h(t) with its threshold.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import kernels
from .errors import NoValidDensity, QuadratureDivergence, SpecError
from .fock import DiagonalState
from .phase_space import radial_grid

GL_ORDER = 32
N_PANELS = 45
KINDS = {"trace": 4.0, "relent": 5.0}
H_SERIES_CUT = 1.0

_gx, _gw = leggauss(GL_ORDER)


# ------------------------------------------------------------ densities

@dataclass(frozen=True)
class DivergenceFlag:
    """Returned in place of a moment that is infinite."""

    kappa: float
    threshold: float

    def __bool__(self):
        return False

    def __repr__(self):
        return f"DivergenceFlag(kappa={self.kappa}, diverges for kappa >= {self.threshold})"


@dataclass(frozen=True)
class MixtureDensity:
    """w(s) = plateau on [1/2, 1), a (p-1) s^-p on [1, inf)."""

    theta: float
    tail_exponent: float
    a: float
    plateau: float
    kind: str = ""

    def __post_init__(self):
        if self.a < 0 or self.plateau < 0:
            raise NoValidDensity("negative density")
        if self.tail_exponent <= 3:
            raise NoValidDensity("second moment must be finite")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        p = self.tail_exponent
        with np.errstate(divide="ignore"):
            tail = self.a * (p - 1) * np.where(s >= 1, s, 1.0) ** -p
        return np.where(s < 0.5, 0.0, np.where(s < 1, self.plateau, tail))

    def nodes(self):
        """(s, weights, S): Gauss-Legendre on the plateau and on dyadic
        panels [2^j, 2^{j+1}] up to S = 2^N_PANELS."""
        s = [0.25 * _gx + 0.75]
        w = [0.25 * _gw * self.plateau]
        p = self.tail_exponent
        for j in range(N_PANELS):
            lo, hi = 2.0 ** j, 2.0 ** (j + 1)
            ss = 0.5 * (hi - lo) * _gx + 0.5 * (hi + lo)
            s.append(ss)
            w.append(0.5 * (hi - lo) * _gw * self.a * (p - 1) * ss ** -p)
        return np.concatenate(s), np.concatenate(w), 2.0 ** N_PANELS

    def tail_power(self, kappa: float, S: float) -> float:
        """int_S^inf s^kappa w(s) ds (finite kappa < p - 1)."""
        p = self.tail_exponent
        return self.a * (p - 1) * S ** (kappa + 1 - p) / (p - 1 - kappa)


@dataclass(frozen=True)
class PointMass:
    """w = delta(s - s0); a Gaussian control for the mixture routines."""

    s0: float = 1.0
    theta: float = 0.0
    kind: str = "point"

    def nodes(self):
        return np.array([self.s0]), np.array([1.0]), float("inf")

    def tail_power(self, kappa, S):
        return 0.0


def plateau_solve(p: float, theta: float) -> MixtureDensity:
    """Constant plateau c0 and tail amplitude a from int w = int s^2 w = 1."""
    if not 0 < theta < 1:
        raise SpecError("theta must lie in (0, 1)")
    kind = {round(4 - theta, 12): "trace", round(5 - theta, 12): "relent"}.get(round(p, 12))
    if kind is None:
        raise SpecError("tail exponent must be 4 - theta or 5 - theta")
    # int_{1/2}^1 ds = 1/2, int_{1/2}^1 s^2 ds = 7/24, tail integrals 1 and (p-1)/(p-3)
    A = np.array([[0.5, 1.0], [7.0 / 24.0, (p - 1) / (p - 3)]])
    c0, a = np.linalg.solve(A, [1.0, 1.0])
    if c0 < 0 or a <= 0:
        raise NoValidDensity(f"plateau ansatz fails: c0 = {c0:.3g}, a = {a:.3g}")
    return MixtureDensity(theta, float(p), float(a), float(c0), kind)


def mixture_family(kind: str, theta: float) -> MixtureDensity:
    if kind not in KINDS:
        raise SpecError(f"unknown mixture kind {kind!r}")
    return plateau_solve(KINDS[kind] - theta, theta)


def w_moment(w, kappa: float):
    """int s^kappa w(s) ds in closed form, or a DivergenceFlag."""
    if isinstance(w, PointMass):
        return w.s0 ** kappa
    p = w.tail_exponent
    if kappa >= p - 1:
        return DivergenceFlag(kappa, p - 1)
    if kappa == -1:
        plateau = w.plateau * log(2.0)
    else:
        plateau = w.plateau * (1 - 0.5 ** (kappa + 1)) / (kappa + 1)
    return plateau + w.a * (p - 1) / (p - 1 - kappa)


def w_moment_quadrature(w, kappa: float) -> float:
    s, wt, S = w.nodes()
    return float(wt @ s ** kappa) + (w.tail_power(kappa, S) if np.isfinite(S) else 0.0)


# ------------------------------------------------------------ thermal family

@dataclass(frozen=True)
class ThermalFamilyPoint:
    s: float

    def __post_init__(self):
        if self.s < 0.5:
            raise SpecError("s must be at least 1/2")

    @property
    def beta_s(self) -> float:
        return log((4 * self.s ** 2 + 1) / (4 * self.s ** 2 - 1)) if self.s > 0.5 else float("inf")

    @property
    def nu(self) -> float:
        return 4 * self.s ** 2

    def s_n(self, n: float) -> float:
        return sqrt(1 + (self.s ** 2 - 1) / n)

    def weights(self, K: int) -> np.ndarray:
        return np.exp(_log_tau(np.array([self.s]), K))[0]


def _log_tau(s: np.ndarray, K: int) -> np.ndarray:
    """log <k|tau_s|k> for k <= K, rows indexed by s."""
    s2 = 4 * np.asarray(s, dtype=float) ** 2
    log_a = np.log(2.0 / (s2 + 1))
    with np.errstate(divide="ignore"):
        log_q = np.log1p(-2.0 / (s2 + 1))
    k = np.arange(K + 1)
    with np.errstate(invalid="ignore"):
        step = np.where(k[None, :] == 0, 0.0, log_q[:, None] * k[None, :])
    return log_a[:, None] + step


def _weights_in_s(s: np.ndarray, wt: np.ndarray, K: int, chunk: int = 256) -> np.ndarray:
    out = np.zeros(K + 1)
    for i in range(0, len(s), chunk):
        out += wt[i: i + chunk] @ np.exp(_log_tau(s[i: i + chunk], K))
    return out


def mixture_diag(w, K: int) -> DiagonalState:
    """Fock weights of int w(s) tau_s ds by quadrature over s."""
    s, wt, S = w.nodes()
    if not np.all(np.isfinite(wt)):
        raise QuadratureDivergence("non-finite quadrature weights")
    p = _weights_in_s(s, wt, K)
    s2 = 4 * s ** 2
    with np.errstate(divide="ignore"):
        qK = np.exp((K + 1) * np.log1p(-2.0 / (s2 + 1)))
    tail = float(wt @ qK)
    # q / (1 - q) = (4 s^2 - 1) / 2, kept exact where q rounds to 1
    num = qK * (K + 1 + 0.5 * (s2 - 1))
    tail_number = float(wt @ num)
    if np.isfinite(S):
        # beyond S every tau_s is flat at the retained levels: its mass sits above K
        tail += w.tail_power(0.0, S)
        tail_number += w.tail_power(2.0, S) * 2.0
    return DiagonalState(p, tail, tail_number)


# ------------------------------------------------------------ characteristic route

def _phi(x: np.ndarray) -> np.ndarray:
    out = np.expm1(-x) + x
    small = np.abs(x) < 1e-2
    xs = x[small]
    out[small] = xs ** 2 / 2 - xs ** 3 / 6 + xs ** 4 / 24 - xs ** 5 / 120 + xs ** 6 / 720 - xs ** 7 / 5040
    return out


def char_excess(w, eps) -> np.ndarray:
    """G(e) with chi_rho = e^{-2 e^2}(1 + G(e)), e = |z|."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    s, wt, S = w.nodes()
    out = np.empty(eps.shape)
    for i in range(0, eps.size, 2048):
        e = eps[i: i + 2048]
        x = 2 * (s[None, :] ** 2 - 1) * e[:, None] ** 2
        out[i: i + 2048] = _phi(x) @ wt
    if np.isfinite(S):
        # beyond S the exponential has died: phi(x) = x - 1
        e2 = eps ** 2
        out += 2 * e2 * (w.tail_power(2.0, S) - w.tail_power(0.0, S)) - w.tail_power(0.0, S)
    return out


def mixture_char(w, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return np.exp(-2 * r * r) * (1 + char_excess(w, r))


@dataclass(frozen=True)
class MixturePower:
    """rho^{box n} of a mixture on cutoff K, relative to rho_G = tau_1."""

    n: int
    K: int
    delta: np.ndarray        # <k|rho^{box n} - tau_1|k>, k <= K
    tail: float              # mass difference beyond K
    reference_gap: np.ndarray

    @property
    def gaussian(self) -> np.ndarray:
        return 0.4 * 0.6 ** np.arange(self.K + 1)

    @property
    def probs(self) -> np.ndarray:
        return self.gaussian + self.delta

    def state(self) -> DiagonalState:
        p = np.clip(self.probs, 0.0, None)
        tail_g = 0.6 ** (self.K + 1)
        mass = max(tail_g + self.tail, 0.0)
        # the mean photon number 3/2 is preserved by the convolution
        nt = max(1.5 - float(np.arange(self.K + 1) @ p), 0.0)
        return DiagonalState(p, mass, nt)

    def trace_dist(self) -> float:
        return float(np.abs(self.delta).sum() + abs(self.tail))

    def hs_dist(self) -> float:
        return float(sqrt(np.sum(self.delta ** 2)))

    def relent(self) -> float:
        from .fock import relative_entropy
        g = DiagonalState(self.gaussian, 0.6 ** (self.K + 1), ratio=0.6)
        return relative_entropy(self.state(), g)

    def residual(self) -> float:
        """sup_k |<k|rho^{box n} - reference|k>| from the characteristic route."""
        return float(np.abs(self.reference_gap).max())


def mixture_power(w, n: int, K: int, per_unit: int | None = None) -> MixturePower:
    """Invert chi_rho(z / sqrt n)^n - e^{-2|z|^2} onto the Fock diagonal."""
    g = radial_grid(K, per_unit=per_unit)
    r = g.radii
    G = char_excess(w, r / sqrt(n))
    L = n * np.log1p(G)
    e2 = np.exp(-2 * r * r)
    big = L > 1
    with np.errstate(under="ignore"):
        dchi = np.where(big, np.exp(np.minimum(-2 * r * r + L, 700)) - e2, e2 * np.expm1(np.minimum(L, 1)))
    if np.max(np.abs(dchi[r >= r.max() - 0.5])) > 1e-10:
        raise QuadratureDivergence("characteristic function has not decayed at the grid edge")
    u = np.ascontiguousarray(r * r)
    d = kernels.laguerre_project(u, np.ascontiguousarray(g.weights * dchi), K)
    res = kernels.laguerre_project(u, np.ascontiguousarray(g.weights * (dchi - e2 * n * G)), K)
    return MixturePower(n, K, d, -float(d.sum()), res)


# ------------------------------------------------------------ rescaled reference

def lemma72_reference(w, n: int, K: int, power: MixturePower | None = None):
    """Reference tau_1 + n int w(s)(tau_{s_n} - tau_1) ds built in Fock space,
    and its sup-norm distance from the diagonal of rho^{box n}."""
    s, wt, S = w.nodes()
    s_n = np.sqrt(1 + (s ** 2 - 1) / n)
    g = 0.4 * 0.6 ** np.arange(K + 1)
    mass = float(wt.sum()) + (w.tail_power(0.0, S) if np.isfinite(S) else 0.0)
    ref = g + n * (_weights_in_s(s_n, wt, K) - mass * g)
    if n == 1:
        actual = mixture_diag(w, K).probs
    else:
        power = power if power is not None else mixture_power(w, n, K)
        actual = power.probs
    return ref, float(np.abs(actual - ref).max())


# ------------------------------------------------------------ h(t)

def _h_series(t: np.ndarray) -> np.ndarray:
    # h(t) = sum_{i>=2} (-1)^i (2i+1) t^{2i} / (2i+2)!
    t2 = t * t
    out = np.zeros_like(t)
    term = t2 ** 2 / 720.0          # t^4 / 6!
    for i in range(2, 14):
        out += (-1) ** i * (2 * i + 1) * term
        term = term * t2 / ((2 * i + 3) * (2 * i + 4))
    return out


def h_eval(t):
    """h(t) = sin t / t + (cos t - 1)/t^2 - 1/2 + t^2/8."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    small = np.abs(t) < H_SERIES_CUT
    out[small] = _h_series(t[small])
    tb = t[~small]
    out[~small] = np.sin(tb) / tb - 2 * np.sin(tb / 2) ** 2 / tb ** 2 - 0.5 + tb ** 2 / 8
    return float(out[0]) if scalar else out


def h_threshold_search(step: float = 1e-3, t_max: float = 100.0) -> float:
    """Smallest grid point c with h(t) >= t^2/16 at every grid |t| in [c, t_max]."""
    t = np.arange(0, round(t_max / step) + 1) * step
    bad = np.nonzero(h_eval(t) < t ** 2 / 16)[0]
    if bad.size == 0:
        return 0.0
    return float(t[bad[-1] + 1]) if bad[-1] + 1 < t.size else float("inf")


__all__ = [
    "MixtureDensity", "PointMass", "DivergenceFlag", "plateau_solve", "mixture_family", "w_moment",
    "w_moment_quadrature", "ThermalFamilyPoint", "mixture_diag", "char_excess", "mixture_char",
    "MixturePower", "mixture_power", "lemma72_reference", "h_eval", "h_threshold_search",
]
