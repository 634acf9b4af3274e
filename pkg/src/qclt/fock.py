"""Truncated Fock-basis states and their functionals.

Single-mode operators use a per-mode cutoff K (indices 0..K). Multi-mode
operators use a total-number cutoff n: the basis is every multi-index k with
|k| <= n, ordered by total photon number and then lexicographically.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from math import ceil, sqrt

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import (
    BadTrace,
    CutoffTooSmall,
    EigenFailure,
    NegativeEigenvalue,
    NonHermitian,
    SpecError,
    SupportViolation,
    ZeroMass,
)

HERMITIAN_TOL = 1e-12
EIG_TOL = 1e-10
ENTROPY_FLOOR = 1e-15


@dataclass(frozen=True)
class FockCutoff:
    value: int
    modes: int = 1

    def __post_init__(self):
        if self.value < 0 or self.modes < 1:
            raise SpecError(f"invalid cutoff {self.value} for {self.modes} modes")

    @property
    def dim(self) -> int:
        return len(fock_indices(self.modes, self.value))


@lru_cache(maxsize=64)
def fock_indices(modes: int, n: int) -> tuple:
    """Multi-indices with total photon number <= n, in basis order."""
    if modes == 1:
        return tuple((k,) for k in range(n + 1))
    out = []
    for tot in range(n + 1):
        for k in product(range(tot + 1), repeat=modes):
            if sum(k) == tot:
                out.append(k)
    out.sort(key=lambda k: (sum(k), tuple(-x for x in k)))
    return tuple(out)


@lru_cache(maxsize=64)
def _position(modes: int, n: int) -> dict:
    return {k: i for i, k in enumerate(fock_indices(modes, n))}


def total_number(cutoff: FockCutoff) -> np.ndarray:
    return np.array([sum(k) for k in fock_indices(cutoff.modes, cutoff.value)], dtype=float)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    modes: int
    cutoff: FockCutoff
    entries: np.ndarray
    trace_deficit: float = 0.0

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def K(self) -> int:
        return self.cutoff.value

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """Fock-diagonal single-mode state.

    tail_mass is the probability beyond K. tail_number, when known, is the
    photon-number mass sum_{k>K} k p_k. ratio marks a geometric (thermal)
    continuation q_{k+1}/q_k beyond K.
    """

    probs: np.ndarray
    tail_mass: float = 0.0
    tail_number: float | None = None
    ratio: float | None = None

    modes = 1

    @property
    def K(self) -> int:
        return len(self.probs) - 1

    @property
    def cutoff(self) -> FockCutoff:
        return FockCutoff(self.K, 1)

    def trace(self) -> float:
        return float(self.probs.sum())


@dataclass(frozen=True)
class MomentValue:
    order: float
    value: float
    tail: float = 0.0


def build_density(entries, modes: int = 1, cutoff: FockCutoff | int | None = None,
                  trace_deficit: float = 0.0) -> DensityOperator:
    a = np.array(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SpecError("density matrix must be square")
    if cutoff is None:
        if modes != 1:
            raise SpecError("multi-mode states need an explicit cutoff")
        cutoff = FockCutoff(a.shape[0] - 1, 1)
    elif isinstance(cutoff, int):
        cutoff = FockCutoff(cutoff, modes)
    if modes < 1 or cutoff.modes != modes or cutoff.dim != a.shape[0]:
        raise SpecError(f"matrix of size {a.shape[0]} does not match cutoff {cutoff}")
    if not np.all(np.isfinite(a)):
        raise SpecError("non-finite density entries")
    asym = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if asym > HERMITIAN_TOL:
        raise NonHermitian(f"max |A - A^dag| = {asym:.3e}")
    a = 0.5 * (a + a.conj().T)
    evals = _eigvalsh(a)
    if evals.size and evals.min() < -EIG_TOL:
        raise NegativeEigenvalue(f"min eigenvalue {evals.min():.3e}")
    tr = float(np.real(np.trace(a)))
    if trace_deficit == 0.0 and abs(tr - 1.0) > 1e-8:
        raise BadTrace(f"trace {tr!r}")
    if trace_deficit > 0 and not (1 - trace_deficit - 1e-10 <= tr <= 1 + 1e-10):
        raise BadTrace(f"trace {tr!r} inconsistent with deficit {trace_deficit!r}")
    return DensityOperator(modes, cutoff, a, float(trace_deficit))


def diagonal_state(probs, tail_mass: float | None = None, tail_number=None, ratio=None) -> DiagonalState:
    p = np.array(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise SpecError("probability vector must be 1-d and nonempty")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise NegativeEigenvalue("negative or non-finite probability")
    if tail_mass is None:
        tail_mass = max(0.0, 1.0 - float(p.sum()))
    tot = p.sum() + tail_mass
    if abs(tot - 1.0) > 1e-10:
        raise BadTrace(f"probabilities plus tail sum to {tot!r}")
    return DiagonalState(p, float(tail_mass), tail_number, ratio)


def _eigvalsh(a):
    try:
        return np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def _eigh(a):
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def as_dense(state, K: int | None = None) -> DensityOperator:
    """Dense view of a state, optionally re-embedded at a larger single-mode cutoff."""
    if isinstance(state, DiagonalState):
        p = state.probs
        K = state.K if K is None else K
        q = np.zeros(K + 1)
        n = min(K, state.K) + 1
        q[:n] = p[:n]
        deficit = state.tail_mass + float(p[n:].sum())
        return DensityOperator(1, FockCutoff(K), np.diag(q).astype(complex), deficit)
    if K is None or K == state.K:
        return state
    return embed(state, K)


def embed(rho: DensityOperator, n: int) -> DensityOperator:
    """Re-index an operator at cutoff n (zero padding or cropping)."""
    new = FockCutoff(n, rho.modes)
    pos = _position(rho.modes, n)
    old_idx = fock_indices(rho.modes, rho.K)
    src, dst = [], []
    for i, k in enumerate(old_idx):
        j = pos.get(k)
        if j is not None:
            src.append(i)
            dst.append(j)
    out = np.zeros((new.dim, new.dim), dtype=complex)
    out[np.ix_(dst, dst)] = rho.entries[np.ix_(src, src)]
    lost = rho.trace() - float(np.real(np.trace(out)))
    return DensityOperator(rho.modes, new, out, rho.trace_deficit + max(lost, 0.0))


def fock_diag(state) -> np.ndarray:
    if isinstance(state, DiagonalState):
        return state.probs
    return np.real(np.diag(state.entries))


def annihilation(modes: int, n: int, j: int = 0) -> np.ndarray:
    """Matrix of a_j on the truncated space (exact entries)."""
    idx = fock_indices(modes, n)
    pos = _position(modes, n)
    a = np.zeros((len(idx), len(idx)))
    for col, k in enumerate(idx):
        if k[j] > 0:
            lower = k[:j] + (k[j] - 1,) + k[j + 1:]
            a[pos[lower], col] = sqrt(k[j])
    return a


def truncate(rho, n: int):
    """Project onto total photon number <= n and renormalize."""
    if n < 0:
        raise SpecError("truncation level must be nonnegative")
    if isinstance(rho, DiagonalState):
        p = rho.probs[: n + 1]
        kept = float(p.sum())
        if kept < 1e-300:
            raise ZeroMass("no mass below the truncation level")
        return DiagonalState(p / kept), kept
    keep = [i for i, k in enumerate(fock_indices(rho.modes, rho.K)) if sum(k) <= n]
    sub = rho.entries[np.ix_(keep, keep)]
    kept = float(np.real(np.trace(sub)))
    if kept < 1e-300:
        raise ZeroMass("no mass below the truncation level")
    level = min(n, rho.K)
    return DensityOperator(rho.modes, FockCutoff(level, rho.modes), sub / kept), kept


def moment(rho, kappa: float) -> MomentValue:
    """M_kappa = tr(rho (N + m)^(kappa/2)) over the retained Fock weights."""
    if kappa <= 0:
        raise SpecError("moment order must be positive")
    if isinstance(rho, DiagonalState):
        k = np.arange(rho.K + 1, dtype=float)
        return MomentValue(kappa, float(rho.probs @ (k + 1.0) ** (kappa / 2)), rho.tail_mass)
    w = fock_diag(rho)
    tot = total_number(rho.cutoff)
    return MomentValue(kappa, float(w @ (tot + rho.modes) ** (kappa / 2)), rho.trace_deficit)


def _ladder_expectations(rho: DensityOperator):
    """<a_j>, <a_i a_j> and <a_i^dag a_j>, all exact in the truncated space."""
    m = rho.modes
    ops = [annihilation(m, rho.K, j) for j in range(m)]
    r = rho.entries
    first = np.array([np.trace(r @ a) for a in ops])
    aa = np.array([[np.trace(r @ ai @ aj) for aj in ops] for ai in ops])
    ada = np.array([[np.trace(r @ ai.T @ aj) for aj in ops] for ai in ops])
    return first, aa, ada


def first_moments(rho) -> np.ndarray:
    """d = tr(rho R) with R = (x_1, p_1, ..., x_m, p_m)."""
    if isinstance(rho, DiagonalState):
        return np.zeros(2)
    alpha = np.array([np.trace(rho.entries @ annihilation(rho.modes, rho.K, j))
                      for j in range(rho.modes)])
    d = np.empty(2 * rho.modes)
    d[0::2] = sqrt(2.0) * alpha.real
    d[1::2] = sqrt(2.0) * alpha.imag
    return d


def covariance(rho) -> np.ndarray:
    """gamma = tr(rho {R - d, (R - d)^T}); the vacuum gives the identity."""
    if isinstance(rho, DiagonalState):
        k = np.arange(rho.K + 1, dtype=float)
        mean_n = float(rho.probs @ k) + (rho.tail_number or 0.0)
        return (2.0 * mean_n + rho.trace() + rho.tail_mass) * np.eye(2)
    m = rho.modes
    tr = rho.trace()
    first, aa, ada = _ladder_expectations(rho)
    # anticommutators of A = (a_1, a_1^dag, ..., a_m, a_m^dag)
    S = np.zeros((2 * m, 2 * m), dtype=complex)
    for i in range(m):
        for j in range(m):
            S[2 * i, 2 * j] = 2 * aa[i, j]
            S[2 * i + 1, 2 * j + 1] = 2 * np.conj(aa[j, i])
            S[2 * i, 2 * j + 1] = 2 * ada[j, i] + (tr if i == j else 0.0)
            S[2 * i + 1, 2 * j] = 2 * ada[i, j] + (tr if i == j else 0.0)
    T = np.zeros((2 * m, 2 * m), dtype=complex)
    for j in range(m):
        T[2 * j, 2 * j] = T[2 * j, 2 * j + 1] = 1 / sqrt(2)
        T[2 * j + 1, 2 * j] = -1j / sqrt(2)
        T[2 * j + 1, 2 * j + 1] = 1j / sqrt(2)
    g = np.real(T @ S @ T.T)
    d = np.empty(2 * m)
    d[0::2] = sqrt(2.0) * first.real
    d[1::2] = sqrt(2.0) * first.imag
    g = g - 2.0 * np.outer(d, d)
    return 0.5 * (g + g.T)


def _as_matrix(T) -> np.ndarray:
    if isinstance(T, DensityOperator):
        return T.entries
    if isinstance(T, DiagonalState):
        return np.diag(T.probs)
    return np.asarray(T)


def schatten_norm(T, p: int) -> float:
    if isinstance(T, DiagonalState):
        x = np.abs(T.probs)
        return float(x.sum() + T.tail_mass) if p == 1 else float(np.sqrt(x @ x))
    a = _as_matrix(T)
    if p == 2:
        return float(np.sqrt(np.sum(np.abs(a) ** 2)))
    if p != 1:
        raise SpecError("only p in {1, 2} is supported")
    if np.max(np.abs(a - a.conj().T), initial=0.0) <= 1e-10:
        return float(np.abs(_eigvalsh(0.5 * (a + a.conj().T))).sum())
    try:
        return float(np.linalg.svd(a, compute_uv=False).sum())
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def _common(a, b):
    if isinstance(a, DiagonalState) and isinstance(b, DiagonalState):
        K = max(a.K, b.K)
        pa = np.zeros(K + 1)
        pb = np.zeros(K + 1)
        pa[: a.K + 1] = a.probs
        pb[: b.K + 1] = b.probs
        return pa, pb
    K = max(a.K, b.K)
    if a.modes != b.modes:
        raise SpecError("mode counts differ")
    return as_dense(a, K).entries if a.modes == 1 else a.entries, \
        as_dense(b, K).entries if b.modes == 1 else b.entries


def trace_distance(a, b) -> float:
    """||a - b||_1 (no 1/2 factor); unresolved tail mass differences are added."""
    x, y = _common(a, b)
    tails = abs(_tail(a) - _tail(b))
    if x.ndim == 1:
        return float(np.abs(x - y).sum() + tails)
    return schatten_norm(x - y, 1) + tails


def hs_distance(a, b) -> float:
    x, y = _common(a, b)
    if x.ndim == 1:
        return float(np.sqrt(np.sum((x - y) ** 2)))
    return schatten_norm(x - y, 2)


def _tail(s) -> float:
    if isinstance(s, DiagonalState):
        return s.tail_mass
    return s.trace_deficit


def von_neumann_entropy(rho) -> float:
    if isinstance(rho, DiagonalState):
        lam = rho.probs
    else:
        lam = _eigvalsh(rho.entries)
    lam = lam[lam > ENTROPY_FLOOR]
    return float(-(lam * np.log(lam)).sum())


def relative_entropy(rho, sigma) -> float:
    """D(rho || sigma) in nats.

    Fock-diagonal pairs use sum p ln(p/q). When sigma carries a geometric
    continuation and rho reports mass beyond its cutoff, the cross term of
    that tail is added exactly and its self term is bounded by T ln T.
    """
    if isinstance(rho, DiagonalState) and isinstance(sigma, DiagonalState):
        return _relent_diag(rho, sigma)
    if isinstance(sigma, DiagonalState) and rho.modes == 1:
        K = max(rho.K, sigma.K)
        rho = as_dense(rho, K)
        sig_diag = np.zeros(K + 1)
        sig_diag[: sigma.K + 1] = sigma.probs
        return _relent_dense(rho.entries, None, sig_diag)
    if isinstance(rho, DiagonalState):
        rho = as_dense(rho, sigma.K)
    x, y = _common(rho, sigma)
    off = y - np.diag(np.diag(y))
    if np.max(np.abs(off), initial=0.0) == 0.0:
        return _relent_dense(x, None, np.real(np.diag(y)))
    return _relent_dense(x, y, None)


def _relent_diag(rho: DiagonalState, sigma: DiagonalState) -> float:
    K = max(rho.K, sigma.K)
    p = np.zeros(K + 1)
    q = np.zeros(K + 1)
    p[: rho.K + 1] = rho.probs
    q[: sigma.K + 1] = sigma.probs
    if sigma.ratio is not None and sigma.K < K:
        k = np.arange(sigma.K + 1, K + 1)
        q[sigma.K + 1:] = sigma.probs[-1] * sigma.ratio ** (k - sigma.K)
    bad = (p > 1e-12) & (q < 1e-300)
    if bad.any():
        raise SupportViolation(f"rho has weight where sigma vanishes (k = {int(np.argmax(bad))})")
    m = (p > 0) & (q >= 1e-300)
    val = float(np.sum(p[m] * (np.log(p[m]) - np.log(q[m]))))
    T = rho.tail_mass
    if T > 0 and sigma.ratio is not None and 0 < sigma.ratio < 1:
        # beyond K, q_k = c r^k with c fixed by the last retained weight
        r = sigma.ratio
        log_c = np.log(q[K]) - K * np.log(r)
        nt = rho.tail_number if rho.tail_number is not None else (K + 1) * T
        val += T * np.log(T) - T * log_c - nt * np.log(r)
    return val


def _relent_dense(x, y, y_diag) -> float:
    lam = _eigvalsh(x)
    lam_pos = lam[lam > ENTROPY_FLOOR]
    neg_s = float((lam_pos * np.log(lam_pos)).sum())
    if y_diag is not None:
        rd = np.real(np.diag(x))
        bad = (rd > 1e-12) & (y_diag < 1e-300)
        if bad.any():
            raise SupportViolation("rho has weight where sigma vanishes")
        m = y_diag >= 1e-300
        return neg_s - float(rd[m] @ np.log(y_diag[m]))
    mu, v = _eigh(y)
    w = np.real(np.einsum("ij,jk,ki->i", v.conj().T, x, v))
    bad = (w > 1e-12) & (mu < 1e-300)
    if bad.any():
        raise SupportViolation("rho has weight where sigma vanishes")
    m = mu >= 1e-300
    return neg_s - float(w[m] @ np.log(mu[m]))


def _single_mode_displacement(z: complex, K: int) -> np.ndarray:
    if z == 0:
        return np.eye(K + 1, dtype=complex)
    x = abs(z) ** 2
    m = np.arange(K + 1)[:, None]
    n = np.arange(K + 1)[None, :]
    hi = np.maximum(m, n)
    lo = np.minimum(m, n)
    d = hi - lo
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        logpre = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) + d * np.log(abs(z)) - 0.5 * x
        lag = eval_genlaguerre(lo, d, x)
        mag = np.exp(logpre) * lag
    phase = np.exp(1j * np.angle(z) * (m - n))
    sign = np.where((m < n) & (d % 2 == 1), -1.0, 1.0)
    return mag * phase * sign


def displacement_matrix(z, cutoff: FockCutoff | int, check_upto: int = 0) -> np.ndarray:
    """Matrix of D_z = exp(sum z_j a_j^dag - conj(z_j) a_j) on the retained block.

    Entries are exact (associated Laguerre closed form); columns with total
    photon number <= check_upto must keep norm >= 1 - 1e-8.
    """
    if isinstance(cutoff, int):
        cutoff = FockCutoff(cutoff)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if len(z) != cutoff.modes:
        raise SpecError("displacement length does not match the number of modes")
    n = cutoff.value
    if cutoff.modes == 1:
        D = _single_mode_displacement(complex(z[0]), n)
    else:
        idx = fock_indices(cutoff.modes, n)
        per = [_single_mode_displacement(complex(zj), n) for zj in z]
        D = np.ones((len(idx), len(idx)), dtype=complex)
        arr = np.array(idx)
        for j in range(cutoff.modes):
            D = D * per[j][np.ix_(arr[:, j], arr[:, j])]
    tot = total_number(cutoff)
    cols = tot <= check_upto
    norms = np.sum(np.abs(D[:, cols]) ** 2, axis=0)
    if norms.size and norms.min() < 1 - 1e-8:
        raise CutoffTooSmall(f"displacement column norm {norms.min():.3e} at cutoff {n}")
    return D


def unitarity_defect(D: np.ndarray, upto: int | None = None) -> float:
    k = D.shape[0] if upto is None else upto + 1
    G = D[:, :k].conj().T @ D[:, :k]
    return float(np.max(np.abs(G - np.eye(k))))


def center(rho):
    """Displace rho so that its first moments vanish.

    Returns the centered state (at an enlarged cutoff with headroom for the
    shift) and the displacement z = tr(rho a).
    """
    if isinstance(rho, DiagonalState):
        return rho, np.zeros(1, dtype=complex)
    z = np.array([np.trace(rho.entries @ annihilation(rho.modes, rho.K, j))
                  for j in range(rho.modes)])
    if np.max(np.abs(z)) < 1e-14:
        return rho, np.zeros(rho.modes, dtype=complex)
    s = float(np.sum(np.abs(z)))
    head = ceil(4 * s * s) + ceil(6 * s * sqrt(rho.K + 1)) + 8
    big = embed(rho, rho.K + head)
    D = displacement_matrix(z, big.cutoff)
    out = D.conj().T @ big.entries @ D
    out = 0.5 * (out + out.conj().T)
    deficit = max(0.0, rho.trace() - float(np.real(np.trace(out)))) + rho.trace_deficit
    res = DensityOperator(rho.modes, big.cutoff, out, deficit)
    if np.max(np.abs(first_moments(res))) > 1e-8:
        raise CutoffTooSmall("centering left residual first moments; raise the cutoff")
    return res, z


# ---------------------------------------------------------------- file formats

def write_state(path, state) -> None:
    with open(path, "w") as fh:
        if isinstance(state, DiagonalState):
            fh.write(f"{state.K}\n")
            for k, p in enumerate(state.probs):
                fh.write(f"{k} {float(p)!r}\n")
            return
        fh.write(f"{state.modes} {state.K}\n")
        a = state.entries
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                fh.write(f"{i} {j} {float(a[i, j].real)!r} {float(a[i, j].imag)!r}\n")


def read_state(path):
    try:
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise SpecError(f"{path} is empty")
    head = lines[0]
    try:
        if len(head) == 1:
            K = int(head[0])
            p = np.zeros(K + 1)
            for row in lines[1:]:
                p[int(row[0])] = float(row[1])
            return diagonal_state(p)
        m, K = int(head[0]), int(head[1])
        cut = FockCutoff(K, m)
        a = np.zeros((cut.dim, cut.dim), dtype=complex)
        for row in lines[1:]:
            a[int(row[0]), int(row[1])] = complex(float(row[2]), float(row[3]))
    except (ValueError, IndexError) as exc:
        raise SpecError(f"malformed state file {path}: {exc}") from exc
    return build_density(a, m, cut)
