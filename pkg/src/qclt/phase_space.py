"""Characteristic and Wigner functions, Plancherel, the trace-norm bound via
A^dag T A, and inversion from characteristic samples back to Fock matrices.

Conventions: chi_T(z) = tr(T D_z) and
W_T(z) = pi^-2 int chi_T(w) exp(z conj(w) - conj(z) w) d^2 w.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import ceil, pi, sqrt

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import eval_genlaguerre, gammaln, j0

from . import kernels
from .errors import CutoffTooSmall, GridTooCoarse, NegativeMass, QuadratureDivergence, SpecError
from .fock import (
    DensityOperator,
    DiagonalState,
    FockCutoff,
    annihilation,
    build_density,
    diagonal_state,
    displacement_matrix,
    embed,
)

log = logging.getLogger(__name__)

CHUNK = 4096


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Quadrature nodes for phase-space integrals (single mode).

    lattice: nodes z on a square lattice, weights h^2 (d^2 z measure).
    radial:  nodes r, weights for int_0^inf 2 r f(r) dr.
    polar:   radial nodes r with weights for int r dr, times n_angle
             uniform angles; nodes/weights flatten to the d^2 z measure.
    """

    kind: str
    radius: float
    step: float
    nodes: np.ndarray
    weights: np.ndarray
    radii: np.ndarray = field(default=None)
    rweights: np.ndarray = field(default=None)
    n_angle: int = 0
    modes: int = 1


@dataclass(frozen=True, eq=False)
class CharSamples:
    grid: PhaseGrid
    values: np.ndarray


def lattice_grid(radius: float = 8.0, step: float = 0.05) -> PhaseGrid:
    nsteps = radius / step
    if step <= 0 or abs(nsteps - round(nsteps)) > 1e-9:
        raise SpecError("lattice radius must be an integer multiple of the step")
    n = int(round(nsteps))
    ax = step * np.arange(-n, n + 1)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    nodes = (X + 1j * Y).ravel()
    return PhaseGrid("lattice", radius, step, nodes, np.full(nodes.size, step * step))


def _gl_panels(edges, per_panel):
    x, w = leggauss(per_panel)
    r, wr = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        r.append(0.5 * (b - a) * x + 0.5 * (a + b))
        wr.append(0.5 * (b - a) * w)
    return np.concatenate(r), np.concatenate(wr)


def default_radius(K: int) -> float:
    return 8.0 + sqrt(K)


def nodes_per_unit(K: int) -> int:
    return max(64, int(ceil(sqrt(K))) + 48)


def radial_grid(K: int = 0, radius: float | None = None, per_unit: int | None = None) -> PhaseGrid:
    """Gauss-Legendre panels of unit width on [0, R] with R = 8 + sqrt(K)."""
    R = default_radius(K) if radius is None else radius
    npu = nodes_per_unit(K) if per_unit is None else per_unit
    edges = np.arange(0.0, ceil(R) + 1.0)
    r, wr = _gl_panels(edges, npu)
    return PhaseGrid("radial", float(edges[-1]), 1.0 / npu, r, 2.0 * r * wr, r, wr)


def polar_grid(K: int, radius: float | None = None, n_angle: int | None = None,
               per_unit: int | None = None) -> PhaseGrid:
    rg = radial_grid(K, radius, per_unit)
    na = n_angle or max(64, 4 * (K + 1))
    na += na % 2
    phi = 2 * pi * np.arange(na) / na
    nodes = (rg.radii[:, None] * np.exp(1j * phi)[None, :]).ravel()
    weights = np.repeat(rg.rweights * rg.radii * (2 * pi / na), na)
    return PhaseGrid("polar", rg.radius, rg.step, nodes, weights, rg.radii, rg.rweights, na)


# ------------------------------------------------------------ matrix elements

def disp_diagonal(d: int, n: np.ndarray, r: np.ndarray) -> np.ndarray:
    """f[n_i, r_j] with <n+d|D_z|n> = f e^{i d arg z}, |z| = r."""
    n = np.asarray(n)[:, None]
    r = np.asarray(r, dtype=float)[None, :]
    x = r * r
    ad = abs(d)
    lo = n if d >= 0 else n + d
    hi = lo + ad
    with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
        logr = np.log(r)
        logpre = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) + ad * logr - 0.5 * x
        val = np.exp(logpre) * eval_genlaguerre(lo, ad, x)
    if ad > 0:
        val = np.where(r == 0.0, 0.0, val)
    else:
        val = np.where(r == 0.0, 1.0, val)
    if d < 0 and ad % 2 == 1:
        val = -val
    return val


def _operator(T):
    """(matrix, modes, K) for a state or bare operator."""
    if isinstance(T, DensityOperator):
        return T.entries, T.modes, T.K
    if isinstance(T, DiagonalState):
        return None, 1, T.K
    a = np.asarray(T)
    return a, 1, a.shape[0] - 1


def char_values(T, z) -> np.ndarray:
    """chi_T at an array of single-mode points z."""
    z = np.asarray(z, dtype=complex).ravel()
    if isinstance(T, DiagonalState):
        return kernels.laguerre_eval(np.ascontiguousarray(T.probs), np.abs(z) ** 2).astype(complex)
    a, m, K = _operator(T)
    if m != 1:
        return np.array([char_fn(T, zz) for zz in z])
    out = np.zeros(z.size, dtype=complex)
    r = np.abs(z)
    ph = np.exp(1j * np.angle(z))
    for d in range(-K, K + 1):
        n = np.arange(max(0, -d), min(K, K - d) + 1)
        # chi = sum_{n,m} T[n, m] <m|D|n>, m = n + d
        coeff = a[n, n + d]
        if not np.any(coeff):
            continue
        for s in range(0, z.size, CHUNK):
            sl = slice(s, s + CHUNK)
            f = disp_diagonal(d, n, r[sl])
            out[sl] += (coeff @ f) * ph[sl] ** d
    return out


def char_fn(T, z) -> complex:
    """chi_T(z) = tr(T D_z); z is a complex scalar or a length-m vector."""
    if isinstance(T, DiagonalState) or _operator(T)[1] == 1:
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        if zz.size != 1:
            raise SpecError("single-mode operator needs a scalar z")
        return complex(char_values(T, zz)[0])
    a, m, K = _operator(T)
    D = displacement_matrix(z, FockCutoff(K, m), check_upto=-1)
    return complex(np.sum(a.T * D))


def char_samples(T, grid: PhaseGrid) -> CharSamples:
    if grid.kind == "radial":
        if not isinstance(T, DiagonalState) and not _is_diagonal(T):
            raise SpecError("radial grids need a Fock-diagonal operator")
        vals = char_values(_as_diag(T), grid.nodes)
        return CharSamples(grid, vals)
    return CharSamples(grid, char_values(T, grid.nodes))


def _is_diagonal(T) -> bool:
    a = _operator(T)[0]
    return a is not None and np.count_nonzero(a - np.diag(np.diag(a))) == 0


def _as_diag(T) -> DiagonalState:
    if isinstance(T, DiagonalState):
        return T
    a = _operator(T)[0]
    return DiagonalState(np.real(np.diag(a)).copy())


def dump_samples(samples: CharSamples, path) -> None:
    with open(path, "w") as fh:
        if samples.grid.kind == "radial":
            fh.write("r,chi\n")
            for r, c in zip(samples.grid.nodes, samples.values):
                fh.write(f"{r!r},{float(np.real(c))!r}\n")
            return
        fh.write("re_z,im_z,re_chi,im_chi\n")
        for z, c in zip(samples.grid.nodes, samples.values):
            fh.write(f"{z.real!r},{z.imag!r},{c.real!r},{c.imag!r}\n")


# ------------------------------------------------------------ transforms

def _check_tail(samples: CharSamples, tol: float = 1e-4) -> None:
    g = samples.grid
    if g.kind == "lattice":
        edge = np.max(np.abs(np.abs(g.nodes.real) - g.radius), initial=0.0)
        ring = (np.abs(np.abs(g.nodes.real) - g.radius) < 0.5 * g.step) | \
               (np.abs(np.abs(g.nodes.imag) - g.radius) < 0.5 * g.step)
        del edge
    else:
        rr = np.abs(g.nodes)
        ring = rr >= rr.max() - 1e-12
    if np.max(np.abs(samples.values[ring]), initial=0.0) > tol:
        raise GridTooCoarse("characteristic function has not decayed at the grid edge")


def wigner_fn(T, z, grid: PhaseGrid | None = None) -> np.ndarray:
    """W_T at the given points, by direct quadrature of the sampled chi."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if isinstance(T, DiagonalState) or _is_diagonal(T):
        K = _operator(T)[2]
        g = grid if grid is not None and grid.kind == "radial" else radial_grid(K)
        s = char_samples(_as_diag(T), g)
        _check_tail(s)
        chi = np.real(s.values)
        # W(z) = (1/pi) int 2r chi(r) J0(2|z|r) dr
        return np.array([float(g.weights @ (chi * j0(2 * abs(zz) * g.nodes))) / pi for zz in z])
    g = grid if grid is not None else lattice_grid()
    s = char_samples(T, g)
    _check_tail(s)
    out = np.empty(z.size)
    wchi = s.values * g.weights
    for i, zz in enumerate(z):
        kern = np.exp(zz * np.conj(g.nodes) - np.conj(zz) * g.nodes)
        val = np.sum(wchi * kern) / pi ** 2
        if abs(val.imag) > 1e-8:
            raise GridTooCoarse(f"Wigner value not real: {val}")
        out[i] = val.real
    return out


def wigner_normalization(T, grid: PhaseGrid | None = None, zstep: float = 0.1, zrad: float = 6.0) -> float:
    """Integral of W over a z-lattice (should equal tr T)."""
    ax = zstep * np.arange(-round(zrad / zstep), round(zrad / zstep) + 1)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    pts = (X + 1j * Y).ravel()
    if isinstance(T, DiagonalState) or _is_diagonal(T):
        # W depends on |z| only; evaluate on unique radii
        rr, inv = np.unique(np.round(np.abs(pts), 12), return_inverse=True)
        w = wigner_fn(T, rr, grid)[inv]
    else:
        w = wigner_fn(T, pts, grid)
    return float(w.sum() * zstep * zstep)


def plancherel_residual(T, grid: PhaseGrid | None = None) -> float:
    """| ||T||_2^2 - pi^-1 int |chi_T|^2 | / max(||T||_2^2, 1e-30)."""
    g = grid if grid is not None else lattice_grid()
    if g.radius < 8.0 - 1e-12:
        raise GridTooCoarse("Plancherel checks need a grid radius of at least 8")
    if isinstance(T, DiagonalState):
        hs = float(T.probs @ T.probs)
    else:
        a = _operator(T)[0]
        hs = float(np.sum(np.abs(a) ** 2))
    s = char_samples(T, g)
    if g.kind == "radial":
        integral = float(g.weights @ np.abs(s.values) ** 2)
    else:
        integral = float(g.weights @ np.abs(s.values) ** 2) / pi
    return abs(hs - integral) / max(hs, 1e-30)


def trace_norm_upper(T, grid: PhaseGrid | None = None) -> float:
    """sqrt((pi^2/6)^m int |chi_{A^dag T A}|^2), A = a_1 ... a_m."""
    if isinstance(T, DiagonalState):
        k = np.arange(T.K + 2, dtype=float)
        x = np.zeros(T.K + 2)
        x[1:] = k[1:] * T.probs
        X = DiagonalState(x)
        g = grid if grid is not None and grid.kind == "radial" else radial_grid(T.K + 1)
        s = char_samples(X, g)
        integral = pi * float(g.weights @ np.abs(s.values) ** 2)
        return sqrt(pi ** 2 / 6 * integral)
    a, m, K = _operator(T)
    if m == 1:
        big = np.zeros((K + 2, K + 2), dtype=complex)
        big[: K + 1, : K + 1] = a
        lo = annihilation(1, K + 1)
        X = lo.T @ big @ lo
        if _is_diagonal(X):
            g = grid if grid is not None and grid.kind == "radial" else radial_grid(K + 1)
            s = char_samples(DiagonalState(np.real(np.diag(X)).copy()), g)
            integral = pi * float(g.weights @ np.abs(s.values) ** 2)
        else:
            g = grid if grid is not None and grid.kind != "radial" else polar_grid(K + 1)
            s = char_samples(X, g)
            integral = float(g.weights @ np.abs(s.values) ** 2)
        return sqrt(pi ** 2 / 6 * integral)
    # multi-mode: the 2m-dimensional integral equals pi^m ||X||_2^2 (Plancherel)
    rho = DensityOperator(m, FockCutoff(K + m, m), np.zeros((1, 1)))
    big = embed(DensityOperator(m, FockCutoff(K, m), a), K + m).entries
    A = np.eye(big.shape[0])
    for j in range(m):
        A = A @ annihilation(m, K + m, j)
    X = A.T @ big @ A
    del rho
    integral = pi ** m * float(np.sum(np.abs(X) ** 2))
    return sqrt((pi ** 2 / 6) ** m * integral)


# ------------------------------------------------------------ inversion

def invert_char(samples: CharSamples, cutoff: FockCutoff | int, validate: bool = True):
    """T = pi^-1 int chi(z) D_{-z} d^2 z, returned as a DensityOperator."""
    K = cutoff.value if isinstance(cutoff, FockCutoff) else int(cutoff)
    g = samples.grid
    if g.kind == "radial":
        return diagonal_from_radial_char(np.real(samples.values), K, g)
    if g.kind == "lattice" and g.step > pi / (4 * sqrt(max(K, 1))):
        raise GridTooCoarse(f"step {g.step} does not resolve cutoff {K}")
    _check_tail(samples, 1e-10)
    out = np.zeros((K + 1, K + 1), dtype=complex)
    if g.kind == "polar":
        nr, na = g.radii.size, g.n_angle
        vals = samples.values.reshape(nr, na)
        # angular Fourier coefficients: c_d(r) = (2pi/na) sum_p chi e^{i d phi_p}
        spec = np.fft.ifft(vals, axis=1) * 2 * pi
        rw = g.rweights * g.radii
        for d in range(-K, K + 1):
            n = np.arange(max(0, -d), min(K, K - d) + 1)
            cd = spec[:, d % na]
            f = disp_diagonal(d, n, g.radii)
            # <n+d| T |n> = (1/pi) int chi(z) <n+d|D_{-z}|n> d^2 z
            out[n + d, n] = ((-1) ** (d % 2)) * (f @ (rw * cd)) / pi
    else:
        r = np.abs(g.nodes)
        ph = np.exp(1j * np.angle(g.nodes))
        wv = samples.values * g.weights
        for d in range(-K, K + 1):
            n = np.arange(max(0, -d), min(K, K - d) + 1)
            acc = np.zeros(n.size, dtype=complex)
            for s in range(0, r.size, CHUNK):
                sl = slice(s, s + CHUNK)
                f = disp_diagonal(d, n, r[sl])
                acc += f @ (wv[sl] * ph[sl] ** d)
            out[n + d, n] = ((-1) ** (d % 2)) * acc / pi
    out = 0.5 * (out + out.conj().T)
    deficit = max(0.0, 1.0 - float(np.real(np.trace(out))))
    if not validate:
        return DensityOperator(1, FockCutoff(K), out, deficit)
    return build_density(out, 1, FockCutoff(K), trace_deficit=deficit if deficit > 1e-10 else 0.0)


def radial_project(chi_values: np.ndarray, K: int, grid: PhaseGrid) -> np.ndarray:
    """p_j = int_0^inf 2 r chi(r) e^{-r^2/2} L_j(r^2) dr on a radial grid."""
    w = np.ascontiguousarray(grid.weights * np.asarray(chi_values, dtype=float))
    return kernels.laguerre_project(np.ascontiguousarray(grid.nodes ** 2), w, int(K))


def diagonal_from_radial_char(chi, K: int, grid: PhaseGrid | None = None) -> DiagonalState:
    """Fock weights of a phase-invariant operator from its radial char."""
    g = grid if grid is not None else radial_grid(K)
    vals = chi(g.nodes) if callable(chi) else np.asarray(chi, dtype=float)
    edge = np.abs(vals[g.nodes >= g.nodes.max() - 0.5])
    if edge.size and edge.max() > 1e-10:
        raise QuadratureDivergence("radial char has not decayed at the grid edge")
    p = radial_project(vals, K, g)
    if p.min() < -1e-9:
        raise NegativeMass(f"weight {p.min():.3e} at k = {int(np.argmin(p))}")
    if p.min() < 0:
        log.debug("clipping %d tiny negative weights", int(np.sum(p < 0)))
        p = np.clip(p, 0.0, None)
    tot = float(p.sum())
    if tot > 1.0:
        log.debug("renormalizing weights by %.3e", tot - 1.0)
        p = p / tot
        tot = 1.0
    return diagonal_state(p, tail_mass=max(0.0, 1.0 - tot))


def radial_char(state: DiagonalState, r) -> np.ndarray:
    return kernels.laguerre_eval(np.ascontiguousarray(state.probs), np.asarray(r, dtype=float) ** 2)


def max_char_modulus(T, radii=(0.1, 5.0), count: int = 200, seed: int = 0) -> float:
    """Largest |chi_T(z)| over seeded points with |z| in the given range."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(radii[0], radii[1], count)
    phi = rng.uniform(0, 2 * pi, count)
    return float(np.max(np.abs(char_values(T, r * np.exp(1j * phi)))))


__all__ = [
    "PhaseGrid", "CharSamples", "lattice_grid", "radial_grid", "polar_grid",
    "char_fn", "char_values", "char_samples", "wigner_fn", "wigner_normalization",
    "plancherel_residual", "trace_norm_upper", "invert_char", "diagonal_from_radial_char",
    "radial_project", "radial_char", "disp_diagonal", "dump_samples", "max_char_modulus",
    "CutoffTooSmall",
]
