"""State descriptors used by the command line and the experiment drivers.

A SPEC string names a single-mode state:

    fock:K                    the number state |K>
    super:a,b                 (|a> + |b>)/sqrt 2
    thermal:nu=V | beta=B     a thermal state
    mixture:kind=trace|relent,theta=T
    file:PATH                 a state file (see fock.read_state)
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .counterexamples import MixtureDensity, mixture_diag, mixture_family
from .errors import SpecError
from .fock import DensityOperator, DiagonalState, FockCutoff, build_density, diagonal_state, read_state
from .gaussian import ThermalSpec, thermal_fock

MIXTURE_CUTOFF = 1024


@dataclass(frozen=True)
class ResolvedState:
    spec: str
    kind: str
    state: object
    density: MixtureDensity | None = None
    thermal: ThermalSpec | None = None


def _kv(body: str) -> dict:
    out = {}
    for part in body.split(","):
        if "=" not in part:
            raise SpecError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _thermal_cutoff(spec: ThermalSpec, tol: float = 1e-12) -> int:
    q = float(spec.ratios[0])
    if q <= 0:
        return 0
    return max(int(np.ceil(np.log(tol) / np.log(q))), 1)


def number_state(K: int) -> DiagonalState:
    p = np.zeros(K + 1)
    p[K] = 1.0
    return diagonal_state(p)


def superposition(a: int, b: int) -> DensityOperator:
    if a == b:
        raise SpecError("superposition needs two distinct levels")
    K = max(a, b)
    v = np.zeros(K + 1)
    v[a] = v[b] = 1 / sqrt(2)
    return build_density(np.outer(v, v), 1, FockCutoff(K))


def parse_state(text: str, cutoff: int | None = None) -> ResolvedState:
    """Resolve a SPEC string; cutoff overrides the default truncation where
    the state is not already finite."""
    if ":" not in text:
        raise SpecError(f"state spec {text!r} has no kind prefix")
    kind, body = text.split(":", 1)
    kind = kind.strip().lower()
    try:
        if kind == "fock":
            K = int(body)
            if K < 0:
                raise SpecError("Fock level must be nonnegative")
            return ResolvedState(text, kind, number_state(K))
        if kind == "super":
            a, b = (int(x) for x in body.split(","))
            if min(a, b) < 0:
                raise SpecError("Fock levels must be nonnegative")
            return ResolvedState(text, kind, superposition(a, b))
        if kind == "thermal":
            kv = _kv(body)
            if set(kv) == {"nu"}:
                th = ThermalSpec.from_nu(float(kv["nu"]))
            elif set(kv) == {"beta"}:
                th = ThermalSpec.from_beta(float(kv["beta"]))
            else:
                raise SpecError("thermal spec takes exactly one of nu= or beta=")
            K = _thermal_cutoff(th) if cutoff is None else cutoff
            return ResolvedState(text, kind, thermal_fock(th, K, tol=1.0), thermal=th)
        if kind == "mixture":
            kv = _kv(body)
            if set(kv) != {"kind", "theta"}:
                raise SpecError("mixture spec takes kind= and theta=")
            w = mixture_family(kv["kind"], float(kv["theta"]))
            K = MIXTURE_CUTOFF if cutoff is None else cutoff
            return ResolvedState(text, kind, mixture_diag(w, K), density=w)
        if kind == "file":
            return ResolvedState(text, kind, read_state(body))
    except ValueError as exc:
        raise SpecError(f"cannot parse state spec {text!r}: {exc}") from exc
    raise SpecError(f"unknown state kind {kind!r}")


# ------------------------------------------------------------ random states

def random_diagonal(rng: np.random.Generator, K: int, concentration: float = 1.0) -> DiagonalState:
    """Dirichlet-distributed Fock weights on levels 0..K."""
    return diagonal_state(rng.dirichlet(np.full(K + 1, concentration)), 0.0)


def random_dense(rng: np.random.Generator, K: int, strength: float = 0.2) -> DensityOperator:
    """A Dirichlet diagonal plus a small complex Gaussian perturbation,
    projected back onto the density matrices (eigenvalues clipped at 0,
    trace restored)."""
    base = np.diag(rng.dirichlet(np.ones(K + 1))).astype(complex)
    g = rng.normal(size=(K + 1, K + 1)) + 1j * rng.normal(size=(K + 1, K + 1))
    h = (g + g.conj().T) / (2 * sqrt(2 * (K + 1)))
    x = base + strength * h / (K + 1)
    lam, v = np.linalg.eigh(0.5 * (x + x.conj().T))
    lam = np.clip(lam, 0.0, None)
    lam = lam / lam.sum()
    out = (v * lam) @ v.conj().T
    return build_density(0.5 * (out + out.conj().T), 1, FockCutoff(K))


__all__ = [
    "ResolvedState", "parse_state", "number_state", "superposition",
    "random_diagonal", "random_dense", "MIXTURE_CUTOFF",
]
