"""Numerical companion for quantum central limit theorems on bosonic modes.

Modules by topic: ``fock`` (truncated states and functionals),
``gaussian``, ``phase_space``, ``convolution``, ``edgeworth``,
``entropy_bound``, ``counterexamples`` and ``experiments`` (with the
``qclt`` command line in ``cli``).
"""
from .kernels import BACKEND
from .errors import InvalidInput, NumericalFailure, QcltError
from .fock import (
    DensityOperator,
    DiagonalState,
    FockCutoff,
    build_density,
    covariance,
    diagonal_state,
    first_moments,
    hs_distance,
    moment,
    relative_entropy,
    trace_distance,
    truncate,
    von_neumann_entropy,
)
from .gaussian import GaussianSpec, ThermalSpec, gaussify, thermal_fock, williamson_1mode
from .phase_space import char_fn, plancherel_residual, wigner_fn
from .convolution import convolve_pair, nfold_symmetric
from .edgeworth import edgeworth_polynomials, expansion_residual, weyl_cumulants
from .entropy_bound import OddPolynomial, bound_constants, non_gaussianity_upper, relent_upper
from .counterexamples import h_eval, mixture_diag, mixture_family, plateau_solve
from .states import parse_state

__version__ = "0.1.0"
