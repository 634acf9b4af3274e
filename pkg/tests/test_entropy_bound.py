from math import exp, log, pi, sqrt

import numpy as np
import pytest

from conftest import number, pure
from qclt.convolution import nfold_symmetric
from qclt.entropy_bound import (
    OddPolynomial,
    appendix_tail_sums,
    balancing_t,
    bound_constants,
    ladder_coefficients,
    m_beta_e,
    non_gaussianity_upper,
    pointwise_bound_check,
    relent_upper,
    tau_alpha,
    truncated_rhs,
)
from qclt.errors import InfiniteBeta, SpecError
from qclt.fock import DensityOperator, build_density, displacement_matrix, DiagonalState, FockCutoff, annihilation, covariance, relative_entropy
from qclt.gaussian import ThermalSpec, thermal_fock
from qclt.phase_space import char_values
from qclt.states import random_dense, random_diagonal

CUBIC = OddPolynomial({(3, 0): sqrt(6) / 12, (0, 3): -sqrt(6) / 12})
HOM = DiagonalState(np.array([0.5, 0.0, 0.5]))


def test_constants_at_three_fifths():
    c = bound_constants(log(5 / 3))
    assert c.nu_beta == pytest.approx(0.4)
    assert c.zeta == pytest.approx(pi ** 2 / 6)
    assert c.eta_beta == pytest.approx(log(25 / 6) + 1)
    assert c.c_prime == pytest.approx(2 * (log(5 / 3) + 1) / 0.4)
    assert c.c_double_prime == pytest.approx(2 * (log(25 / 6) + 1) * (log(5 / 3) + 1) ** 2 / 0.4)
    assert c.c_final == max(c.branches)
    assert all(v > 0 for k, v in c.as_dict().items() if k not in ("m_beta_e", "branches"))


def test_constants_two_modes():
    c = bound_constants([1.0, 2.0])
    assert c.zeta == pytest.approx(sum(k ** -1.5 for k in range(1, 2_000_000)), rel=1e-3)
    assert c.nu_beta == pytest.approx((1 - exp(-1)) * (1 - exp(-2)))


def test_constants_reject_vacuum_mode():
    with pytest.raises(InfiniteBeta):
        bound_constants(float("inf"))


def test_odd_polynomial_validation():
    with pytest.raises(SpecError):
        OddPolynomial({(1, 1): 1.0})
    with pytest.raises(SpecError):
        OddPolynomial({(3, 0): 1.0, (0, 3): 1.0})
    z = np.array([0.2 + 0.3j, -0.5j])
    assert np.allclose(CUBIC(-z), -CUBIC(z))
    assert np.allclose(CUBIC(-z), np.conj(CUBIC(z)))


def test_tau_alpha_examples():
    th = ThermalSpec.from_nu(4.0)
    K = 120
    base = tau_alpha(th, CUBIC, 0.0, K)
    assert np.allclose(base, np.diag(thermal_fock(th, K, tol=1.0).probs))
    ta = tau_alpha(th, CUBIC, 0.01, K)
    assert np.max(np.abs(np.diag(ta) - np.diag(base))) < 1e-10
    assert np.allclose(ta, ta.conj().T)


def test_tau_alpha_characteristic_function(rng):
    th = ThermalSpec.from_nu(3.0)
    K = 80
    alpha = 0.1
    T = DensityOperator(1, FockCutoff(K), tau_alpha(th, CUBIC, alpha, K), 0.0)
    z = 0.7 * (rng.normal(size=50) + 1j * rng.normal(size=50))
    expected = np.exp(-1.5 * np.abs(z) ** 2) * (1 + alpha * CUBIC(z))
    assert np.max(np.abs(char_values(T, z) - expected)) < 1e-7


def test_trace_sum_constant_against_dense_products():
    beta = log(2.0)
    K = 200
    a = annihilation(1, K)
    tau = np.diag(0.5 ** (np.arange(K + 1) + 1))
    coeffs = ladder_coefficients(CUBIC, beta)
    ops = {key: np.linalg.matrix_power(a.T, key[0]) @ np.linalg.matrix_power(a, key[1]) for key in coeffs}
    ref = 0.0
    for k1, c1 in coeffs.items():
        for k2, c2 in coeffs.items():
            ref += abs(c1 * c2 * np.trace(ops[k2] @ ops[k1] @ tau))
    assert m_beta_e(beta, CUBIC) == pytest.approx(ref, rel=1e-9)
    assert m_beta_e(beta, CUBIC) == pytest.approx(0.28125, abs=1e-12)


def test_pointwise_examples(rng):
    th3 = ThermalSpec.from_nu(3.0)
    margin, margins = pointwise_bound_check(thermal_fock(th3, 60), th3)
    assert margin >= -1e-12
    assert np.allclose(margins, 0, atol=1e-12)
    assert pointwise_bound_check(HOM, th3)[0] >= 0
    th4 = ThermalSpec.from_nu(4.0)
    for i in range(20):
        rho = random_diagonal(rng, 12) if i % 2 else random_dense(rng, 12)
        assert pointwise_bound_check(rho, th4)[0] >= -1e-8


def test_truncated_rhs_examples():
    th3 = ThermalSpec.from_nu(3.0)
    tau = thermal_fock(th3, 80)
    res = truncated_rhs(tau, th3, 2.0)
    assert res.divergence == pytest.approx(0.0, abs=1e-12)
    assert res.terms[0] == pytest.approx(0.0, abs=1e-12)
    assert res.terms[1] == pytest.approx(0.0, abs=1e-12)
    assert res.rhs >= 0
    for t in (0.0, 1.0, 2.0, 5.0):
        rhs, holds = truncated_rhs(HOM, th3, t)
        assert holds
    big = truncated_rhs(HOM, th3, float("inf"))
    # sum_k (p_k - t_k)^2 / t_k for p = (1/2, 0, 1/2) against t_k = 2^-(k+1)
    assert big.rhs == pytest.approx(1.5, abs=1e-12)
    assert big.rhs >= big.divergence


def test_balancing_rule():
    for eps in (1e-1, 1e-3, 1e-6):
        t = balancing_t(eps, 1)
        assert exp(t) / (t + 1) == pytest.approx(1 / eps, rel=1e-9)
    assert balancing_t(2.0, 1) == 0.0


def test_relent_examples():
    th3 = ThermalSpec.from_nu(3.0)
    res = relent_upper(thermal_fock(th3, 80), th3)
    assert res.divergence == pytest.approx(0.0, abs=1e-12)
    assert res.holds and res.bound >= 0
    out = nfold_symmetric(number(1), 16)
    bound, holds = relent_upper(out, th3)
    assert holds


def test_relent_with_correction_term():
    th3 = ThermalSpec.from_nu(3.0)
    res = relent_upper(HOM, th3, CUBIC, 0.05)
    assert res.holds
    assert res.constants.m_beta_e == pytest.approx(0.28125)


def test_relent_chain(rng):
    for _ in range(8):
        rho = random_diagonal(rng, 12)
        th = ThermalSpec.from_nu(covariance(rho)[0, 0])
        res = relent_upper(rho, th)
        rhs = truncated_rhs(rho, th, res.t_star)
        assert res.divergence <= rhs.rhs + 1e-8
        assert rhs.rhs <= res.bound + 1e-8


def test_relent_on_gaussified_random_states(rng):
    for i in range(10):
        rho = random_diagonal(rng, 16) if i % 2 else random_dense(rng, 16)
        ng = non_gaussianity_upper(rho)
        assert ng.holds


def test_relent_matches_corollary_for_diagonal_states(rng):
    rho = random_diagonal(rng, 10)
    th = ThermalSpec.from_nu(covariance(rho)[0, 0])
    assert relent_upper(rho, th).bound == pytest.approx(non_gaussianity_upper(rho).bound, abs=1e-12)


def test_non_gaussianity_examples():
    d_g, bound, holds = non_gaussianity_upper(thermal_fock(ThermalSpec.from_nu(3.0), 80))
    assert abs(d_g) < 1e-10 and holds
    d_g, bound, holds = non_gaussianity_upper(number(1))
    # -<1| ln tau |1> for tau_k = 2^-(k+1)
    assert d_g == pytest.approx(log(4), abs=1e-10)
    assert holds
    prev = np.inf
    for n in (4, 16, 64):
        d_g, _, holds = non_gaussianity_upper(nfold_symmetric(number(1), n))
        assert holds and d_g < prev
        prev = d_g


def test_non_gaussianity_of_displaced_state():
    K = 40
    v = displacement_matrix(0.5 - 0.2j, FockCutoff(K))[:, 0]
    coherent = build_density(np.outer(v, v.conj()), 1, FockCutoff(K), trace_deficit=1e-12)
    d_g, _, holds = non_gaussianity_upper(coherent)
    assert d_g == pytest.approx(0.0, abs=1e-6)
    assert holds
    d_g, _, holds = non_gaussianity_upper(pure([1, 1], K=1))
    assert d_g > 0.1 and holds


def test_tail_sum_examples():
    ts = appendix_tail_sums(1.0, 0.0)
    assert ts.f_exact == pytest.approx(exp(-1) / (1 - exp(-1)), rel=1e-12)
    assert ts.f_bound == pytest.approx(4 / (1 - exp(-1)))
    for t in range(11):
        f, fb, g, gb = appendix_tail_sums([1.0, 2.0], float(t))
        assert f <= fb + 1e-10 and g <= gb + 1e-10
    far = appendix_tail_sums(1.0, 20.0)
    assert far.f_exact < 1e-7 and far.f_bound < 1e-6
    assert far.f_bound / far.f_exact < 100


@pytest.mark.parametrize("betas", [[0.3], [2.0], [0.5, 1.5], [1.0, 1.0, 1.0]])
def test_tail_sums_respect_bounds(betas):
    for t in np.linspace(0, 12, 7):
        f, fb, g, gb = appendix_tail_sums(betas, float(t))
        assert f <= fb + 1e-10
        assert g <= gb + 1e-10


def test_squeezed_reference_goes_through_williamson_frame():
    from qclt.gaussian import GaussianSpec

    rho = pure([1, 0, 1], K=2)
    spec = GaussianSpec(1, np.zeros(2), covariance(rho))
    res = relent_upper(rho, spec)
    assert res.holds
